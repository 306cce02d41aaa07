"""Convolution kernel backend selection.

The compiled extension is preferred when it imported cleanly; otherwise the
numpy im2col implementation is used. ``ADVSCOPE_KERNELS=numpy`` forces the
fallback (useful for benchmarking and for debugging the extension). float64
inputs always take the numpy path: the compiled kernels are float32-only and
the 64-bit path exists for gradient checking, where BLAS accumulation order
does not matter.
"""

import os

import numpy as np

from . import reference

_fast = None
if os.environ.get("ADVSCOPE_KERNELS", "auto") != "numpy":
    try:
        from . import _fastconv as _fast
    except ImportError:
        _fast = None

BACKEND = "compiled" if _fast is not None else "numpy"


def conv2d_forward(x, w, b, stride=1, pad=0):
    if _fast is None or x.dtype != np.float32:
        return reference.conv2d_forward(x, w, b, stride, pad)
    n = x.shape[0]
    o, _, kh, kw = w.shape
    oh = (x.shape[2] + 2 * pad - kh) // stride + 1
    ow = (x.shape[3] + 2 * pad - kw) // stride + 1
    xp = reference._pad(np.ascontiguousarray(x), pad)
    cols = _fast.im2col_packed(xp, kh, kw, stride, oh, ow)
    y = cols @ np.ascontiguousarray(w).reshape(o, -1).T + b
    return _fast.nhwc_to_nchw(y.reshape(n, oh, ow, o))


def conv2d_backward(x, w, stride, pad, gy):
    if _fast is None or x.dtype != np.float32:
        return reference.conv2d_backward(x, w, stride, pad, gy)
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    oh, ow = gy.shape[2], gy.shape[3]
    xp = reference._pad(np.ascontiguousarray(x), pad)
    cols = _fast.im2col_packed(xp, kh, kw, stride, oh, ow)
    gy_mat = _fast.nchw_to_mat(np.ascontiguousarray(gy))
    w_mat = np.ascontiguousarray(w).reshape(o, -1)
    gw = (gy_mat.T @ cols).reshape(o, c, kh, kw)
    gb = gy_mat.sum(axis=0, dtype=np.float64).astype(x.dtype)
    gcols = gy_mat @ w_mat
    gxp = _fast.col2im_accum(
        gcols, n, c, xp.shape[2], xp.shape[3], kh, kw, stride, oh, ow
    )
    if pad:
        gxp = gxp[:, :, pad:-pad, pad:-pad]
    return gxp, gw, gb
