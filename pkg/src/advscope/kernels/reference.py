"""Pure-numpy convolution kernels (im2col + BLAS matmul).

This is the fallback backend and also the reference the compiled extension is
tested against. It is dtype-generic: float64 inputs stay in float64, which is
what the gradient-check mode relies on.
"""

import numpy as np

BACKEND = "numpy"


def _pad(x, pad):
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _im2col(xp, kh, kw, stride, out_h, out_w):
    # (N, C, out_h, out_w, kh, kw) view without copying
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    n, c = xp.shape[:2]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * out_h * out_w, c * kh * kw)
    return np.ascontiguousarray(cols)


def conv2d_forward(x, w, b, stride=1, pad=0):
    """x: (N,C,H,W), w: (O,C,kh,kw), b: (O,) -> (N,O,oh,ow)."""
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (wd + 2 * pad - kw) // stride + 1
    cols = _im2col(_pad(x, pad), kh, kw, stride, oh, ow)
    y = cols @ w.reshape(o, -1).T + b
    return y.reshape(n, oh, ow, o).transpose(0, 3, 1, 2)


def conv2d_backward(x, w, stride, pad, gy):
    """Gradients of conv2d_forward. Returns (gx, gw, gb)."""
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    _, _, oh, ow = gy.shape
    cols = _im2col(_pad(x, pad), kh, kw, stride, oh, ow)
    gy_mat = gy.transpose(0, 2, 3, 1).reshape(n * oh * ow, o)
    gw = (gy_mat.T @ cols).reshape(o, c, kh, kw)
    gb = gy_mat.sum(axis=0, dtype=np.float64).astype(x.dtype)
    gcols = gy_mat @ w.reshape(o, -1)
    gcols = gcols.reshape(n, oh, ow, c, kh, kw)
    gxp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=x.dtype)
    for u in range(kh):
        for v in range(kw):
            gxp[:, :, u : u + stride * oh : stride, v : v + stride * ow : stride] += (
                gcols[:, :, :, :, u, v].transpose(0, 3, 1, 2)
            )
    if pad:
        gxp = gxp[:, :, pad:-pad, pad:-pad]
    return gxp, gw, gb
