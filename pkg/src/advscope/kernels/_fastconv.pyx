# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled float32 packing kernels behind the convolution backend.

The matrix products themselves go through BLAS either way; what the compiled
backend buys is C-speed im2col packing and col2im scatter, which dominate the
numpy fallback's runtime at these layer sizes. Inputs arrive pre-padded; the
python wrapper in ``advscope.kernels`` owns padding, cropping, dtype dispatch
and the BLAS calls. Packing parallelizes over the batch with OpenMP.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange

BACKEND = "compiled"


def im2col_packed(cnp.float32_t[:, :, :, ::1] xp,
                  int kh, int kw, int stride, int oh, int ow):
    """(N, C, Hp, Wp) -> (N * oh * ow, C * kh * kw) patch matrix."""
    cdef int n = xp.shape[0], c = xp.shape[1]
    cdef int patch = c * kh * kw
    cols_arr = np.empty((n * oh * ow, patch), dtype=np.float32)
    cdef cnp.float32_t[:, ::1] cols = cols_arr
    cdef int bi, i, j, ic, u, v, row, col
    for bi in prange(n, nogil=True, schedule='static'):
        for i in range(oh):
            for j in range(ow):
                row = (bi * oh + i) * ow + j
                col = 0
                for ic in range(c):
                    for u in range(kh):
                        for v in range(kw):
                            cols[row, col] = xp[bi, ic, i * stride + u, j * stride + v]
                            col = col + 1
    return cols_arr


def col2im_accum(cnp.float32_t[:, ::1] gcols,
                 int n, int c, int hp, int wp,
                 int kh, int kw, int stride, int oh, int ow):
    """Scatter-add (N * oh * ow, C * kh * kw) gradients back to (N, C, Hp, Wp)."""
    gxp_arr = np.zeros((n, c, hp, wp), dtype=np.float32)
    cdef cnp.float32_t[:, :, :, ::1] gxp = gxp_arr
    cdef int bi, i, j, ic, u, v, row, col
    for bi in prange(n, nogil=True, schedule='static'):
        for i in range(oh):
            for j in range(ow):
                row = (bi * oh + i) * ow + j
                col = 0
                for ic in range(c):
                    for u in range(kh):
                        for v in range(kw):
                            gxp[bi, ic, i * stride + u, j * stride + v] += gcols[row, col]
                            col = col + 1
    return gxp_arr


def nhwc_to_nchw(cnp.float32_t[:, :, :, ::1] y):
    """(N, oh, ow, O) -> contiguous (N, O, oh, ow)."""
    cdef int n = y.shape[0], oh = y.shape[1], ow = y.shape[2], o = y.shape[3]
    out_arr = np.empty((n, o, oh, ow), dtype=np.float32)
    cdef cnp.float32_t[:, :, :, ::1] out = out_arr
    cdef int bi, i, j, oc
    for bi in prange(n, nogil=True, schedule='static'):
        for i in range(oh):
            for j in range(ow):
                for oc in range(o):
                    out[bi, oc, i, j] = y[bi, i, j, oc]
    return out_arr


def nchw_to_mat(cnp.float32_t[:, :, :, ::1] gy):
    """(N, O, oh, ow) -> contiguous (N * oh * ow, O)."""
    cdef int n = gy.shape[0], o = gy.shape[1], oh = gy.shape[2], ow = gy.shape[3]
    out_arr = np.empty((n * oh * ow, o), dtype=np.float32)
    cdef cnp.float32_t[:, ::1] out = out_arr
    cdef int bi, i, j, oc, row
    for bi in prange(n, nogil=True, schedule='static'):
        for oc in range(o):
            for i in range(oh):
                for j in range(ow):
                    out[(bi * oh + i) * ow + j, oc] = gy[bi, oc, i, j]
    return out_arr
