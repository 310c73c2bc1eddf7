# cython: language_level=3
"""Compiled kernels for the hot loops of the autodiff core.

Every function here has a numpy twin in :mod:`voxgrad._pykernels` with the
same signature; :mod:`voxgrad.kernels` picks one at import time.

Convolution lowers each sample to a column matrix and hands the product to
BLAS ``dgemm`` (via scipy's Cython bindings). Pooling and the pointwise
linear map are plain loops.
"""

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline void _valid_range(int n_out, int off, int stride, int pad, int extent,
                              int* lo, int* hi) noexcept nogil:
    # output positions e with 0 <= e*stride + off - pad < extent
    cdef int a = pad - off
    lo[0] = 0 if a <= 0 else (a + stride - 1) // stride
    a = extent - 1 + pad - off
    hi[0] = -1 if a < 0 else a // stride
    if hi[0] > n_out - 1:
        hi[0] = n_out - 1
    hi[0] += 1
    if lo[0] > hi[0]:
        lo[0] = hi[0]


cdef void _im2col(const double[:, :, :, ::1] x, double[:, ::1] cols,
                  int kd, int kh, int kw, int stride, int pad,
                  int od, int oh, int ow) noexcept nogil:
    cdef int C = x.shape[0], D = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef int c, i, j, k, a, b_, e, zi, yi, row, elo, ehi
    cdef Py_ssize_t col
    for c in range(C):
        for i in range(kd):
            for j in range(kh):
                for k in range(kw):
                    row = ((c * kd + i) * kh + j) * kw + k
                    _valid_range(ow, k, stride, pad, W, &elo, &ehi)
                    col = 0
                    for a in range(od):
                        zi = a * stride + i - pad
                        for b_ in range(oh):
                            yi = b_ * stride + j - pad
                            if zi < 0 or zi >= D or yi < 0 or yi >= H:
                                for e in range(ow):
                                    cols[row, col + e] = 0.0
                            else:
                                for e in range(elo):
                                    cols[row, col + e] = 0.0
                                for e in range(elo, ehi):
                                    cols[row, col + e] = x[c, zi, yi, e * stride + k - pad]
                                for e in range(ehi, ow):
                                    cols[row, col + e] = 0.0
                            col += ow


cdef void _col2im(const double[:, ::1] cols, double[:, :, :, ::1] dx,
                  int kd, int kh, int kw, int stride, int pad,
                  int od, int oh, int ow) noexcept nogil:
    cdef int C = dx.shape[0], D = dx.shape[1], H = dx.shape[2], W = dx.shape[3]
    cdef int c, i, j, k, a, b_, e, zi, yi, row, elo, ehi
    cdef Py_ssize_t col
    for c in range(C):
        for i in range(kd):
            for j in range(kh):
                for k in range(kw):
                    row = ((c * kd + i) * kh + j) * kw + k
                    _valid_range(ow, k, stride, pad, W, &elo, &ehi)
                    col = 0
                    for a in range(od):
                        zi = a * stride + i - pad
                        for b_ in range(oh):
                            yi = b_ * stride + j - pad
                            if 0 <= zi < D and 0 <= yi < H:
                                for e in range(elo, ehi):
                                    dx[c, zi, yi, e * stride + k - pad] += cols[row, col + e]
                            col += ow


def conv3d_forward(x, w, b, int stride, int pad):
    cdef const double[:, :, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, :, :, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef int N = xv.shape[0], C = xv.shape[1]
    cdef int K = wv.shape[0], kd = wv.shape[2], kh = wv.shape[3], kw = wv.shape[4]
    cdef int od = (xv.shape[2] + 2 * pad - kd) // stride + 1
    cdef int oh = (xv.shape[3] + 2 * pad - kh) // stride + 1
    cdef int ow = (xv.shape[4] + 2 * pad - kw) // stride + 1
    cdef int L = od * oh * ow, CK = C * kd * kh * kw
    out = np.empty((N, K, od, oh, ow), dtype=np.float64)
    cdef double[:, :, ::1] ov = out.reshape(N, K, L)
    cdef double[:, ::1] cols = np.empty((CK, L), dtype=np.float64)
    cdef const double[:, ::1] w2 = np.asarray(wv).reshape(K, CK)
    cdef char tn = b'N'
    cdef double one = 1.0, zero = 0.0
    cdef int n, kk, l
    with nogil:
        for n in range(N):
            _im2col(xv[n], cols, kd, kh, kw, stride, pad, od, oh, ow)
            # out_n (K, L) = w2 (K, CK) @ cols (CK, L), row-major
            dgemm(&tn, &tn, &L, &K, &CK, &one, &cols[0, 0], &L,
                  <double*>&w2[0, 0], &CK, &zero, &ov[n, 0, 0], &L)
            for kk in range(K):
                for l in range(L):
                    ov[n, kk, l] += bv[kk]
    return out


def conv3d_backward(x, w, gout, int stride, int pad, bint need_dx=True):
    cdef const double[:, :, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, :, :, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    g = np.ascontiguousarray(gout, dtype=np.float64)
    cdef int N = xv.shape[0], C = xv.shape[1]
    cdef int K = wv.shape[0], kd = wv.shape[2], kh = wv.shape[3], kw = wv.shape[4]
    cdef int od = g.shape[2], oh = g.shape[3], ow = g.shape[4]
    cdef int L = od * oh * ow, CK = C * kd * kh * kw
    cdef const double[:, :, ::1] gv = g.reshape(N, K, L)
    dw = np.zeros((K, C, kd, kh, kw), dtype=np.float64)
    cdef double[:, ::1] dw2 = dw.reshape(K, CK)
    cdef const double[:, ::1] w2 = np.asarray(wv).reshape(K, CK)
    cdef double[:, ::1] cols = np.empty((CK, L), dtype=np.float64)
    cdef double[:, ::1] dcols = np.empty((CK, L), dtype=np.float64)
    dx_arr = np.zeros(np.asarray(xv).shape, dtype=np.float64) if need_dx else None
    cdef double[:, :, :, :, ::1] dxv
    if need_dx:
        dxv = dx_arr
    cdef char tn = b'N', tt = b'T'
    cdef double one = 1.0, zero = 0.0
    cdef int n
    with nogil:
        for n in range(N):
            _im2col(xv[n], cols, kd, kh, kw, stride, pad, od, oh, ow)
            # dw2 (K, CK) += g_n (K, L) @ cols^T (L, CK)
            dgemm(&tt, &tn, &CK, &K, &L, &one, &cols[0, 0], &L,
                  <double*>&gv[n, 0, 0], &L, &one, &dw2[0, 0], &CK)
            if need_dx:
                # dcols (CK, L) = w2^T (CK, K) @ g_n (K, L)
                dgemm(&tn, &tt, &L, &CK, &K, &one, <double*>&gv[n, 0, 0], &L,
                      <double*>&w2[0, 0], &CK, &zero, &dcols[0, 0], &L)
                _col2im(dcols, dxv[n], kd, kh, kw, stride, pad, od, oh, ow)
    db = g.sum(axis=(0, 2, 3, 4))
    return dx_arr, dw, db


def maxpool3d_forward(x, int k, int stride):
    cdef const double[:, :, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef int N = xv.shape[0], C = xv.shape[1]
    cdef int D = xv.shape[2], H = xv.shape[3], W = xv.shape[4]
    cdef int od = (D - k) // stride + 1, oh = (H - k) // stride + 1, ow = (W - k) // stride + 1
    out = np.empty((N, C, od, oh, ow), dtype=np.float64)
    idx = np.empty((N, C, od, oh, ow), dtype=np.int64)
    cdef double[:, :, :, :, ::1] ov = out
    cdef cnp.int64_t[:, :, :, :, ::1] iv = idx
    cdef int n, c, a, b_, e, i, j, kk, z, y
    cdef double best, v
    cdef cnp.int64_t besti
    with nogil:
        for n in range(N):
            for c in range(C):
                for a in range(od):
                    for b_ in range(oh):
                        for e in range(ow):
                            z = a * stride
                            y = b_ * stride
                            best = xv[n, c, z, y, e * stride]
                            besti = (<cnp.int64_t>z * H + y) * W + e * stride
                            for i in range(k):
                                for j in range(k):
                                    for kk in range(k):
                                        v = xv[n, c, z + i, y + j, e * stride + kk]
                                        # strict: first index wins ties
                                        if v > best:
                                            best = v
                                            besti = (<cnp.int64_t>(z + i) * H + y + j) * W + e * stride + kk
                            ov[n, c, a, b_, e] = best
                            iv[n, c, a, b_, e] = besti
    return out, idx


def maxpool3d_backward(gout, argidx, in_shape):
    cdef const double[:, :, ::1] gv = np.ascontiguousarray(gout, dtype=np.float64).reshape(
        gout.shape[0], gout.shape[1], -1)
    cdef const cnp.int64_t[:, :, ::1] iv = np.ascontiguousarray(argidx, dtype=np.int64).reshape(
        argidx.shape[0], argidx.shape[1], -1)
    N, C = in_shape[0], in_shape[1]
    dx = np.zeros((N, C, in_shape[2] * in_shape[3] * in_shape[4]), dtype=np.float64)
    cdef double[:, :, ::1] dv = dx
    cdef int n, c
    cdef Py_ssize_t l, L = gv.shape[2]
    with nogil:
        for n in range(gv.shape[0]):
            for c in range(gv.shape[1]):
                for l in range(L):
                    dv[n, c, iv[n, c, l]] += gv[n, c, l]
    return dx.reshape(in_shape)


def pointwise_linear(x, w, b=None):
    """Row-independent ``x @ w + b``.

    Each output row is accumulated as ``b + x[r,0]*w[0] + x[r,1]*w[1] + ...``
    in that order, so a row's result never depends on its position.
    """
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t R = xv.shape[0], F = xv.shape[1], O = wv.shape[1]
    out = np.empty((R, O), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef const double[::1] bv
    cdef bint has_b = b is not None
    if has_b:
        bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t r, f, o
    cdef double xf
    with nogil:
        for r in range(R):
            for o in range(O):
                ov[r, o] = bv[o] if has_b else 0.0
            for f in range(F):
                xf = xv[r, f]
                for o in range(O):
                    ov[r, o] = ov[r, o] + xf * wv[f, o]
    return out
