"""Pure numpy versions of the compiled kernels in ``_ckernels.pyx``.

Convolution here loops over kernel offsets and contracts each shifted view
with one ``(K, C)`` weight slice, which is a different lowering from the
compiled column-matrix path. The two are cross-checked in the tests.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _out_extent(n: int, k: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - k) // stride + 1


def _shifted(xp, i, j, k, od, oh, ow, stride):
    return xp[:, :,
              i:i + (od - 1) * stride + 1:stride,
              j:j + (oh - 1) * stride + 1:stride,
              k:k + (ow - 1) * stride + 1:stride]


def conv3d_forward(x, w, b, stride, pad):
    N, C, D, H, W = x.shape
    K, _, kd, kh, kw = w.shape
    od, oh, ow = (_out_extent(D, kd, stride, pad), _out_extent(H, kh, stride, pad),
                  _out_extent(W, kw, stride, pad))
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad), (pad, pad))) if pad else x
    out = np.zeros((N, K, od, oh, ow))
    for i in range(kd):
        for j in range(kh):
            for k in range(kw):
                patch = _shifted(xp, i, j, k, od, oh, ow, stride)
                out += np.einsum("ncdhw,kc->nkdhw", patch, w[:, :, i, j, k], optimize=True)
    out += b[None, :, None, None, None]
    return out


def conv3d_backward(x, w, gout, stride, pad, need_dx=True):
    N, C, D, H, W = x.shape
    K, _, kd, kh, kw = w.shape
    od, oh, ow = gout.shape[2:]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad), (pad, pad))) if pad else x
    dw = np.zeros_like(w, dtype=np.float64)
    dxp = np.zeros(xp.shape) if need_dx else None
    for i in range(kd):
        for j in range(kh):
            for k in range(kw):
                patch = _shifted(xp, i, j, k, od, oh, ow, stride)
                dw[:, :, i, j, k] = np.einsum("nkdhw,ncdhw->kc", gout, patch, optimize=True)
                if need_dx:
                    view = _shifted(dxp, i, j, k, od, oh, ow, stride)
                    view += np.einsum("nkdhw,kc->ncdhw", gout, w[:, :, i, j, k], optimize=True)
    db = gout.sum(axis=(0, 2, 3, 4))
    dx = None
    if need_dx:
        dx = dxp[:, :, pad:pad + D, pad:pad + H, pad:pad + W] if pad else dxp
        dx = np.ascontiguousarray(dx)
    return dx, dw, db


def maxpool3d_forward(x, k, stride):
    N, C, D, H, W = x.shape
    win = sliding_window_view(x, (k, k, k), axis=(2, 3, 4))[:, :, ::stride, ::stride, ::stride]
    od, oh, ow = win.shape[2:5]
    flat = win.reshape(N, C, od, oh, ow, k * k * k)
    # argmax returns the first occurrence, which is the tie rule we want
    local = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, local[..., None], axis=-1)[..., 0]
    li, lj, lk = np.unravel_index(local, (k, k, k))
    z = np.arange(od)[:, None, None] * stride + li
    y = np.arange(oh)[None, :, None] * stride + lj
    xx = np.arange(ow)[None, None, :] * stride + lk
    idx = (z * H + y) * W + xx
    return np.ascontiguousarray(out), idx.astype(np.int64)


def maxpool3d_backward(gout, argidx, in_shape):
    N, C = in_shape[:2]
    vol = in_shape[2] * in_shape[3] * in_shape[4]
    base = (np.arange(N * C, dtype=np.int64) * vol).reshape(N, C, 1, 1, 1)
    dx = np.bincount((argidx + base).ravel(), weights=gout.ravel(), minlength=N * C * vol)
    return dx.reshape(in_shape)


def pointwise_linear(x, w, b=None):
    """Row-independent ``x @ w + b`` (same accumulation order as the compiled kernel)."""
    R, F = x.shape
    out = np.zeros((R, w.shape[1])) if b is None else np.repeat(b[None, :], R, axis=0)
    for f in range(F):
        out += x[:, f:f + 1] * w[f]
    return out
