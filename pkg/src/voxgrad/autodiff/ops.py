"""Differentiable operations.

Each op computes its forward value eagerly and, when a tape is active and
some input is tracked, records a closure that maps the output gradient to
input gradients. Shapes follow the channels-first convention
``(N, C, D, H, W)`` for voxel tensors.
"""

from __future__ import annotations

import numpy as np

from voxgrad import kernels
from voxgrad.autodiff.tensor import ReluMode, Tensor, active_tape, record


def _t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _require_shape(name: str, x: Tensor, ndim: int) -> None:
    if x.ndim != ndim:
        raise ValueError(f"{name}: expected a {ndim}-d tensor, got shape {x.shape}")


# ---------------------------------------------------------------- elementwise


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of two same-shape tensors (no broadcasting)."""
    a, b = _t(a), _t(b)
    if a.shape != b.shape:
        raise ValueError(f"add: shape mismatch {a.shape} vs {b.shape}")
    out = Tensor.wrap(a.data + b.data)
    return record(out, (a, b), lambda g, _m: (g, g), "add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _t(a), _t(b)
    if a.shape != b.shape:
        raise ValueError(f"mul: shape mismatch {a.shape} vs {b.shape}")
    out = Tensor.wrap(a.data * b.data)
    return record(out, (a, b), lambda g, _m: (g * b.data, g * a.data), "mul")


def scale(x: Tensor, c: float) -> Tensor:
    x = _t(x)
    out = Tensor.wrap(x.data * c)
    return record(out, (x,), lambda g, _m: (g * c,), "scale")


def square(x: Tensor) -> Tensor:
    x = _t(x)
    out = Tensor.wrap(x.data * x.data)
    return record(out, (x,), lambda g, _m: (2.0 * x.data * g,), "square")


def sum_all(x: Tensor) -> Tensor:
    x = _t(x)
    out = Tensor.wrap(np.array(x.data.sum()))
    return record(out, (x,), lambda g, _m: (np.full(x.shape, float(np.reshape(g, -1)[0])),), "sum")


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    x = _t(x)
    out = Tensor.wrap(x.data.reshape(shape))
    return record(out, (x,), lambda g, _m: (g.reshape(x.shape),), "reshape")


def flatten(x: Tensor) -> Tensor:
    """Collapse all but the leading (batch) axis."""
    return reshape(x, (x.shape[0], -1))


def relu(x: Tensor) -> Tensor:
    """Elementwise ``max(x, 0)``; backward honours the pass's :class:`ReluMode`."""
    x = _t(x)
    out = Tensor.wrap(np.maximum(x.data, 0.0))
    saved = x.data
    return record(out, (x,), lambda g, mode: (relu_backward(g, saved, mode),), "relu")


def relu_backward(g_out: np.ndarray, x_saved: np.ndarray, mode: ReluMode) -> np.ndarray:
    """Gate ``g_out`` through a ReLU whose forward input was ``x_saved``.

    STANDARD: ``g * [x > 0]``; DECONV: ``g * [g > 0]``; GUIDED: both gates.
    """
    g_out = np.asarray(g_out, dtype=np.float64)
    x_saved = np.asarray(x_saved, dtype=np.float64)
    if g_out.shape != x_saved.shape:
        raise ValueError(f"relu_backward: shape mismatch {g_out.shape} vs {x_saved.shape}")
    if mode is ReluMode.STANDARD:
        gate = x_saved > 0
    elif mode is ReluMode.DECONV:
        gate = g_out > 0
    elif mode is ReluMode.GUIDED:
        gate = (x_saved > 0) & (g_out > 0)
    else:
        raise ValueError(f"unknown relu mode {mode!r}")
    return np.where(gate, g_out, 0.0)


# ---------------------------------------------------------------- layers


def conv3d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """3D cross-correlation plus bias.

    x: (N, C, D, H, W), w: (K, C, kd, kh, kw), b: (K,).
    """
    x, w, b = _t(x), _t(w), _t(b)
    _require_shape("conv3d input", x, 5)
    _require_shape("conv3d weight", w, 5)
    if w.shape[1] != x.shape[1]:
        raise ValueError(
            f"conv3d: weight expects {w.shape[1]} input channels, input has {x.shape[1]}")
    if b.shape != (w.shape[0],):
        raise ValueError(f"conv3d: bias shape {b.shape} != ({w.shape[0]},)")
    if stride < 1 or pad < 0:
        raise ValueError(f"conv3d: need stride >= 1 and pad >= 0, got {stride}, {pad}")
    for ext, k in zip(x.shape[2:], w.shape[2:]):
        if k > ext + 2 * pad:
            raise ValueError(f"conv3d: kernel {w.shape[2:]} larger than padded input {x.shape[2:]}")
    out = Tensor.wrap(kernels.conv3d_forward(x.data, w.data, b.data, stride, pad))
    tape = active_tape()
    # skip the input gradient when nothing upstream wants it (first layer in training)
    need_dx = tape is not None and tape.tracks(x)

    def back(g, _mode):
        return kernels.conv3d_backward(x.data, w.data, g, stride, pad, need_dx)

    return record(out, (x, w, b), back, "conv3d")


def maxpool3d(x: Tensor, k: int, stride: int | None = None) -> Tensor:
    """Windowed maximum over the three spatial axes.

    The gradient goes to each window's argmax; ties resolve to the first
    element in (d, h, w) scan order.
    """
    x = _t(x)
    stride = k if stride is None else stride
    if k < 1 or stride < 1:
        raise ValueError(f"maxpool3d: kernel and stride must be positive, got {k}, {stride}")
    _require_shape("maxpool3d input", x, 5)
    if any(k > e for e in x.shape[2:]):
        raise ValueError(f"maxpool3d: kernel {k} exceeds spatial extent {x.shape[2:]}")
    val, idx = kernels.maxpool3d_forward(x.data, k, stride)
    out = Tensor.wrap(val)
    return record(out, (x,),
                  lambda g, _m: (kernels.maxpool3d_backward(g, idx, x.shape),), "maxpool3d")


def dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """``x @ w + b`` for x: (N, F), w: (F, O), b: (O,)."""
    x, w, b = _t(x), _t(w), _t(b)
    _require_shape("dense input", x, 2)
    _require_shape("dense weight", w, 2)
    if x.shape[1] != w.shape[0]:
        raise ValueError(f"dense: input features {x.shape[1]} != weight rows {w.shape[0]}")
    if b.shape != (w.shape[1],):
        raise ValueError(f"dense: bias shape {b.shape} != ({w.shape[1]},)")
    out = Tensor.wrap(x.data @ w.data + b.data)

    def back(g, _mode):
        return g @ w.data.T, x.data.T @ g, g.sum(axis=0)

    return record(out, (x, w, b), back, "dense")


def shared_dense(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Apply one dense layer to every point: x (N, P, F) -> (N, P, O).

    Rows are computed independently of each other (no blocked matmul), so
    permuting the points permutes the output bit for bit.
    """
    x, w, b = _t(x), _t(w), _t(b)
    _require_shape("shared_dense input", x, 3)
    _require_shape("shared_dense weight", w, 2)
    if x.shape[2] != w.shape[0]:
        raise ValueError(f"shared_dense: input features {x.shape[2]} != weight rows {w.shape[0]}")
    if b.shape != (w.shape[1],):
        raise ValueError(f"shared_dense: bias shape {b.shape} != ({w.shape[1]},)")
    N, P, F = x.shape
    flat = x.data.reshape(N * P, F)
    out = Tensor.wrap(kernels.pointwise_linear(flat, w.data, b.data).reshape(N, P, -1))

    def back(g, _mode):
        g2 = g.reshape(N * P, -1)
        dx = kernels.pointwise_linear(g2, np.ascontiguousarray(w.data.T)).reshape(x.shape)
        return dx, flat.T @ g2, g2.sum(axis=0)

    return record(out, (x, w, b), back, "shared_dense")


def reduce_max(x: Tensor, axis: int = 1) -> Tensor:
    """Maximum over ``axis`` (the point axis of an (N, P, F) tensor).

    Gradient is shared equally among all entries attaining the maximum, so
    reordering the reduced axis permutes the gradient and changes nothing
    else. With a first-wins rule, gates that pass gradient into inactive
    units (deconvolution mode) would depend on point order.
    """
    x = _t(x)
    if x.shape[axis] < 1:
        raise ValueError("reduce_max: cannot reduce over an empty axis")
    val = np.max(x.data, axis=axis, keepdims=True)
    out = Tensor.wrap(np.squeeze(val, axis=axis))

    def back(g, _mode):
        hit = x.data == val
        share = np.expand_dims(g, axis) / np.maximum(hit.sum(axis=axis, keepdims=True), 1)
        return (np.where(hit, share, 0.0),)

    return record(out, (x,), back, "reduce_max")


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean over the batch of ``-log softmax(logits)[label]``."""
    logits = _t(logits)
    _require_shape("softmax_cross_entropy logits", logits, 2)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    N, C = logits.shape
    if labels.shape[0] != N:
        raise ValueError(f"softmax_cross_entropy: {labels.shape[0]} labels for batch of {N}")
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise ValueError(f"softmax_cross_entropy: labels must lie in [0, {C})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    logp = z - lse[:, None]
    rows = np.arange(N)
    out = Tensor.wrap(np.array(-logp[rows, labels].mean()))

    def back(g, _mode):
        p = np.exp(logp)
        p[rows, labels] -= 1.0
        return (p * (float(np.reshape(g, -1)[0]) / N),)

    return record(out, (logits,), back, "softmax_cross_entropy")
