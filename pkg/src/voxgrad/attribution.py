"""Gradient attribution for voxel and point inputs.

All methods explain the pre-softmax logit of one target class. Voxel maps
hold one score per voxel. Point maps keep the per-coordinate values in
``raw`` and reduce them to one score per point in ``scores``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from voxgrad.autodiff import ReluMode, Tape, Tensor, backward
from voxgrad.models import Model

METHODS = ("vanilla", "masked", "guided", "deconv", "intgrad")


@dataclass
class AttributionMap:
    domain: str  # "voxel" or "point"
    method: str
    target_class: int
    raw: np.ndarray  # same shape as the single input (R,R,R) or (P,3)
    scores: np.ndarray  # (R,R,R) for voxels, (P,) for points
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.raw).all():
            raise FloatingPointError(f"{self.method}: non-finite attribution values")


@dataclass(frozen=True)
class IGConfig:
    """Integrated-gradients settings. ``baseline=None`` means the domain default."""

    steps: int = 50
    baseline: np.ndarray | None = None
    quadrature: str = "midpoint"

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"IG steps must be >= 1, got {self.steps}")
        if self.quadrature not in ("midpoint", "trapezoid"):
            raise ValueError(f"unknown quadrature {self.quadrature!r}")


def _single(model: Model, x) -> np.ndarray:
    """Input as a batch of one, model-ready."""
    arr = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    batch = model.prepare(arr)
    if batch.shape[0] != 1:
        raise ValueError(f"attribution explains one input at a time, got batch of {batch.shape[0]}")
    return batch


def _check_class(model: Model, target) -> int:
    target = int(target)
    if not 0 <= target < model.num_classes:
        raise ValueError(f"target class {target} outside [0, {model.num_classes})")
    return target


def predicted_class(model: Model, x) -> int:
    return int(np.argmax(model.forward(Tensor.wrap(_single(model, x))).data[0]))


def input_gradients(model: Model, batch: np.ndarray, target: int,
                    mode: ReluMode = ReluMode.STANDARD) -> tuple[np.ndarray, np.ndarray]:
    """d logit[target] / d input for every row of ``batch``; returns ``(grads, logits)``.

    Rows are independent, so one reverse pass with a one-hot seed per row
    yields every row's gradient.
    """
    x = Tensor(batch, requires_grad=True)
    with Tape() as tape:
        logits = model.forward(x)
    seed = np.zeros(logits.shape)
    seed[:, target] = 1.0
    grads = backward(tape, logits, relu_mode=mode, seed=seed)[x]
    return grads, logits.data


def point_attribution_reduce(coord_scores, how: str = "norm") -> np.ndarray:
    """Collapse (P, 3) per-coordinate values to (P,): L2 norm or signed sum."""
    g = np.asarray(coord_scores, dtype=np.float64)
    if g.ndim != 2 or g.shape[1] != 3:
        raise ValueError(f"expected (P, 3) per-coordinate values, got {g.shape}")
    if how == "norm":
        return np.sqrt((g * g).sum(axis=1))
    if how == "sum":
        return g.sum(axis=1)
    raise ValueError(f"unknown reduction {how!r}")


def _make_map(model, method, target, raw, reduce, info) -> AttributionMap:
    if model.input_kind == "voxel":
        raw = raw.reshape(raw.shape[-3:])
        return AttributionMap("voxel", method, target, raw, raw, info)
    raw = raw.reshape(-1, 3)
    return AttributionMap("point", method, target, raw, point_attribution_reduce(raw, reduce), info)


def _gradient_map(model, x, target, mode, method, reduce, times_input=False) -> AttributionMap:
    batch = _single(model, x)
    target = predicted_class(model, batch) if target is None else _check_class(model, target)
    grads, logits = input_gradients(model, batch, target, mode)
    raw = grads[0] * batch[0] if times_input else grads[0]
    info = {"relu_mode": mode.value, "f_x": float(logits[0, target])}
    return _make_map(model, method, target, raw, reduce, info)


def vanilla_gradient(model: Model, x, target_class: int | None = None,
                     reduce: str = "norm") -> AttributionMap:
    """Plain input gradient of the target logit."""
    return _gradient_map(model, x, target_class, ReluMode.STANDARD, "vanilla", reduce)


def masked_gradient(model: Model, x, target_class: int | None = None,
                    reduce: str = "norm") -> AttributionMap:
    """Gradient times input; exactly zero wherever the input is zero."""
    return _gradient_map(model, x, target_class, ReluMode.STANDARD, "masked", reduce, True)


def guided_backprop(model: Model, x, target_class: int | None = None,
                    reduce: str = "norm") -> AttributionMap:
    return _gradient_map(model, x, target_class, ReluMode.GUIDED, "guided", reduce)


def deconv_attribution(model: Model, x, target_class: int | None = None,
                       reduce: str = "norm") -> AttributionMap:
    return _gradient_map(model, x, target_class, ReluMode.DECONV, "deconv", reduce)


def default_baseline(model: Model, batch: np.ndarray) -> tuple[np.ndarray, str]:
    """Empty grid for voxels; every point moved to the cloud centroid for points."""
    if model.input_kind == "voxel":
        return np.zeros_like(batch), "empty"
    # sort each coordinate first so the sum, and hence the baseline, ignores point order
    centroid = np.sort(batch[0], axis=0).mean(axis=0)
    return np.broadcast_to(centroid, batch.shape).copy(), "centroid"


def _ig_nodes(steps: int, quadrature: str) -> tuple[np.ndarray, np.ndarray]:
    if quadrature == "midpoint":
        return (np.arange(1, steps + 1) - 0.5) / steps, np.full(steps, 1.0 / steps)
    alphas = np.arange(steps + 1) / steps
    weights = np.full(steps + 1, 1.0 / steps)
    weights[[0, -1]] *= 0.5
    return alphas, weights


def integrated_gradients(model: Model, x, target_class: int | None = None,
                         cfg: IGConfig = IGConfig(), reduce: str = "norm",
                         chunk: int = 25) -> AttributionMap:
    """``(x - x') * sum_k w_k dF(x' + a_k (x - x'))/dx`` along the straight path.

    Midpoint nodes ``a_k = (k - 1/2)/m`` by default; trapezoid uses ``k/m``.
    """
    batch = _single(model, x)
    target = predicted_class(model, batch) if target_class is None else _check_class(model, target_class)
    if cfg.baseline is None:
        base, descriptor = default_baseline(model, batch)
    else:
        base = np.asarray(cfg.baseline, dtype=np.float64).reshape(-1)
        if base.size != batch.size:
            raise ValueError(f"baseline has {base.size} elements, input has {batch.size}")
        base, descriptor = base.reshape(batch.shape), "custom"
    diff = batch - base
    alphas, weights = _ig_nodes(cfg.steps, cfg.quadrature)
    total = np.zeros(batch.shape[1:])
    for s in range(0, len(alphas), chunk):
        a = alphas[s:s + chunk]
        path = base + a.reshape((-1,) + (1,) * (batch.ndim - 1)) * diff
        grads, _ = input_gradients(model, path, target)
        # fixed-order accumulation keeps results independent of chunking artefacts
        for g, w in zip(grads, weights[s:s + chunk]):
            total += w * g
    raw = diff[0] * total
    ends = model.forward(Tensor.wrap(np.concatenate([batch, base]))).data[:, target]
    f_x, f_base = float(ends[0]), float(ends[1])
    info = {"steps": cfg.steps, "quadrature": cfg.quadrature, "baseline": descriptor,
            "f_x": f_x, "f_baseline": f_base}
    amap = _make_map(model, "intgrad", target, raw, reduce, info)
    amap.info["completeness_gap"] = completeness_gap(amap, f_x, f_base)
    return amap


def completeness_gap(amap: AttributionMap, f_x: float, f_baseline: float) -> float:
    """``|sum of attributions - (F(x) - F(x'))|`` over the per-coordinate values."""
    return float(abs(amap.raw.sum() - (f_x - f_baseline)))


def attribute(model: Model, x, method: str, target_class: int | None = None,
              ig: IGConfig = IGConfig(), reduce: str = "norm") -> AttributionMap:
    if method == "vanilla":
        return vanilla_gradient(model, x, target_class, reduce)
    if method == "masked":
        return masked_gradient(model, x, target_class, reduce)
    if method == "guided":
        return guided_backprop(model, x, target_class, reduce)
    if method == "deconv":
        return deconv_attribution(model, x, target_class, reduce)
    if method == "intgrad":
        return integrated_gradients(model, x, target_class, ig, reduce)
    raise ValueError(f"unknown attribution method {method!r}; choose from {METHODS}")
