"""Fine-grained magnitude pruning with splicing (Dynamic Network Surgery style).

The model keeps full weights ``W``; a binary mask ``T`` per prunable layer
decides which entries take part in the forward pass (``W * T``). SGD
steps use the gradient with respect to the masked weight ``W * T`` and
apply it to every entry of ``W``, masked or not, so a pruned weight can
grow back past the upper threshold and be spliced in again.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from voxgrad.autodiff import SGD, OptimConfig, Tensor
from voxgrad.models import (
    Model,
    count_parameters,
    evaluate,
    loss_and_grads,
    model_inputs,
    read_container,
    write_container,
)

MASK_MAGIC = b"VGM1"
DISABLED = -math.inf


@dataclass(frozen=True)
class PruneConfig:
    """Thresholds are ``mean(|W|) + c * std(|W|)`` per layer for ``c`` in (c_lo, c_hi).

    ``c_lo = c_hi = -inf`` disables pruning. Biases are never pruned; layers
    listed in ``exclude`` (the classifier by default) keep all weights.
    """

    c_lo: float = 0.25
    c_hi: float = 0.75
    interval: int = 1
    exclude: tuple[str, ...] = ("fc2",)

    def __post_init__(self):
        if self.c_lo > self.c_hi:
            raise ValueError(f"c_lo ({self.c_lo}) must not exceed c_hi ({self.c_hi})")
        if self.interval < 1:
            raise ValueError(f"mask update interval must be >= 1, got {self.interval}")


def prunable_names(model: Model, cfg: PruneConfig) -> list[str]:
    return [n for n in model.weight_names() if n.rsplit(".", 1)[0] not in cfg.exclude]


def compute_thresholds(w, cfg: PruneConfig) -> tuple[float, float]:
    a = np.abs(np.asarray(w.data if isinstance(w, Tensor) else w, dtype=np.float64)).reshape(-1)
    if a.size == 0:
        raise ValueError("compute_thresholds: empty weight tensor")
    mean, std = a.mean(), a.std()

    def t(c):
        return DISABLED if c == DISABLED else float(mean + c * std)

    return t(cfg.c_lo), t(cfg.c_hi)


def update_mask(w, prev: np.ndarray, t_lo: float, t_hi: float) -> np.ndarray:
    """``|w| < t_lo`` -> 0, ``|w| > t_hi`` -> 1, otherwise keep the previous mask value."""
    a = np.abs(np.asarray(w.data if isinstance(w, Tensor) else w, dtype=np.float64))
    prev = np.asarray(prev, dtype=np.float64)
    if a.shape != prev.shape:
        raise ValueError(f"update_mask: weight shape {a.shape} != mask shape {prev.shape}")
    return np.where(a < t_lo, 0.0, np.where(a > t_hi, 1.0, prev))


@dataclass
class PruneMask:
    masks: dict[str, np.ndarray]
    thresholds: dict[str, tuple[float, float]] = field(default_factory=dict)
    updates: int = 0

    @classmethod
    def ones(cls, model: Model, cfg: PruneConfig = PruneConfig()) -> "PruneMask":
        return cls({n: np.ones(model.params[n].shape) for n in prunable_names(model, cfg)})

    def update(self, model: Model, cfg: PruneConfig) -> None:
        for name, prev in self.masks.items():
            w = model.params[name].data
            t_lo, t_hi = compute_thresholds(w, cfg)
            self.masks[name] = update_mask(w, prev, t_lo, t_hi)
            self.thresholds[name] = (t_lo, t_hi)
        self.updates += 1

    def nonzero(self) -> int:
        return int(sum(np.count_nonzero(m) for m in self.masks.values()))

    def save(self, path) -> None:
        header = {"thresholds": {k: list(v) for k, v in self.thresholds.items()},
                  "updates": self.updates}
        write_container(path, MASK_MAGIC, header, self.masks)

    @classmethod
    def load(cls, path) -> "PruneMask":
        header, tensors = read_container(path, MASK_MAGIC)
        thr = {k: tuple(v) for k, v in header.get("thresholds", {}).items()}
        return cls(tensors, thr, int(header.get("updates", 0)))


def effective_params(model: Model, mask: PruneMask, cfg: PruneConfig | None = None) -> dict[str, Tensor]:
    """Fresh leaf tensors holding ``W * T`` for every masked layer (stored W untouched)."""
    if cfg is not None:
        missing = [n for n in prunable_names(model, cfg) if n not in mask.masks]
        if missing:
            raise ValueError(f"no mask for prunable layer(s) {missing}")
    out = {}
    for name, t in mask.masks.items():
        w = model.params[name]
        if t.shape != w.shape:
            raise ValueError(f"mask for {name} has shape {t.shape}, weight has {w.shape}")
        # where() rather than w*t: a pruned entry is +0.0 exactly, as in a zeroed copy
        eff = Tensor.wrap(np.where(t != 0, w.data, 0.0))
        eff.requires_grad = True
        eff.name = name
        out[name] = eff
    return out


def masked_forward(model: Model, mask: PruneMask, x, cfg: PruneConfig | None = None) -> Tensor:
    """Logits computed with ``W * T`` in every masked layer."""
    return model.forward(x, effective_params(model, mask, cfg))


def masked_loss_and_grads(model: Model, mask: PruneMask, inputs, labels):
    """Loss of ``L(W * T)`` and its gradient with respect to each ``W * T`` (and unmasked params)."""
    return loss_and_grads(model, inputs, labels, effective_params(model, mask))


def masked_sgd_step(model: Model, grads: dict[str, np.ndarray], optim: OptimConfig | SGD) -> None:
    """Apply gradients taken at ``W * T`` to all stored weights, pruned ones included."""
    sgd = optim if isinstance(optim, SGD) else SGD(optim)
    names = list(model.params)
    missing = [n for n in names if n not in grads]
    if missing:
        raise ValueError(f"masked_sgd_step: missing gradients for {missing}")
    sgd.step([model.params[n] for n in names], [grads[n] for n in names])


def apply_mask(model: Model, mask: PruneMask) -> Model:
    """Copy of ``model`` with pruned weights physically set to zero."""
    out = model.copy()
    for name, t in mask.masks.items():
        out.params[name].data = np.where(t != 0, out.params[name].data, 0.0)
    out.metadata = dict(model.metadata)
    return out


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    while True:
        order = rng.permutation(n)
        for s in range(0, n, batch_size):
            yield order[s:s + batch_size]


def prune_train_loop(model: Model, dataset, prune_cfg: PruneConfig, optim: OptimConfig,
                     iterations: int, seed: int = 0, batch_size: int = 16,
                     mask: PruneMask | None = None, update_masks: bool = True):
    """Alternate masked SGD steps with mask updates every ``prune_cfg.interval`` iterations.

    The mask is always refreshed before the first iteration (so 0 iterations
    is one-shot pruning of the current weights). Returns
    ``(model, mask, trajectory)`` where the trajectory lists
    ``(iteration, nonzero_prunable_weights)`` after each mask update.
    """
    mask = PruneMask.ones(model, prune_cfg) if mask is None else mask
    trajectory = []
    if update_masks:
        mask.update(model, prune_cfg)
        trajectory.append((0, mask.nonzero()))
    if iterations <= 0:
        return model, mask, trajectory
    inputs, labels = model_inputs(model, dataset), dataset.labels()
    rng = np.random.default_rng(seed)
    sgd = SGD(optim)
    batches = _batches(len(dataset), batch_size, rng)
    for it in range(iterations):
        if update_masks and it > 0 and it % prune_cfg.interval == 0:
            mask.update(model, prune_cfg)
            trajectory.append((it, mask.nonzero()))
        idx = next(batches)
        _, grads = masked_loss_and_grads(model, mask, inputs[idx], labels[idx])
        masked_sgd_step(model, grads, sgd)
    return model, mask, trajectory


def finetune(model: Model, mask: PruneMask, dataset, epochs: int, optim: OptimConfig,
             seed: int = 0, batch_size: int = 16) -> Model:
    """Masked training with the mask frozen, ``epochs`` passes over ``dataset``."""
    steps = epochs * -(-len(dataset) // batch_size)
    prune_train_loop(model, dataset, PruneConfig(), optim, steps, seed, batch_size, mask,
                     update_masks=False)
    return model


def evaluate_masked(model: Model, mask: PruneMask, dataset):
    return evaluate(model, dataset, params=effective_params(model, mask))


# ---------------------------------------------------------------- reporting


def format_percent(nonzero: int, total: int) -> str:
    """Remaining-parameter share as printed in reports, e.g. ``'5.26%'``."""
    return f"{100.0 * nonzero / total:.2f}%"


@dataclass
class PruneReport:
    total_params: int
    nonzero_params: int
    per_layer: list[dict]
    accuracy: dict[str, float | None]
    thresholds: dict[str, list[float]]
    seed: int | None = None
    trajectory: list = field(default_factory=list)

    @property
    def percent_remaining(self) -> float:
        return round(100.0 * self.nonzero_params / self.total_params, 2)

    def percent_string(self) -> str:
        return format_percent(self.nonzero_params, self.total_params)

    def to_json(self) -> dict:
        d = asdict(self)
        d["percent_remaining"] = self.percent_remaining
        d["percent_remaining_str"] = self.percent_string()
        d["thresholds"] = {k: [_num(x) for x in v] for k, v in self.thresholds.items()}
        return d

    def table(self) -> str:
        rows = [("Original model", self.total_params, "100.00%", self.accuracy.get("before")),
                ("Prune, no finetune", self.nonzero_params, self.percent_string(),
                 self.accuracy.get("after_prune")),
                ("Prune + finetune", self.nonzero_params, self.percent_string(),
                 self.accuracy.get("after_finetune"))]
        lines = [f"{'':<20} {'# Parameters':>14} {'Params Left':>12} {'Accuracy':>9}"]
        for name, n, pct, acc in rows:
            acc_s = "-" if acc is None else f"{100.0 * acc:.2f}"
            lines.append(f"{name:<20} {n:>14,} {pct:>12} {acc_s:>9}")
        return "\n".join(lines)


def _num(x: float):
    # JSON has no infinities; the disabled sentinel is written as a string
    return x if math.isfinite(x) else ("-inf" if x < 0 else "inf")


def prune_report(model: Model, mask: PruneMask, evals: dict | None = None,
                 seed: int | None = None, trajectory=None) -> PruneReport:
    """Parameter accounting: masked weights count as removed, everything else remains."""
    per_layer = []
    counts = count_parameters(model)["per_layer"]
    for layer, total in counts.items():
        nz = 0
        for name, p in model.params.items():
            if name.rsplit(".", 1)[0] != layer:
                continue
            nz += int(np.count_nonzero(mask.masks[name])) if name in mask.masks else p.size
        per_layer.append({"layer": layer, "total": total, "nonzero": nz,
                          "percent_remaining": round(100.0 * nz / total, 2)})
    total = sum(r["total"] for r in per_layer)
    nonzero = sum(r["nonzero"] for r in per_layer)
    evals = dict(evals or {})
    acc = {k: evals.get(k) for k in ("before", "after_prune", "after_finetune")}
    thr = {k: list(v) for k, v in mask.thresholds.items()}
    return PruneReport(total, nonzero, per_layer, acc, thr, seed, list(trajectory or []))


def export_filter_visualization(layer: str, original, pruned, finetuned, mask, path=None,
                                diff_scale: float = 5.0) -> dict:
    """Per-filter magnitude volumes: original, pruned, finetuned, scaled |finetuned - pruned|.

    All inputs are (K, C, kd, kh, kw) conv weights; ``pruned`` and
    ``finetuned`` are multiplied by ``mask`` before export.
    """
    arrs = [np.asarray(a, dtype=np.float64) for a in (original, pruned, finetuned, mask)]
    if any(a.ndim != 5 for a in arrs):
        raise ValueError(f"{layer}: filter export needs 5-d conv weights")
    if len({a.shape for a in arrs}) != 1:
        raise ValueError(f"{layer}: weight and mask shapes differ")
    orig, pr, ft, t = arrs
    pr = np.where(t != 0, pr, 0.0)
    ft = np.where(t != 0, ft, 0.0)
    diff = diff_scale * np.abs(ft - pr)
    filters = []
    for k in range(orig.shape[0]):
        for c in range(orig.shape[1]):
            filters.append({
                "filter": k, "in_channel": c,
                "original": np.abs(orig[k, c]).tolist(),
                "pruned": np.abs(pr[k, c]).tolist(),
                "finetuned": np.abs(ft[k, c]).tolist(),
                "scaled_difference": diff[k, c].tolist(),
                "mask": t[k, c].astype(int).tolist(),
            })
    doc = {"layer": layer, "diff_scale": diff_scale, "shape": list(orig.shape), "filters": filters}
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True)
    return doc
