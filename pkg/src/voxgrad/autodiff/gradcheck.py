"""Central finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from voxgrad.autodiff.tensor import Tape, Tensor, backward


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    analytic: np.ndarray
    numeric: np.ndarray
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_rel_error < self.tol


def numeric_gradient(f: Callable[[Tensor], Tensor], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """``(f(x + h e_i) - f(x - h e_i)) / 2h`` for every component i."""
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = np.empty(flat.size)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(Tensor(x)).item()
        flat[i] = orig - h
        fm = f(Tensor(x)).item()
        flat[i] = orig
        out[i] = (fp - fm) / (2.0 * h)
    return out.reshape(x.shape)


def grad_check(f: Callable[[Tensor], Tensor], x, h: float = 1e-5, tol: float = 1e-4,
               rel_floor: float = 0.0) -> GradCheckResult:
    """Compare the taped gradient of scalar ``f`` at ``x`` with finite differences.

    The error per component is ``|a - n| / max(|a| + |n|, floor)``; the result
    carries the maximum over components. ``floor`` is ``1e-12`` plus
    ``rel_floor`` times the largest gradient magnitude, so components far
    below the difference quotient's round-off level can be judged against
    the gradient's scale instead of against themselves.
    """
    x = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    leaf = Tensor(x, requires_grad=True)
    with Tape() as tape:
        y = f(leaf)
    if y.size != 1:
        raise ValueError(f"grad_check needs a scalar function, got output shape {y.shape}")
    analytic = backward(tape, y)[leaf]
    numeric = numeric_gradient(f, x, h)
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0))
    floor = 1e-12 + rel_floor * scale
    err = np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return GradCheckResult(float(err.max(initial=0.0)), analytic, numeric, tol)
