"""Tensor, tape recording and the reverse pass."""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class ReluMode(enum.Enum):
    """How ReLU nodes gate the gradient on the way back.

    STANDARD is the true derivative (gate on the forward input), DECONV gates
    on the sign of the incoming gradient, GUIDED applies both gates.
    """

    STANDARD = "standard"
    DECONV = "deconv"
    GUIDED = "guided"


class Tensor:
    """A float64 array with an optional gradient slot.

    Tensors created with ``requires_grad=True`` are leaves: after
    :func:`backward` their ``grad`` holds d(output)/d(leaf).
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64, copy=True, order="C")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    @classmethod
    def wrap(cls, arr: np.ndarray) -> "Tensor":
        """Adopt an already float64, C-contiguous array without copying."""
        t = cls.__new__(cls)
        t.data = np.asarray(arr, dtype=np.float64, order="C")
        t.grad = None
        t.requires_grad = False
        t.name = None
        return t


BackwardFn = Callable[[np.ndarray, ReluMode], Sequence[np.ndarray | None]]


@dataclass
class _Node:
    out: Tensor
    inputs: tuple[Tensor, ...]
    backward: BackwardFn
    op: str


@dataclass
class Tape:
    """Ordered record of the operations executed while the tape is active.

    Use as a context manager; ops executed inside the block whose inputs
    are leaves (or depend on leaves) are recorded. A tape supports exactly
    one :func:`backward` call.
    """

    nodes: list[_Node] = field(default_factory=list)
    leaves: dict[int, Tensor] = field(default_factory=dict)
    consumed: bool = False
    _tracked: set[int] = field(default_factory=set, repr=False)

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _stack().pop()

    def watch(self, t: Tensor) -> None:
        """Register ``t`` as a leaf even if ``requires_grad`` is unset."""
        self.leaves[id(t)] = t
        self._tracked.add(id(t))

    def tracks(self, t: Tensor) -> bool:
        if id(t) in self._tracked:
            return True
        if t.requires_grad:
            self.watch(t)
            return True
        return False

    def record(self, out: Tensor, inputs: Sequence[Tensor], backward: BackwardFn, op: str) -> None:
        self.nodes.append(_Node(out, tuple(inputs), backward, op))
        self._tracked.add(id(out))


_local = threading.local()


def _stack() -> list[Tape]:
    st = getattr(_local, "stack", None)
    if st is None:
        st = _local.stack = []
    return st


def active_tape() -> Tape | None:
    st = _stack()
    return st[-1] if st else None


def record(out: Tensor, inputs: Sequence[Tensor], backward: BackwardFn, op: str) -> Tensor:
    """Put ``out`` on the active tape if any input is tracked by it."""
    tape = active_tape()
    if tape is not None:
        flags = [tape.tracks(t) for t in inputs]
        if any(flags):
            tape.record(out, inputs, backward, op)
    return out


def backward(
    tape: Tape,
    output: Tensor,
    relu_mode: ReluMode = ReluMode.STANDARD,
    seed: np.ndarray | None = None,
) -> dict[Tensor, np.ndarray]:
    """Run the reverse pass and return ``{leaf: gradient}``.

    ``output`` must be scalar unless ``seed`` (same shape as ``output``) is
    given, in which case the result is the vector-Jacobian product with the
    seed. Every registered leaf gets a gradient, zeros if unreachable, and
    its ``grad`` attribute is overwritten.
    """
    if tape.consumed:
        raise RuntimeError("tape already consumed by a previous backward pass")
    if seed is None:
        if output.size != 1:
            raise ValueError(f"backward needs a scalar output or a seed, got shape {output.shape}")
        seed = np.ones(output.shape)
    else:
        seed = np.asarray(seed, dtype=np.float64)
        if seed.shape != output.shape:
            raise ValueError(f"seed shape {seed.shape} != output shape {output.shape}")
    tape.consumed = True

    grads: dict[int, np.ndarray] = {id(output): seed}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        in_grads = node.backward(g, relu_mode)
        for inp, gi in zip(node.inputs, in_grads):
            if gi is None or id(inp) not in tape._tracked:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
    # output may itself be a leaf
    out: dict[Tensor, np.ndarray] = {}
    for key, leaf in tape.leaves.items():
        g = grads.get(key)
        if g is None:
            g = np.zeros(leaf.shape)
        g = np.ascontiguousarray(g, dtype=np.float64).reshape(leaf.shape)
        leaf.grad = g
        out[leaf] = g
    return out
