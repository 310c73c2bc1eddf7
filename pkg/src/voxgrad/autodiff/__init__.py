"""Minimal reverse-mode differentiation for the voxel and point models."""

from voxgrad.autodiff.gradcheck import GradCheckResult, grad_check, numeric_gradient
from voxgrad.autodiff.ops import (
    add,
    conv3d,
    dense,
    flatten,
    maxpool3d,
    mul,
    reduce_max,
    relu,
    relu_backward,
    reshape,
    scale,
    shared_dense,
    softmax_cross_entropy,
    square,
    sum_all,
)
from voxgrad.autodiff.optim import SGD, OptimConfig, sgd_step
from voxgrad.autodiff.serialize import (
    FormatError,
    load_tensor,
    read_tensor,
    save_tensor,
    tensor_from_bytes,
    tensor_to_bytes,
    write_tensor,
)
from voxgrad.autodiff.tensor import ReluMode, Tape, Tensor, active_tape, backward

__all__ = [
    "FormatError", "GradCheckResult", "OptimConfig", "ReluMode", "SGD", "Tape", "Tensor",
    "active_tape", "add", "backward", "conv3d", "dense", "flatten", "grad_check",
    "load_tensor", "maxpool3d", "mul", "numeric_gradient", "read_tensor", "reduce_max",
    "relu", "relu_backward", "reshape", "save_tensor", "scale", "sgd_step",
    "shared_dense", "softmax_cross_entropy", "square", "sum_all", "tensor_from_bytes",
    "tensor_to_bytes", "write_tensor",
]
