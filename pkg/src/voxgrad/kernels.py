"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``VOXGRAD_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from voxgrad import _pykernels

if os.environ.get("VOXGRAD_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from voxgrad import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "compiled" if _impl is not _pykernels else "python"

conv3d_forward = _impl.conv3d_forward
conv3d_backward = _impl.conv3d_backward
maxpool3d_forward = _impl.maxpool3d_forward
maxpool3d_backward = _impl.maxpool3d_backward
pointwise_linear = _impl.pointwise_linear


def available_backends() -> dict:
    """Map backend name to kernel module for every backend that imports."""
    out = {"python": _pykernels}
    try:
        from voxgrad import _ckernels
    except ImportError:
        return out
    out["compiled"] = _ckernels
    return out
