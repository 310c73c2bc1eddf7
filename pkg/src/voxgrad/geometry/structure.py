"""Per-voxel structure labels (corner / edge / face / interior).

Counts are taken on the *solid* the surface encloses: background cavities
not reachable from outside (6-connected) are filled first, then each
occupied voxel's 26-neighbourhood is counted in that solid. A hollow box
shell therefore gets the same labels as the matching voxels of a solid box.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


class Structure(enum.IntEnum):
    EMPTY = 0
    CORNER = 1
    EDGE = 2
    FACE = 3
    INTERIOR = 4


@dataclass(frozen=True)
class StructureThresholds:
    corner_max: int = 9
    edge_max: int = 13
    face_max: int = 17


_NEIGHBOURS = np.ones((3, 3, 3))
_NEIGHBOURS[1, 1, 1] = 0.0


def neighbour_counts(grid: np.ndarray) -> np.ndarray:
    """Occupied 26-neighbours of every voxel in the hole-filled solid."""
    solid = ndimage.binary_fill_holes(np.asarray(grid) > 0.5)
    return np.rint(ndimage.correlate(solid.astype(np.float64), _NEIGHBOURS,
                                     mode="constant", cval=0.0)).astype(np.int64)


def structure_labels(grid, thresholds: StructureThresholds = StructureThresholds()) -> np.ndarray:
    """Label array (int8, values from :class:`Structure`) shaped like ``grid``."""
    occ = np.asarray(getattr(grid, "occupancy", grid), dtype=np.float64)
    if not np.isin(occ, (0.0, 1.0)).all():
        raise ValueError("structure_labels needs a binary occupancy grid")
    counts = neighbour_counts(occ)
    labels = np.full(occ.shape, Structure.INTERIOR, dtype=np.int8)
    labels[counts <= thresholds.face_max] = Structure.FACE
    labels[counts <= thresholds.edge_max] = Structure.EDGE
    labels[counts <= thresholds.corner_max] = Structure.CORNER
    labels[occ == 0.0] = Structure.EMPTY
    return labels
