"""ASCII PLY export of attribution heatmaps (red = high, blue = low)."""

from __future__ import annotations

import numpy as np

from voxgrad.geometry.sampling import PointCloud, VoxelGrid

_HEADER = """ply
format ascii 1.0
element vertex {n}
property float x
property float y
property float z
property uchar red
property uchar green
property uchar blue
end_header
"""


def heat_colors(scores) -> np.ndarray:
    """Min-max normalise and blend blue (low) to red (high); constant scores map to mid-scale."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if s.size == 0:
        return np.zeros((0, 3), dtype=np.uint8)
    lo, hi = s.min(), s.max()
    t = np.full(s.shape, 0.5) if hi == lo else (s - lo) / (hi - lo)
    red = np.rint(255.0 * t)
    blue = np.rint(255.0 * (1.0 - t))
    return np.stack([red, np.zeros_like(red), blue], axis=1).astype(np.uint8)


def _write(path, xyz: np.ndarray, rgb: np.ndarray) -> None:
    lines = [_HEADER.format(n=len(xyz))]
    for (x, y, z), (r, g, b) in zip(xyz.tolist(), rgb.tolist()):
        lines.append(f"{x!r} {y!r} {z!r} {r} {g} {b}\n")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("".join(lines))


def write_ply_heatmap(points, scores, path) -> None:
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    pts = pts.reshape(-1, 3)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if len(scores) != len(pts):
        raise ValueError(f"{len(scores)} scores for {len(pts)} points")
    _write(path, pts, heat_colors(scores))


def write_voxel_heatmap(grid, scores, path, include_empty: bool = False) -> None:
    """One vertex per occupied voxel centre (or per voxel with ``include_empty``)."""
    grid = grid if isinstance(grid, VoxelGrid) else VoxelGrid(grid)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size != grid.occupancy.size:
        raise ValueError(f"{scores.size} scores for {grid.occupancy.size} voxels")
    scores = scores.reshape(grid.occupancy.shape)
    mask = np.ones(grid.occupancy.shape, dtype=bool) if include_empty else grid.occupancy > 0
    _write(path, grid.centers(mask), heat_colors(scores[mask]))


def read_ply(path) -> tuple[np.ndarray, np.ndarray]:
    """Read back an ASCII PLY written by this module: ``(xyz, rgb)``."""
    with open(path, encoding="ascii") as fh:
        text = fh.read()
    head, sep, body = text.partition("end_header\n")
    if not sep or not head.startswith("ply\nformat ascii 1.0\n"):
        raise ValueError(f"{path}: not an ASCII PLY file")
    n = None
    for line in head.splitlines():
        if line.startswith("element vertex "):
            n = int(line.split()[2])
    if n is None:
        raise ValueError(f"{path}: no vertex element")
    rows = [line.split() for line in body.splitlines() if line.strip()]
    if len(rows) != n:
        raise ValueError(f"{path}: header declares {n} vertices, found {len(rows)}")
    xyz = np.array([[float(v) for v in r[:3]] for r in rows]).reshape(-1, 3)
    rgb = np.array([[int(v) for v in r[3:6]] for r in rows], dtype=np.uint8).reshape(-1, 3)
    return xyz, rgb
