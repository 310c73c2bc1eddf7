"""Point clouds, voxel grids, and the conversions between them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from voxgrad.geometry.mesh import TriangleMesh

DEFAULT_RESOLUTION = 32
DEFAULT_POINTS = 1024


@dataclass
class PointCloud:
    points: np.ndarray  # (P, 3)
    scalars: np.ndarray | None = None  # optional per-point channel

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if self.scalars is not None:
            self.scalars = np.asarray(self.scalars, dtype=np.float64).reshape(-1)
            if len(self.scalars) != len(self.points):
                raise ValueError("scalar channel length does not match point count")

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class VoxelGrid:
    occupancy: np.ndarray  # (R, R, R), indexed [ix, iy, iz]

    def __post_init__(self):
        self.occupancy = np.asarray(self.occupancy, dtype=np.float64)
        R = self.occupancy.shape[0]
        if self.occupancy.shape != (R, R, R):
            raise ValueError(f"voxel grid must be cubic, got {self.occupancy.shape}")

    @property
    def resolution(self) -> int:
        return self.occupancy.shape[0]

    def is_binary(self) -> bool:
        return bool(np.isin(self.occupancy, (0.0, 1.0)).all())

    def centers(self, mask: np.ndarray | None = None) -> np.ndarray:
        """Voxel centres ``(i + 0.5) / R`` for voxels selected by ``mask`` (all if None)."""
        R = self.resolution
        idx = np.argwhere(np.ones_like(self.occupancy, dtype=bool) if mask is None else mask)
        return (idx + 0.5) / R


def normalize_unit_cube(obj):
    """Fit the bounding box into [0, 1]^3.

    The longest axis is mapped onto [0, 1] exactly; the other axes are scaled
    by the same factor and centred. Accepts an (P, 3) array, a
    :class:`PointCloud`, or a :class:`TriangleMesh` and returns the same kind.
    """
    if isinstance(obj, TriangleMesh):
        return obj.transformed(normalize_unit_cube(obj.vertices))
    if isinstance(obj, PointCloud):
        return PointCloud(normalize_unit_cube(obj.points), obj.scalars)
    pts = np.asarray(obj, dtype=np.float64).reshape(-1, 3)
    if not np.isfinite(pts).all():
        raise ValueError("normalize_unit_cube: non-finite coordinates")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    ext = hi - lo
    s = ext.max()
    if not s > 0:
        raise ValueError("normalize_unit_cube: all points coincide")
    return (pts - lo) / s + (1.0 - ext / s) / 2.0


def sample_surface(mesh: TriangleMesh, n: int = DEFAULT_POINTS, seed: int = 0) -> PointCloud:
    """Draw ``n`` points uniformly by area: pick faces by area, then uniform barycentrics."""
    if n < 1:
        raise ValueError(f"sample_surface: n must be >= 1, got {n}")
    areas = mesh.face_areas()
    total = areas.sum()
    if not total > 0:
        raise ValueError("sample_surface: mesh has zero surface area")
    rng = np.random.default_rng(seed)
    face = rng.choice(len(areas), size=n, p=areas / total)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    a, b, c = (mesh.vertices[mesh.faces[face, i]] for i in range(3))
    pts = (1.0 - r1)[:, None] * a + (r1 * (1.0 - r2))[:, None] * b + (r1 * r2)[:, None] * c
    return PointCloud(pts)


def voxelize(points, resolution: int = DEFAULT_RESOLUTION, tol: float = 1e-9) -> VoxelGrid:
    """Binary occupancy: voxel index ``floor(c * R)`` per axis, clamped to [0, R-1]."""
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    pts = pts.reshape(-1, 3)
    if resolution < 1:
        raise ValueError(f"voxelize: resolution must be >= 1, got {resolution}")
    if pts.size and (pts.min() < -tol or pts.max() > 1.0 + tol):
        raise ValueError("voxelize: coordinates must lie in [0, 1] (normalize first)")
    idx = np.clip(np.floor(pts * resolution).astype(np.int64), 0, resolution - 1)
    grid = np.zeros((resolution,) * 3)
    grid[idx[:, 0], idx[:, 1], idx[:, 2]] = 1.0
    return VoxelGrid(grid)


def surface_lattice(mesh: TriangleMesh, spacing: float) -> np.ndarray:
    """Deterministic barycentric lattice on every face, step at most ``spacing`` along each edge."""
    out = []
    V, F = mesh.vertices, mesh.faces
    for a, b, c in V[F]:
        longest = max(np.linalg.norm(b - a), np.linalg.norm(c - a), np.linalg.norm(c - b))
        n = max(1, int(np.ceil(longest / spacing)))
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = i + j <= n
        u, v = i[keep] / n, j[keep] / n
        out.append(a + u[:, None] * (b - a) + v[:, None] * (c - a))
    return np.vstack(out)


def voxelize_mesh(mesh: TriangleMesh, resolution: int = DEFAULT_RESOLUTION) -> VoxelGrid:
    """Surface shell of a mesh already normalized to the unit cube.

    The lattice step is half a voxel, so every voxel a face crosses over a
    non-degenerate patch is hit.
    """
    return voxelize(surface_lattice(mesh, 0.5 / resolution), resolution)
