"""Synthetic five-class 3D dataset with known corner/edge/face structure.

Each sample is a primitive solid, scaled per axis, rotated about the
vertical (z) axis, normalized to the unit cube, then emitted as a mesh, a
jittered surface point cloud, a voxel shell, and per-voxel structure
labels. Every sample draws from its own generator keyed by
``(seed, split, class, index)``, so datasets are reproducible bit for bit
and independent of generation order.
"""

from __future__ import annotations

import io
import json
import os
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from voxgrad.geometry.mesh import PRIMITIVES, TriangleMesh, load_off, write_off
from voxgrad.geometry.sampling import (
    DEFAULT_POINTS,
    DEFAULT_RESOLUTION,
    PointCloud,
    VoxelGrid,
    normalize_unit_cube,
    sample_surface,
    voxelize_mesh,
)
from voxgrad.geometry.structure import structure_labels

CLASSES = ("cube", "sphere", "pyramid", "cylinder", "l_beam")
MANIFEST_FORMAT = "voxgrad-dataset-1"
_SPLIT_SALT = {"train": 0, "test": 1, "val": 2}


@dataclass
class Sample:
    id: str
    label: int
    class_name: str
    mesh: TriangleMesh | None
    points: PointCloud
    voxels: VoxelGrid
    structure: np.ndarray
    split: str = "train"


@dataclass
class SyntheticDataset:
    samples: list[Sample]
    class_names: tuple[str, ...]
    seed: int
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def voxel_batch(self, idx=None) -> np.ndarray:
        """Stack voxel grids as an (N, 1, R, R, R) array."""
        sel = self.samples if idx is None else [self.samples[i] for i in idx]
        return np.stack([s.voxels.occupancy for s in sel])[:, None]

    def point_batch(self, idx=None) -> np.ndarray:
        """Stack point clouds as an (N, P, 3) array."""
        sel = self.samples if idx is None else [self.samples[i] for i in idx]
        return np.stack([s.points.points for s in sel])

    def subset(self, idx) -> "SyntheticDataset":
        return SyntheticDataset([self.samples[i] for i in idx], self.class_names, self.seed, self.params)


def _rotation_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def make_sample(class_name: str, label: int, rng: np.random.Generator, *, resolution: int,
                n_points: int, rotate: bool = True, scale_jitter: float = 0.2,
                point_jitter: float = 0.005, sample_id: str = "", split: str = "train") -> Sample:
    try:
        base = PRIMITIVES[class_name]()
    except KeyError:
        raise ValueError(f"unknown class {class_name!r}; choose from {sorted(PRIMITIVES)}") from None
    scale = 1.0 + rng.uniform(-scale_jitter, scale_jitter, size=3)
    theta = rng.uniform(0.0, 2.0 * np.pi) if rotate else 0.0
    verts = (base.vertices * scale) @ _rotation_z(theta).T
    mesh = normalize_unit_cube(base.transformed(verts))
    voxels = voxelize_mesh(mesh, resolution)
    cloud = sample_surface(mesh, n_points, seed=int(rng.integers(2**63)))
    if point_jitter:
        cloud = PointCloud(cloud.points + rng.normal(0.0, point_jitter, size=cloud.points.shape))
    return Sample(sample_id, label, class_name, mesh, cloud, voxels, structure_labels(voxels), split)


def synth_dataset(classes=CLASSES, per_class: int = 10, resolution: int = DEFAULT_RESOLUTION,
                  seed: int = 0, *, split: str = "train", n_points: int = DEFAULT_POINTS,
                  rotate: bool = True, scale_jitter: float = 0.2,
                  point_jitter: float = 0.005) -> SyntheticDataset:
    classes = tuple(classes)
    unknown = [c for c in classes if c not in PRIMITIVES]
    if unknown:
        raise ValueError(f"unknown class name(s) {unknown}; choose from {sorted(PRIMITIVES)}")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if split not in _SPLIT_SALT:
        raise ValueError(f"unknown split {split!r}")
    samples = []
    for label, name in enumerate(classes):
        for i in range(per_class):
            rng = np.random.default_rng([seed, _SPLIT_SALT[split], label, i])
            samples.append(make_sample(
                name, label, rng, resolution=resolution, n_points=n_points, rotate=rotate,
                scale_jitter=scale_jitter, point_jitter=point_jitter,
                sample_id=f"{split}_{name}_{i:04d}", split=split))
    params = dict(resolution=resolution, n_points=n_points, rotate=rotate,
                  scale_jitter=scale_jitter, point_jitter=point_jitter)
    return SyntheticDataset(samples, classes, seed, params)


# ---------------------------------------------------------------- on-disk form


def _write_npz(path: Path, arrays: dict[str, np.ndarray]) -> None:
    # np.savez stamps the current time into the zip; fix it so files are reproducible
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, buf.getvalue())


def write_dataset(datasets: list[SyntheticDataset], out_dir, extra: dict | None = None) -> dict:
    """Write samples (OFF mesh + array archive each) and ``manifest.json``; return the manifest."""
    out = Path(out_dir)
    (out / "samples").mkdir(parents=True, exist_ok=True)
    entries = []
    for ds in datasets:
        for s in ds.samples:
            mesh_rel = f"samples/{s.id}.off"
            arr_rel = f"samples/{s.id}.npz"
            (out / mesh_rel).write_text(write_off(s.mesh), encoding="ascii")
            R = s.voxels.resolution
            _write_npz(out / arr_rel, {
                "voxels": np.packbits(s.voxels.occupancy.reshape(-1) > 0.5),
                "points": s.points.points,
                "structure": s.structure.reshape(-1),
                "resolution": np.array([R], dtype=np.int64),
            })
            entries.append({"id": s.id, "split": s.split, "class": s.class_name,
                            "label": s.label, "mesh": mesh_rel, "arrays": arr_rel})
    first = datasets[0]
    manifest = {
        "format": MANIFEST_FORMAT,
        "seed": first.seed,
        "classes": list(first.class_names),
        "params": first.params,
        "splits": {ds.samples[0].split: len(ds) for ds in datasets if ds.samples},
        "samples": entries,
    }
    if extra:
        manifest.update(extra)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest


def read_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != MANIFEST_FORMAT or "samples" not in manifest:
        raise ValueError(f"{path}: not a voxgrad dataset manifest")
    return manifest


def load_dataset(manifest_path, split: str | None = None, with_mesh: bool = False) -> SyntheticDataset:
    manifest = read_manifest(manifest_path)
    root = Path(os.path.dirname(os.path.abspath(manifest_path)))
    samples = []
    for e in manifest["samples"]:
        if split is not None and e["split"] != split:
            continue
        with np.load(root / e["arrays"], allow_pickle=False) as z:
            R = int(z["resolution"][0])
            occ = np.unpackbits(z["voxels"])[: R ** 3].reshape(R, R, R).astype(np.float64)
            points = z["points"]
            structure = z["structure"].reshape(R, R, R)
        mesh = load_off(root / e["mesh"]) if with_mesh else None
        samples.append(Sample(e["id"], int(e["label"]), e["class"], mesh, PointCloud(points),
                              VoxelGrid(occ), structure, e["split"]))
    return SyntheticDataset(samples, tuple(manifest["classes"]), int(manifest["seed"]),
                            manifest.get("params", {}))
