"""Mesh parsing, point sampling, voxelization, synthetic data and heatmap export."""

from voxgrad.geometry.mesh import (
    PRIMITIVES,
    OffParseError,
    TriangleMesh,
    load_off,
    parse_off,
    write_off,
)
from voxgrad.geometry.ply import heat_colors, read_ply, write_ply_heatmap, write_voxel_heatmap
from voxgrad.geometry.sampling import (
    PointCloud,
    VoxelGrid,
    normalize_unit_cube,
    sample_surface,
    surface_lattice,
    voxelize,
    voxelize_mesh,
)
from voxgrad.geometry.structure import Structure, StructureThresholds, structure_labels
from voxgrad.geometry.synth import (
    CLASSES,
    Sample,
    SyntheticDataset,
    load_dataset,
    read_manifest,
    synth_dataset,
    write_dataset,
)

__all__ = [
    "CLASSES", "OffParseError", "PRIMITIVES", "PointCloud", "Sample", "Structure",
    "StructureThresholds", "SyntheticDataset", "TriangleMesh", "VoxelGrid", "heat_colors",
    "load_dataset", "load_off", "normalize_unit_cube", "parse_off", "read_manifest",
    "read_ply", "sample_surface", "structure_labels", "surface_lattice", "synth_dataset",
    "voxelize", "voxelize_mesh", "write_dataset", "write_off", "write_ply_heatmap",
    "write_voxel_heatmap",
]
