"""Triangle meshes: OFF parsing/writing and the primitive solids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class OffParseError(ValueError):
    """Malformed OFF input. ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray  # (F, 3) int64

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ValueError("face index out of range")

    def face_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def transformed(self, vertices: np.ndarray) -> "TriangleMesh":
        return TriangleMesh(vertices, self.faces.copy())


def parse_off(text: str | bytes) -> TriangleMesh:
    """Parse an ASCII OFF file.

    Comments (``#`` to end of line) and blank lines are ignored. The
    ``OFF`` header is optional and may be glued to the counts, as in some
    ModelNet files (``OFF490 518 0``). Polygons with more than three
    vertices are fan-triangulated.
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("ascii", errors="replace")
    rows: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            rows.append((lineno, tokens))
    if not rows:
        raise OffParseError("empty file, missing counts line", 1)

    pos = 0
    lineno, tokens = rows[0]
    if tokens[0].upper().startswith("OFF"):
        rest = tokens[0][3:]
        tokens = ([rest] if rest else []) + tokens[1:]
        if not tokens:
            pos = 1
            if pos >= len(rows):
                raise OffParseError("missing counts line after OFF header", lineno + 1)
            lineno, tokens = rows[pos]
        else:
            rows[0] = (lineno, tokens)
    counts_line = lineno
    try:
        n_vert, n_face = int(tokens[0]), int(tokens[1])
    except (IndexError, ValueError):
        raise OffParseError(f"expected counts line 'V F E', got {' '.join(tokens)!r}", lineno) from None
    if n_vert < 0 or n_face < 0:
        raise OffParseError("negative vertex or face count", lineno)
    body = rows[pos + 1:]
    if len(body) < n_vert + n_face:
        raise OffParseError(
            f"counts line declares {n_vert} vertices and {n_face} faces, "
            f"but only {len(body)} data lines follow", counts_line)

    verts = np.empty((n_vert, 3))
    for i in range(n_vert):
        ln, tok = body[i]
        if len(tok) < 3:
            raise OffParseError(f"vertex line needs 3 coordinates, got {len(tok)}", ln)
        try:
            verts[i] = [float(t) for t in tok[:3]]
        except ValueError:
            raise OffParseError(f"bad vertex coordinates {' '.join(tok)!r}", ln) from None

    tris: list[tuple[int, int, int]] = []
    for ln, tok in body[n_vert:n_vert + n_face]:
        try:
            k = int(tok[0])
            idx = [int(t) for t in tok[1:1 + k]]
        except ValueError:
            raise OffParseError(f"bad face line {' '.join(tok)!r}", ln) from None
        if k < 3 or len(idx) != k:
            raise OffParseError(f"face declares {k} vertices, has {len(idx)}", ln)
        for v in idx:
            if not 0 <= v < n_vert:
                raise OffParseError(f"face index {v} out of bounds for {n_vert} vertices", ln)
        for j in range(1, k - 1):
            tris.append((idx[0], idx[j], idx[j + 1]))
    return TriangleMesh(verts, np.array(tris, dtype=np.int64).reshape(-1, 3))


def write_off(mesh: TriangleMesh) -> str:
    lines = ["OFF", f"{len(mesh.vertices)} {len(mesh.faces)} 0"]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.faces]
    return "\n".join(lines) + "\n"


def load_off(path) -> TriangleMesh:
    with open(path, "rb") as fh:
        return parse_off(fh.read())


# ---------------------------------------------------------------- primitives
# All centred on the origin, fitting in [-0.5, 0.5]^3, z is the vertical axis.


def _quad(a, b, c, d):
    return [(a, b, c), (a, c, d)]


def box_mesh() -> TriangleMesh:
    v = np.array([[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)])
    # vertex index = 4*ix + 2*iy + iz
    f = []
    f += _quad(0, 1, 3, 2)  # x = -0.5
    f += _quad(4, 6, 7, 5)  # x = +0.5
    f += _quad(0, 4, 5, 1)  # y = -0.5
    f += _quad(2, 3, 7, 6)  # y = +0.5
    f += _quad(0, 2, 6, 4)  # z = -0.5
    f += _quad(1, 5, 7, 3)  # z = +0.5
    return TriangleMesh(v, f)


def sphere_mesh(n_lat: int = 12, n_lon: int = 24) -> TriangleMesh:
    verts = [[0.0, 0.0, 0.5]]
    for i in range(1, n_lat):
        th = np.pi * i / n_lat
        for j in range(n_lon):
            ph = 2 * np.pi * j / n_lon
            verts.append([0.5 * np.sin(th) * np.cos(ph), 0.5 * np.sin(th) * np.sin(ph), 0.5 * np.cos(th)])
    verts.append([0.0, 0.0, -0.5])
    bottom = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * n_lon + j % n_lon

    faces = []
    for j in range(n_lon):
        faces.append((0, ring(1, j), ring(1, j + 1)))
        faces.append((bottom, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)))
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            faces += _quad(ring(i, j), ring(i + 1, j), ring(i + 1, j + 1), ring(i, j + 1))
    return TriangleMesh(np.array(verts), faces)


def pyramid_mesh() -> TriangleMesh:
    v = np.array([[-0.5, -0.5, -0.5], [0.5, -0.5, -0.5], [0.5, 0.5, -0.5], [-0.5, 0.5, -0.5],
                  [0.0, 0.0, 0.5]])
    f = _quad(0, 3, 2, 1) + [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)]
    return TriangleMesh(v, f)


def cylinder_mesh(n_seg: int = 24) -> TriangleMesh:
    ang = 2 * np.pi * np.arange(n_seg) / n_seg
    ring = np.stack([0.5 * np.cos(ang), 0.5 * np.sin(ang)], axis=1)
    bottom = np.column_stack([ring, np.full(n_seg, -0.5)])
    top = np.column_stack([ring, np.full(n_seg, 0.5)])
    v = np.vstack([bottom, top, [[0, 0, -0.5], [0, 0, 0.5]]])
    cb, ct = 2 * n_seg, 2 * n_seg + 1
    f = []
    for j in range(n_seg):
        k = (j + 1) % n_seg
        f += _quad(j, k, n_seg + k, n_seg + j)
        f.append((cb, k, j))
        f.append((ct, n_seg + j, n_seg + k))
    return TriangleMesh(v, f)


def l_beam_mesh(flange: float = 0.35) -> TriangleMesh:
    """An L-shaped profile in the x-z plane extruded along y."""
    t = flange - 0.5
    prof = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, t], [t, t], [t, 0.5], [-0.5, 0.5]])
    n = len(prof)
    front = np.column_stack([prof[:, 0], np.full(n, -0.5), prof[:, 1]])
    back = np.column_stack([prof[:, 0], np.full(n, 0.5), prof[:, 1]])
    v = np.vstack([front, back])
    # the profile splits into two convex quads: 0-1-2-3 and 0-3-4-5
    f = _quad(0, 1, 2, 3) + _quad(0, 3, 4, 5)
    f += [(a + n, c + n, b + n) for a, b, c in f]
    for j in range(n):
        k = (j + 1) % n
        f += _quad(j, n + j, n + k, k)
    return TriangleMesh(v, f)


PRIMITIVES = {
    "cube": box_mesh,
    "sphere": sphere_mesh,
    "pyramid": pyramid_mesh,
    "cylinder": cylinder_mesh,
    "l_beam": l_beam_mesh,
}
