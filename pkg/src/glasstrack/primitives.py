"""Procedural watertight meshes for the object catalog.

Every constructor returns a consistently wound, outward-facing closed
surface centered at the origin. make_mesh() additionally normalizes to unit
bounding-sphere radius and can merge a reversed inner shell so the solid
becomes a hollow vessel.
"""

import numpy as np

from .geometry import TriangleMesh, normalize_mesh

OBJECT_TYPES = ("cube", "sphere", "cylinder", "prism", "torus", "gem")


def cube() -> TriangleMesh:
    v = np.array([
        [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
        [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
    ], dtype=np.float64)
    f = np.array([
        [4, 5, 6], [4, 6, 7],
        [0, 3, 2], [0, 2, 1],
        [0, 4, 7], [0, 7, 3],
        [1, 2, 6], [1, 6, 5],
        [0, 1, 5], [0, 5, 4],
        [3, 7, 6], [3, 6, 2],
    ], dtype=np.int64)
    return TriangleMesh(v, f)


def icosphere(subdivisions: int = 2) -> TriangleMesh:
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=np.float64) for v in verts]
    verts = [v / np.linalg.norm(v) for v in verts]
    midpoint = {}

    def mid(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in midpoint:
            m = verts[a] + verts[b]
            verts.append(m / np.linalg.norm(m))
            midpoint[key] = len(verts) - 1
        return midpoint[key]

    for _ in range(subdivisions):
        nxt = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nxt += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = nxt
    return TriangleMesh(np.asarray(verts), np.asarray(faces, dtype=np.int64))


def cylinder(segments: int = 24, half_height: float = 1.0) -> TriangleMesh:
    n = segments
    ang = 2.0 * np.pi * np.arange(n) / n
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    top = np.column_stack([ring, np.full(n, half_height)])
    bot = np.column_stack([ring, np.full(n, -half_height)])
    v = np.vstack([top, bot, [[0, 0, half_height]], [[0, 0, -half_height]]])
    ct, cb = 2 * n, 2 * n + 1
    f = []
    for i in range(n):
        j = (i + 1) % n
        f += [[n + i, n + j, j], [n + i, j, i]]      # side, outward
        f += [[ct, i, j], [cb, n + j, n + i]]        # caps
    return TriangleMesh(v, np.asarray(f, dtype=np.int64))


def prism() -> TriangleMesh:
    return cylinder(segments=6)


def torus(n_major: int = 24, n_minor: int = 12, major: float = 1.0,
          minor: float = 0.4) -> TriangleMesh:
    a = 2.0 * np.pi * np.arange(n_major) / n_major
    b = 2.0 * np.pi * np.arange(n_minor) / n_minor
    aa, bb = np.meshgrid(a, b, indexing="ij")
    ring = major + minor * np.cos(bb)
    v = np.stack([ring * np.cos(aa), ring * np.sin(aa), minor * np.sin(bb)],
                 axis=-1).reshape(-1, 3)
    f = []
    for i in range(n_major):
        i2 = (i + 1) % n_major
        for j in range(n_minor):
            j2 = (j + 1) % n_minor
            v00 = i * n_minor + j
            v10 = i2 * n_minor + j
            v11 = i2 * n_minor + j2
            v01 = i * n_minor + j2
            f += [[v00, v10, v11], [v00, v11, v01]]
    return TriangleMesh(v, np.asarray(f, dtype=np.int64))


def bipyramid(segments: int = 8, apex: float = 1.3) -> TriangleMesh:
    n = segments
    ang = 2.0 * np.pi * np.arange(n) / n
    ring = np.column_stack([np.cos(ang), np.sin(ang), np.zeros(n)])
    v = np.vstack([ring, [[0, 0, apex]], [[0, 0, -apex]]])
    top, bot = n, n + 1
    f = []
    for i in range(n):
        j = (i + 1) % n
        f += [[top, i, j], [bot, j, i]]
    return TriangleMesh(v, np.asarray(f, dtype=np.int64))


def signed_volume(mesh: TriangleMesh) -> float:
    """Positive for an outward-wound closed surface."""
    v, f = mesh.vertices, mesh.faces
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    return float(np.einsum("ij,ij->", a, np.cross(b, c)) / 6.0)


def _reversed_shell(mesh: TriangleMesh, offset: int) -> np.ndarray:
    return mesh.faces[:, ::-1] + offset


def make_mesh(kind: str, hollow: bool = False) -> TriangleMesh:
    """Catalog mesh by name, normalized to unit bounding-sphere radius.

    hollow=True merges a shrunken reversed copy so the volume is a shell
    with an air cavity. The torus shrinks only its tube radius; every other
    shape is star shaped about the origin and scales uniformly.
    """
    if kind == "cube":
        outer = cube()
    elif kind == "sphere":
        outer = icosphere(2)
    elif kind == "cylinder":
        outer = cylinder()
    elif kind == "prism":
        outer = prism()
    elif kind == "torus":
        outer = torus()
    elif kind == "gem":
        outer = bipyramid()
    else:
        raise ValueError(f"unknown object type {kind!r}")
    if hollow:
        if kind == "torus":
            inner = torus(minor=0.4 * 0.55)
        else:
            inner = TriangleMesh(outer.vertices * 0.85, outer.faces)
        merged = TriangleMesh(
            np.vstack([outer.vertices, inner.vertices]),
            np.vstack([outer.faces,
                       _reversed_shell(inner, len(outer.vertices))]),
        )
        return normalize_mesh(merged)
    return normalize_mesh(outer)
