"""Triangle meshes: OBJ loading, validation, normalization, a binned-SAH
bounding volume hierarchy, and a vectorized brute-force intersector kept as
an independent reference for the BVH traversal.
"""

from dataclasses import dataclass

import numpy as np

from .errors import MeshParseError

# intersection conventions, mirrored by the compiled kernels
DET_EPS = 1e-12
T_MIN = 1e-7


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (n, 3) float64
    faces: np.ndarray     # (m, 3) int64


def load_obj(path) -> TriangleMesh:
    """Parse the v/f subset of Wavefront OBJ.

    Faces with more than three vertices are fan triangulated. Indices may be
    1-based or negative (relative to the vertices seen so far). Other record
    types are skipped. Malformed records raise MeshParseError with the line
    number.
    """
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshParseError("vertex needs 3 coordinates", line=lineno)
                try:
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError:
                    raise MeshParseError(f"bad vertex coordinate in {line!r}", line=lineno)
            elif tag == "f":
                if len(parts) < 4:
                    raise MeshParseError("face needs at least 3 indices", line=lineno)
                idx = []
                for token in parts[1:]:
                    head = token.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise MeshParseError(f"bad face index {token!r}", line=lineno)
                    if i < 0:
                        i = len(vertices) + i
                    else:
                        i = i - 1
                    if i < 0 or i >= len(vertices):
                        raise MeshParseError(f"face index {token!r} out of range", line=lineno)
                    idx.append(i)
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not vertices or not faces:
        raise MeshParseError("mesh has no triangles")
    return TriangleMesh(
        np.asarray(vertices, dtype=np.float64), np.asarray(faces, dtype=np.int64)
    )


def save_obj(path, mesh: TriangleMesh):
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def mesh_bounds(vertices):
    v = np.asarray(vertices)
    return v.min(axis=0), v.max(axis=0)


def is_watertight(mesh: TriangleMesh) -> bool:
    """True when every directed edge occurs exactly once and its reverse
    exists, i.e. the surface is closed and consistently wound."""
    f = mesh.faces
    n = int(mesh.vertices.shape[0])
    a, b, c = f[:, 0], f[:, 1], f[:, 2]
    if np.any(a == b) or np.any(b == c) or np.any(c == a):
        return False
    fwd = np.concatenate([a * n + b, b * n + c, c * n + a])
    rev = np.concatenate([b * n + a, c * n + b, a * n + c])
    fwd_sorted = np.sort(fwd)
    if np.any(fwd_sorted[1:] == fwd_sorted[:-1]):
        return False
    return bool(np.all(np.isin(fwd, fwd_sorted)) and np.all(np.isin(rev, fwd_sorted)))


def normalize_mesh(mesh: TriangleMesh) -> TriangleMesh:
    """Center on the bounds midpoint and scale to unit bounding-sphere radius."""
    v = mesh.vertices
    lo, hi = mesh_bounds(v)
    centered = v - 0.5 * (lo + hi)
    r = np.sqrt((centered * centered).sum(axis=1).max())
    if r <= 0.0:
        raise ValueError("mesh is degenerate (zero extent)")
    return TriangleMesh(centered / r, mesh.faces)


def transform_vertices(vertices, rotation, scale, translation):
    """world = rotation @ (scale * v) + translation, row-vector convention."""
    return np.asarray(vertices) @ (scale * np.asarray(rotation)).T + translation


# ---------------------------------------------------------------------------
# BVH

@dataclass(frozen=True)
class BVH:
    """Flat binned-SAH hierarchy plus triangle data in traversal order.

    Internal node: count == 0, left/right are child node indices, axis is the
    split axis (near child first during traversal). Leaf: count > 0, left is
    the offset of the first triangle, right is -1.
    """
    node_min: np.ndarray    # (n_nodes, 3)
    node_max: np.ndarray
    node_left: np.ndarray   # (n_nodes,)
    node_right: np.ndarray
    node_count: np.ndarray
    node_axis: np.ndarray
    tri_p0: np.ndarray      # (m, 3) first vertex, traversal order
    tri_e1: np.ndarray      # v1 - v0
    tri_e2: np.ndarray      # v2 - v0
    tri_id: np.ndarray      # (m,) original face index


def build_bvh(mesh: TriangleMesh, leaf_size: int = 4, n_bins: int = 16,
              max_sah_depth: int = 24) -> BVH:
    v, f = mesh.vertices, mesh.faces
    m = f.shape[0]
    p0, p1, p2 = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    tri_lo = np.minimum(np.minimum(p0, p1), p2)
    tri_hi = np.maximum(np.maximum(p0, p1), p2)
    cent = 0.5 * (tri_lo + tri_hi)
    order = np.arange(m, dtype=np.int64)

    nodes = []

    def half_area(lo, hi):
        d = hi - lo
        return d[0] * d[1] + d[1] * d[2] + d[2] * d[0]

    def build(start, end, depth):
        idx = len(nodes)
        nodes.append(None)
        sel = order[start:end]
        lo = tri_lo[sel].min(axis=0)
        hi = tri_hi[sel].max(axis=0)
        n = end - start
        if n <= leaf_size:
            nodes[idx] = (lo, hi, start, -1, n, 0)
            return idx
        c = cent[sel]
        clo, chi = c.min(axis=0), c.max(axis=0)
        axis = int(np.argmax(chi - clo))
        extent = chi[axis] - clo[axis]
        mid = -1
        # median splits below max_sah_depth halve the range exactly, which
        # bounds total depth well under the fixed traversal stack
        if extent > 1e-12 and depth < max_sah_depth:
            which = np.minimum(
                ((c[:, axis] - clo[axis]) * (n_bins / extent)).astype(np.int64),
                n_bins - 1,
            )
            counts = np.bincount(which, minlength=n_bins)
            bin_lo = np.full((n_bins, 3), np.inf)
            bin_hi = np.full((n_bins, 3), -np.inf)
            for b in range(n_bins):
                mask = which == b
                if counts[b]:
                    bin_lo[b] = tri_lo[sel[mask]].min(axis=0)
                    bin_hi[b] = tri_hi[sel[mask]].max(axis=0)
            best_cost, best_split = np.inf, -1
            left_lo = np.minimum.accumulate(bin_lo, axis=0)
            left_hi = np.maximum.accumulate(bin_hi, axis=0)
            right_lo = np.minimum.accumulate(bin_lo[::-1], axis=0)[::-1]
            right_hi = np.maximum.accumulate(bin_hi[::-1], axis=0)[::-1]
            left_n = np.cumsum(counts)
            for b in range(n_bins - 1):
                nl, nr = left_n[b], n - left_n[b]
                if nl == 0 or nr == 0:
                    continue
                cost = nl * half_area(left_lo[b], left_hi[b]) + nr * half_area(
                    right_lo[b + 1], right_hi[b + 1]
                )
                if cost < best_cost:
                    best_cost, best_split = cost, b
            if best_split >= 0:
                left_mask = which <= best_split
                order[start:end] = np.concatenate([sel[left_mask], sel[~left_mask]])
                mid = start + int(left_mask.sum())
        if mid <= start or mid >= end:
            # degenerate centroids or split: median along the widest axis
            key = np.argsort(c[:, axis], kind="stable")
            order[start:end] = sel[key]
            mid = start + n // 2
        left = build(start, mid, depth + 1)
        right = build(mid, end, depth + 1)
        nodes[idx] = (lo, hi, left, right, 0, axis)
        return idx

    build(0, m, 0)

    node_min = np.array([nd[0] for nd in nodes])
    node_max = np.array([nd[1] for nd in nodes])
    node_left = np.array([nd[2] for nd in nodes], dtype=np.int64)
    node_right = np.array([nd[3] for nd in nodes], dtype=np.int64)
    node_count = np.array([nd[4] for nd in nodes], dtype=np.int64)
    node_axis = np.array([nd[5] for nd in nodes], dtype=np.int64)
    return BVH(
        node_min, node_max, node_left, node_right, node_count, node_axis,
        np.ascontiguousarray(p0[order]),
        np.ascontiguousarray(p1[order] - p0[order]),
        np.ascontiguousarray(p2[order] - p0[order]),
        order.copy(),
    )


def ray_mesh_brute(origins, directions, mesh: TriangleMesh, t_min: float = T_MIN,
                   chunk: int = 128):
    """Nearest hit per ray by testing every triangle, vectorized over
    ray-triangle pairs in chunks. Independent of the BVH path by design.

    Returns (t, face_index) arrays; misses are (inf, -1).
    """
    o = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    d = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    v, f = mesh.vertices, mesh.faces
    p0 = v[f[:, 0]]
    e1 = v[f[:, 1]] - p0
    e2 = v[f[:, 2]] - p0
    n_rays = o.shape[0]
    best_t = np.full(n_rays, np.inf)
    best_id = np.full(n_rays, -1, dtype=np.int64)
    for s in range(0, n_rays, chunk):
        oo = o[s:s + chunk][:, None, :]
        dd = d[s:s + chunk][:, None, :]
        pvec = np.cross(dd, e2[None, :, :])
        det = np.einsum("rmk,mk->rm", pvec, e1)
        ok = np.abs(det) > DET_EPS
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        tvec = oo - p0[None, :, :]
        u = np.einsum("rmk,rmk->rm", tvec, pvec) * inv
        ok &= (u >= 0.0) & (u <= 1.0)
        qvec = np.cross(tvec, e1[None, :, :])
        w = np.einsum("rmk,mk->rm", qvec, e2)  # t numerator
        vv = np.einsum("rmk,rmk->rm", dd, qvec) * inv
        ok &= (vv >= 0.0) & (u + vv <= 1.0)
        t = w * inv
        ok &= t > t_min
        t = np.where(ok, t, np.inf)
        arg = np.argmin(t, axis=1)
        rows = np.arange(t.shape[0])
        tbest = t[rows, arg]
        hit = np.isfinite(tbest)
        best_t[s:s + chunk] = np.where(hit, tbest, np.inf)
        best_id[s:s + chunk] = np.where(hit, arg, -1)
    return best_t, best_id
