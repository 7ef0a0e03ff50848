"""Hot ray-tracing loops, compiled with numba by default.

Set GLASSTRACK_BACKEND=numpy to run the exact same functions undecorated.
Code here is scalar and allocation-light on purpose so both paths execute
identically; nothing in this module may rely on numba-only semantics.

Unsigned integer math is banned inside kernels (numba promotes mixed
signed/unsigned to float64): all sample jitter is hashed outside and passed
in as float arrays.
"""

import math
import os

import numpy as np

BACKEND = os.environ.get("GLASSTRACK_BACKEND", "numba").strip().lower()
if BACKEND not in ("numba", "numpy"):
    raise ValueError(
        f"GLASSTRACK_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}"
    )
USING_NUMBA = BACKEND == "numba"

if USING_NUMBA:
    import numba

    def jit(fn):
        return numba.njit(cache=True, nogil=True)(fn)
else:
    def jit(fn):
        return fn

# keep in sync with geometry.DET_EPS / geometry.T_MIN
DET_EPS = 1e-12
T_MIN = 1e-7
MAX_DEPTH = 6
WEIGHT_CUTOFF = 1e-3


@jit
def fresnel_reflectance(cos_i, n1, n2):
    """Exact unpolarized reflectance of a smooth dielectric interface.

    cos_i is the cosine of the incidence angle (>= 0). Returns 1.0 under
    total internal reflection.
    """
    ratio = n1 / n2
    sin_t2 = ratio * ratio * (1.0 - cos_i * cos_i)
    if sin_t2 >= 1.0:
        return 1.0
    cos_t = math.sqrt(1.0 - sin_t2)
    rs = (n1 * cos_i - n2 * cos_t) / (n1 * cos_i + n2 * cos_t)
    rp = (n1 * cos_t - n2 * cos_i) / (n1 * cos_t + n2 * cos_i)
    return 0.5 * (rs * rs + rp * rp)


@jit
def refract_dir(dx, dy, dz, nx, ny, nz, eta, cos_i):
    """Refracted unit direction. The normal must face the incoming side
    (dot(d, n) == -cos_i <= 0) and the caller must rule out TIR."""
    sin_t2 = eta * eta * (1.0 - cos_i * cos_i)
    cos_t = math.sqrt(max(0.0, 1.0 - sin_t2))
    k = eta * cos_i - cos_t
    tx = eta * dx + k * nx
    ty = eta * dy + k * ny
    tz = eta * dz + k * nz
    inv = 1.0 / math.sqrt(tx * tx + ty * ty + tz * tz)
    return tx * inv, ty * inv, tz * inv


@jit
def bvh_hit(node_min, node_max, node_left, node_right, node_count, node_axis,
            tri_p0, tri_e1, tri_e2,
            ox, oy, oz, dx, dy, dz, t_min, t_max):
    """Nearest triangle along a ray. Returns (t, triangle, tri_tests,
    node_visits); misses are (inf, -1, ...). The direction need not be
    normalized; t is in units of its length."""
    ddx = dx
    ddy = dy
    ddz = dz
    # clamp before inverting so the pure-python path never divides by zero
    if -1e-300 < ddx < 1e-300:
        ddx = 1e-300 if ddx >= 0.0 else -1e-300
    if -1e-300 < ddy < 1e-300:
        ddy = 1e-300 if ddy >= 0.0 else -1e-300
    if -1e-300 < ddz < 1e-300:
        ddz = 1e-300 if ddz >= 0.0 else -1e-300
    inv_x = 1.0 / ddx
    inv_y = 1.0 / ddy
    inv_z = 1.0 / ddz
    best_t = t_max
    best_tri = -1
    tests = 0
    visits = 0
    stack = np.empty(64, np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        visits += 1
        ta = (node_min[node, 0] - ox) * inv_x
        tb = (node_max[node, 0] - ox) * inv_x
        tnear = min(ta, tb)
        tfar = max(ta, tb)
        ta = (node_min[node, 1] - oy) * inv_y
        tb = (node_max[node, 1] - oy) * inv_y
        tnear = max(tnear, min(ta, tb))
        tfar = min(tfar, max(ta, tb))
        ta = (node_min[node, 2] - oz) * inv_z
        tb = (node_max[node, 2] - oz) * inv_z
        tnear = max(tnear, min(ta, tb), t_min)
        tfar = min(tfar, max(ta, tb), best_t)
        if tnear > tfar:
            continue
        cnt = node_count[node]
        if cnt > 0:
            start = node_left[node]
            for i in range(start, start + cnt):
                tests += 1
                e1x = tri_e1[i, 0]
                e1y = tri_e1[i, 1]
                e1z = tri_e1[i, 2]
                e2x = tri_e2[i, 0]
                e2y = tri_e2[i, 1]
                e2z = tri_e2[i, 2]
                pvx = dy * e2z - dz * e2y
                pvy = dz * e2x - dx * e2z
                pvz = dx * e2y - dy * e2x
                det = e1x * pvx + e1y * pvy + e1z * pvz
                if abs(det) <= DET_EPS:
                    continue
                inv = 1.0 / det
                tvx = ox - tri_p0[i, 0]
                tvy = oy - tri_p0[i, 1]
                tvz = oz - tri_p0[i, 2]
                u = (tvx * pvx + tvy * pvy + tvz * pvz) * inv
                if u < 0.0 or u > 1.0:
                    continue
                qvx = tvy * e1z - tvz * e1y
                qvy = tvz * e1x - tvx * e1z
                qvz = tvx * e1y - tvy * e1x
                v = (dx * qvx + dy * qvy + dz * qvz) * inv
                if v < 0.0 or u + v > 1.0:
                    continue
                t = (e2x * qvx + e2y * qvy + e2z * qvz) * inv
                if t <= t_min or t >= best_t:
                    continue
                best_t = t
                best_tri = i
        else:
            axis = node_axis[node]
            near = node_left[node]
            far = node_right[node]
            if axis == 0:
                d_axis = dx
            elif axis == 1:
                d_axis = dy
            else:
                d_axis = dz
            if d_axis < 0.0:
                near, far = far, near
            stack[sp] = far
            sp += 1
            stack[sp] = near
            sp += 1
    if best_tri < 0:
        return np.inf, -1, tests, visits
    return best_t, best_tri, tests, visits


@jit
def bvh_count(node_min, node_max, node_left, node_right, node_count, node_axis,
              tri_p0, tri_e1, tri_e2,
              ox, oy, oz, dx, dy, dz, t_min):
    """Number of surface crossings along the ray (t > t_min). Odd means the
    origin is inside a watertight surface."""
    ddx = dx
    ddy = dy
    ddz = dz
    if -1e-300 < ddx < 1e-300:
        ddx = 1e-300 if ddx >= 0.0 else -1e-300
    if -1e-300 < ddy < 1e-300:
        ddy = 1e-300 if ddy >= 0.0 else -1e-300
    if -1e-300 < ddz < 1e-300:
        ddz = 1e-300 if ddz >= 0.0 else -1e-300
    inv_x = 1.0 / ddx
    inv_y = 1.0 / ddy
    inv_z = 1.0 / ddz
    crossings = 0
    stack = np.empty(64, np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        ta = (node_min[node, 0] - ox) * inv_x
        tb = (node_max[node, 0] - ox) * inv_x
        tnear = min(ta, tb)
        tfar = max(ta, tb)
        ta = (node_min[node, 1] - oy) * inv_y
        tb = (node_max[node, 1] - oy) * inv_y
        tnear = max(tnear, min(ta, tb))
        tfar = min(tfar, max(ta, tb))
        ta = (node_min[node, 2] - oz) * inv_z
        tb = (node_max[node, 2] - oz) * inv_z
        tnear = max(tnear, min(ta, tb), t_min)
        tfar = min(tfar, max(ta, tb))
        if tnear > tfar:
            continue
        cnt = node_count[node]
        if cnt > 0:
            start = node_left[node]
            for i in range(start, start + cnt):
                e1x = tri_e1[i, 0]
                e1y = tri_e1[i, 1]
                e1z = tri_e1[i, 2]
                e2x = tri_e2[i, 0]
                e2y = tri_e2[i, 1]
                e2z = tri_e2[i, 2]
                pvx = dy * e2z - dz * e2y
                pvy = dz * e2x - dx * e2z
                pvz = dx * e2y - dy * e2x
                det = e1x * pvx + e1y * pvy + e1z * pvz
                if abs(det) <= DET_EPS:
                    continue
                inv = 1.0 / det
                tvx = ox - tri_p0[i, 0]
                tvy = oy - tri_p0[i, 1]
                tvz = oz - tri_p0[i, 2]
                u = (tvx * pvx + tvy * pvy + tvz * pvz) * inv
                if u < 0.0 or u > 1.0:
                    continue
                qvx = tvy * e1z - tvz * e1y
                qvy = tvz * e1x - tvx * e1z
                qvz = tvx * e1y - tvy * e1x
                v = (dx * qvx + dy * qvy + dz * qvz) * inv
                if v < 0.0 or u + v > 1.0:
                    continue
                t = (e2x * qvx + e2y * qvy + e2z * qvz) * inv
                if t <= t_min:
                    continue
                crossings += 1
        else:
            stack[sp] = node_left[node]
            sp += 1
            stack[sp] = node_right[node]
            sp += 1
    return crossings


@jit
def sample_backdrop(bd, half_w, half_h, dist, ox, oy, oz, dx, dy, dz):
    """Bilinear radiance from the image plane at z = -dist, border clamped.

    Rays that point away from the plane are clamped to a grazing direction
    so every escaped ray maps to a defined border value."""
    dzz = dz
    if dzz > -1e-12:
        dzz = -1e-12
    t = (-dist - oz) / dzz
    x = ox + t * dx
    y = oy + t * dy
    h = bd.shape[0]
    w = bd.shape[1]
    u = ((x / half_w) + 1.0) * 0.5 * w - 0.5
    v = (1.0 - ((y / half_h) + 1.0) * 0.5) * h - 0.5
    if u < 0.0:
        u = 0.0
    if u > w - 1.0:
        u = w - 1.0
    if v < 0.0:
        v = 0.0
    if v > h - 1.0:
        v = h - 1.0
    x0 = int(u)
    y0 = int(v)
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = u - x0
    fy = v - y0
    r = (bd[y0, x0, 0] * (1.0 - fx) + bd[y0, x1, 0] * fx) * (1.0 - fy) + (
        bd[y1, x0, 0] * (1.0 - fx) + bd[y1, x1, 0] * fx) * fy
    g = (bd[y0, x0, 1] * (1.0 - fx) + bd[y0, x1, 1] * fx) * (1.0 - fy) + (
        bd[y1, x0, 1] * (1.0 - fx) + bd[y1, x1, 1] * fx) * fy
    b = (bd[y0, x0, 2] * (1.0 - fx) + bd[y0, x1, 2] * fx) * (1.0 - fy) + (
        bd[y1, x0, 2] * (1.0 - fx) + bd[y1, x1, 2] * fx) * fy
    return r, g, b


@jit
def scene_hit(node_min, node_max, node_left, node_right, node_count, node_axis,
              node_off, tri_p0, tri_e1, tri_e2, tri_off,
              inv_rot, pos, scale,
              ox, oy, oz, dx, dy, dz, t_min):
    """Nearest hit over all objects. Rays are taken to object space with
    o' = R^T (o - p) / s and d' = R^T d / s; uniform scaling of both keeps
    t identical in world and object space.

    Returns (t, object, nx, ny, nz) with a unit world-space geometric
    normal oriented by the winding, or (inf, -1, 0, 0, 0) on a miss."""
    n_obj = scale.shape[0]
    best_t = np.inf
    best_obj = -1
    bnx = 0.0
    bny = 0.0
    bnz = 0.0
    for obj in range(n_obj):
        s = scale[obj]
        rx = ox - pos[obj, 0]
        ry = oy - pos[obj, 1]
        rz = oz - pos[obj, 2]
        o0 = (inv_rot[obj, 0, 0] * rx + inv_rot[obj, 0, 1] * ry + inv_rot[obj, 0, 2] * rz) / s
        o1 = (inv_rot[obj, 1, 0] * rx + inv_rot[obj, 1, 1] * ry + inv_rot[obj, 1, 2] * rz) / s
        o2 = (inv_rot[obj, 2, 0] * rx + inv_rot[obj, 2, 1] * ry + inv_rot[obj, 2, 2] * rz) / s
        d0 = (inv_rot[obj, 0, 0] * dx + inv_rot[obj, 0, 1] * dy + inv_rot[obj, 0, 2] * dz) / s
        d1 = (inv_rot[obj, 1, 0] * dx + inv_rot[obj, 1, 1] * dy + inv_rot[obj, 1, 2] * dz) / s
        d2 = (inv_rot[obj, 2, 0] * dx + inv_rot[obj, 2, 1] * dy + inv_rot[obj, 2, 2] * dz) / s
        n0 = node_off[obj]
        n1 = node_off[obj + 1]
        t0 = tri_off[obj]
        t1 = tri_off[obj + 1]
        t, tri, _, _ = bvh_hit(
            node_min[n0:n1], node_max[n0:n1], node_left[n0:n1],
            node_right[n0:n1], node_count[n0:n1], node_axis[n0:n1],
            tri_p0[t0:t1], tri_e1[t0:t1], tri_e2[t0:t1],
            o0, o1, o2, d0, d1, d2, t_min, best_t)
        if tri >= 0:
            best_t = t
            best_obj = obj
            gi = t0 + tri
            gx = tri_e1[gi, 1] * tri_e2[gi, 2] - tri_e1[gi, 2] * tri_e2[gi, 1]
            gy = tri_e1[gi, 2] * tri_e2[gi, 0] - tri_e1[gi, 0] * tri_e2[gi, 2]
            gz = tri_e1[gi, 0] * tri_e2[gi, 1] - tri_e1[gi, 1] * tri_e2[gi, 0]
            # world normal: R @ n, with R = inv_rot^T
            bnx = inv_rot[obj, 0, 0] * gx + inv_rot[obj, 1, 0] * gy + inv_rot[obj, 2, 0] * gz
            bny = inv_rot[obj, 0, 1] * gx + inv_rot[obj, 1, 1] * gy + inv_rot[obj, 2, 1] * gz
            bnz = inv_rot[obj, 0, 2] * gx + inv_rot[obj, 1, 2] * gy + inv_rot[obj, 2, 2] * gz
    if best_obj >= 0:
        inv = 1.0 / math.sqrt(bnx * bnx + bny * bny + bnz * bnz)
        bnx *= inv
        bny *= inv
        bnz *= inv
    return best_t, best_obj, bnx, bny, bnz


@jit
def render_frame_kernel(bg, jitter, tan_half, aspect,
                        bd, bd_half_w, bd_half_h, bd_dist,
                        node_min, node_max, node_left, node_right,
                        node_count, node_axis, node_off,
                        tri_p0, tri_e1, tri_e2, tri_off,
                        inv_rot, pos, scale, mat_w, tint, ior,
                        gray, ambient, max_depth, cutoff, eps):
    """Average radiance per pixel, (h, w, 3) float64 in [0, 1] scale.

    inv_rot is (S, n_obj, 3, 3) and pos (S, n_obj, 3): one pose per temporal
    shutter sample. Primary rays that miss every object copy the source
    background pixel unchanged; all other escapes and both transport caps
    (depth, throughput) sample the backdrop plane, so a unit-weight clear
    material reproduces a uniform environment exactly.
    """
    h = bg.shape[0]
    w = bg.shape[1]
    spp = jitter.shape[2]
    n_time = inv_rot.shape[0]
    out = np.zeros((h, w, 3))
    stack_o = np.empty((16, 3))
    stack_d = np.empty((16, 3))
    stack_w = np.empty((16, 3))
    stack_depth = np.empty(16, np.int64)
    inv_n = 1.0 / (spp * n_time)
    for y in range(h):
        for x in range(w):
            acc_r = 0.0
            acc_g = 0.0
            acc_b = 0.0
            for smp in range(spp):
                ndc_x = ((x + jitter[y, x, smp, 0]) / w) * 2.0 - 1.0
                ndc_y = 1.0 - ((y + jitter[y, x, smp, 1]) / h) * 2.0
                cdx = ndc_x * tan_half * aspect
                cdy = ndc_y * tan_half
                cdz = -1.0
                inv_len = 1.0 / math.sqrt(cdx * cdx + cdy * cdy + 1.0)
                cdx *= inv_len
                cdy *= inv_len
                cdz *= inv_len
                for ts in range(n_time):
                    stack_o[0, 0] = 0.0
                    stack_o[0, 1] = 0.0
                    stack_o[0, 2] = 0.0
                    stack_d[0, 0] = cdx
                    stack_d[0, 1] = cdy
                    stack_d[0, 2] = cdz
                    stack_w[0, 0] = 1.0
                    stack_w[0, 1] = 1.0
                    stack_w[0, 2] = 1.0
                    stack_depth[0] = 0
                    sp = 1
                    while sp > 0:
                        sp -= 1
                        ox = stack_o[sp, 0]
                        oy = stack_o[sp, 1]
                        oz = stack_o[sp, 2]
                        dx = stack_d[sp, 0]
                        dy = stack_d[sp, 1]
                        dz = stack_d[sp, 2]
                        wr = stack_w[sp, 0]
                        wg = stack_w[sp, 1]
                        wb = stack_w[sp, 2]
                        depth = stack_depth[sp]
                        t, obj, nx, ny, nz = scene_hit(
                            node_min, node_max, node_left, node_right,
                            node_count, node_axis, node_off,
                            tri_p0, tri_e1, tri_e2, tri_off,
                            inv_rot[ts], pos[ts], scale,
                            ox, oy, oz, dx, dy, dz, T_MIN)
                        if obj < 0:
                            if depth == 0:
                                acc_r += bg[y, x, 0]
                                acc_g += bg[y, x, 1]
                                acc_b += bg[y, x, 2]
                            else:
                                er, eg, eb = sample_backdrop(
                                    bd, bd_half_w, bd_half_h, bd_dist,
                                    ox, oy, oz, dx, dy, dz)
                                acc_r += wr * er
                                acc_g += wg * eg
                                acc_b += wb * eb
                            continue
                        px = ox + t * dx
                        py = oy + t * dy
                        pz = oz + t * dz
                        cos_i = -(dx * nx + dy * ny + dz * nz)
                        if cos_i >= 0.0:
                            n1 = 1.0
                            n2 = ior[obj]
                        else:
                            nx = -nx
                            ny = -ny
                            nz = -nz
                            cos_i = -cos_i
                            n1 = ior[obj]
                            n2 = 1.0
                        mw = mat_w[obj]
                        g_term = (1.0 - mw) * gray * ambient
                        acc_r += wr * g_term
                        acc_g += wg * g_term
                        acc_b += wb * g_term
                        wr *= mw
                        wg *= mw
                        wb *= mw
                        refl = fresnel_reflectance(cos_i, n1, n2)
                        nd = depth + 1
                        # reflection branch
                        rdx = dx + 2.0 * cos_i * nx
                        rdy = dy + 2.0 * cos_i * ny
                        rdz = dz + 2.0 * cos_i * nz
                        swr = wr * refl
                        swg = wg * refl
                        swb = wb * refl
                        if nd >= max_depth or max(swr, swg, swb) < cutoff:
                            er, eg, eb = sample_backdrop(
                                bd, bd_half_w, bd_half_h, bd_dist,
                                px, py, pz, rdx, rdy, rdz)
                            acc_r += swr * er
                            acc_g += swg * eg
                            acc_b += swb * eb
                        else:
                            stack_o[sp, 0] = px + eps * nx
                            stack_o[sp, 1] = py + eps * ny
                            stack_o[sp, 2] = pz + eps * nz
                            stack_d[sp, 0] = rdx
                            stack_d[sp, 1] = rdy
                            stack_d[sp, 2] = rdz
                            stack_w[sp, 0] = swr
                            stack_w[sp, 1] = swg
                            stack_w[sp, 2] = swb
                            stack_depth[sp] = nd
                            sp += 1
                        # refraction branch
                        if refl < 1.0:
                            tdx, tdy, tdz = refract_dir(
                                dx, dy, dz, nx, ny, nz, n1 / n2, cos_i)
                            trans = 1.0 - refl
                            twr = wr * trans * tint[obj, 0]
                            twg = wg * trans * tint[obj, 1]
                            twb = wb * trans * tint[obj, 2]
                            if nd >= max_depth or max(twr, twg, twb) < cutoff:
                                er, eg, eb = sample_backdrop(
                                    bd, bd_half_w, bd_half_h, bd_dist,
                                    px, py, pz, tdx, tdy, tdz)
                                acc_r += twr * er
                                acc_g += twg * eg
                                acc_b += twb * eb
                            else:
                                stack_o[sp, 0] = px - eps * nx
                                stack_o[sp, 1] = py - eps * ny
                                stack_o[sp, 2] = pz - eps * nz
                                stack_d[sp, 0] = tdx
                                stack_d[sp, 1] = tdy
                                stack_d[sp, 2] = tdz
                                stack_w[sp, 0] = twr
                                stack_w[sp, 1] = twg
                                stack_w[sp, 2] = twb
                                stack_depth[sp] = nd
                                sp += 1
            out[y, x, 0] = acc_r * inv_n
            out[y, x, 1] = acc_g * inv_n
            out[y, x, 2] = acc_b * inv_n
    return out


@jit
def mask_frame_kernel(h, w, tan_half, aspect,
                      node_min, node_max, node_left, node_right,
                      node_count, node_axis, node_off,
                      tri_p0, tri_e1, tri_e2, tri_off,
                      inv_rot, pos, scale):
    """Visible-object id per pixel from one center ray at the frame pose:
    -1 background, otherwise the index of the nearest object."""
    out = np.full((h, w), -1, np.int8)
    for y in range(h):
        for x in range(w):
            ndc_x = ((x + 0.5) / w) * 2.0 - 1.0
            ndc_y = 1.0 - ((y + 0.5) / h) * 2.0
            cdx = ndc_x * tan_half * aspect
            cdy = ndc_y * tan_half
            inv_len = 1.0 / math.sqrt(cdx * cdx + cdy * cdy + 1.0)
            t, obj, nx, ny, nz = scene_hit(
                node_min, node_max, node_left, node_right,
                node_count, node_axis, node_off,
                tri_p0, tri_e1, tri_e2, tri_off,
                inv_rot, pos, scale,
                0.0, 0.0, 0.0,
                cdx * inv_len, cdy * inv_len, -inv_len, T_MIN)
            if obj >= 0:
                out[y, x] = obj
    return out
