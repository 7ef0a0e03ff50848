"""World-space motion: interpolating cubic splines sampled at constant speed,
and constant-angular-velocity orientation tracks.

The curve is a piecewise cubic Hermite spline through four control points
(Catmull-Rom tangents inside, one-sided differences at the ends, uniform
knots). Arc length comes from adaptive chord subdivision; positions are then
read off at equal arc-length increments so on-screen speed is constant.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Spline:
    control_points: np.ndarray  # (4, 3)
    tangents: np.ndarray        # (4, 3), in per-segment parameter units


def catmull_rom(points) -> Spline:
    pts = np.array(points, dtype=np.float64)
    if pts.shape != (4, 3):
        raise ValueError(f"expected 4 control points in 3D, got shape {pts.shape}")
    tan = np.empty_like(pts)
    tan[0] = pts[1] - pts[0]
    tan[1] = 0.5 * (pts[2] - pts[0])
    tan[2] = 0.5 * (pts[3] - pts[1])
    tan[3] = pts[3] - pts[2]
    return Spline(pts, tan)


def eval_spline(spline: Spline, t: float) -> np.ndarray:
    if t < 0.0 or t > 1.0:
        raise ValueError(f"spline parameter {t} outside [0, 1]")
    u = t * 3.0
    seg = min(int(u), 2)
    s = u - seg
    return _hermite(spline, seg, s)


def _hermite(spline, seg, s):
    h00 = (2.0 * s - 3.0) * s * s + 1.0
    h10 = ((s - 2.0) * s + 1.0) * s
    h01 = (3.0 - 2.0 * s) * s * s
    h11 = (s - 1.0) * s * s
    cp, tan = spline.control_points, spline.tangents
    return h00 * cp[seg] + h10 * tan[seg] + h01 * cp[seg + 1] + h11 * tan[seg + 1]


def eval_spline_many(spline: Spline, ts: np.ndarray) -> np.ndarray:
    ts = np.asarray(ts, dtype=np.float64)
    if ts.size and (ts.min() < 0.0 or ts.max() > 1.0):
        raise ValueError("spline parameters outside [0, 1]")
    u = ts * 3.0
    seg = np.minimum(u.astype(np.int64), 2)
    s = u - seg
    h00 = (2.0 * s - 3.0) * s * s + 1.0
    h10 = ((s - 2.0) * s + 1.0) * s
    h01 = (3.0 - 2.0 * s) * s * s
    h11 = (s - 1.0) * s * s
    cp, tan = spline.control_points, spline.tangents
    return (
        h00[:, None] * cp[seg]
        + h10[:, None] * tan[seg]
        + h01[:, None] * cp[seg + 1]
        + h11[:, None] * tan[seg + 1]
    )


def sample_control_points(rng: np.random.Generator, region) -> np.ndarray:
    """Four i.i.d. uniform points inside an axis-aligned box (lo, hi)."""
    lo = np.asarray(region[0], dtype=np.float64)
    hi = np.asarray(region[1], dtype=np.float64)
    if lo.shape != (3,) or hi.shape != (3,):
        raise ValueError("region must be a pair of 3-vectors")
    if np.any(hi <= lo):
        raise ValueError("degenerate safe region (zero volume)")
    return rng.uniform(lo, hi, size=(4, 3))


def arc_length_table(spline: Spline, rel_tol: float = 1e-4, max_depth: int = 22):
    """Cumulative arc length at adaptively refined parameter knots.

    Returns (ts, cumulative) with ts[0]=0, ts[-1]=1. A piece is accepted when
    splitting it changes its chord length by less than rel_tol relative to
    the refined estimate; a minimum depth keeps the table dense enough for
    the linear inverse lookup.
    """
    ts = [0.0]
    lens = [0.0]

    def refine(t0, p0, t1, p1, depth):
        tm = 0.5 * (t0 + t1)
        pm = eval_spline(spline, tm)
        c = np.linalg.norm(p1 - p0)
        c2 = np.linalg.norm(pm - p0) + np.linalg.norm(p1 - pm)
        if depth >= max_depth or (depth >= 8 and c2 - c <= rel_tol * c2):
            ts.append(tm)
            lens.append(np.linalg.norm(pm - p0))
            ts.append(t1)
            lens.append(np.linalg.norm(p1 - pm))
            return
        refine(t0, p0, tm, pm, depth + 1)
        refine(tm, pm, t1, p1, depth + 1)

    prev_t, prev_p = 0.0, spline.control_points[0]
    for knot in (1.0 / 3.0, 2.0 / 3.0, 1.0):
        pk = eval_spline(spline, knot)
        refine(prev_t, prev_p, knot, pk, 0)
        prev_t, prev_p = knot, pk
    return np.asarray(ts), np.cumsum(lens)


def arc_params(spline: Spline, fractions) -> np.ndarray:
    """Curve parameters at the given fractions of total arc length."""
    fr = np.asarray(fractions, dtype=np.float64)
    if fr.size and (fr.min() < 0.0 or fr.max() > 1.0):
        raise ValueError("arc-length fractions outside [0, 1]")
    ts, cum = arc_length_table(spline)
    targets = cum[-1] * fr
    idx = np.clip(np.searchsorted(cum, targets, side="left"), 1, len(cum) - 1)
    seg = cum[idx] - cum[idx - 1]
    safe = np.where(seg > 0, seg, 1.0)
    frac = np.where(seg > 0, (targets - cum[idx - 1]) / safe, 0.0)
    params = ts[idx - 1] + frac * (ts[idx] - ts[idx - 1])
    params[fr <= 0.0] = 0.0
    params[fr >= 1.0] = 1.0
    return np.clip(params, 0.0, 1.0)


def arc_positions(spline: Spline, fractions) -> np.ndarray:
    """Positions at the given fractions of total arc length, each in [0, 1].

    Fractions of exactly 0 or 1 map to the endpoint control points exactly.
    """
    return eval_spline_many(spline, arc_params(spline, fractions))


def constant_speed_track(spline: Spline, n_frames: int) -> np.ndarray:
    """Positions at equal arc-length steps, endpoints exact."""
    if n_frames < 2:
        raise ValueError("need at least 2 frames for a track")
    return arc_positions(spline, np.arange(n_frames) / (n_frames - 1))


# ---------------------------------------------------------------------------
# quaternions (w, x, y, z)

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_from_axis_angle(axis, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    half = 0.5 * angle_rad
    return np.concatenate(([np.cos(half)], np.sin(half) * axis))


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_slerp(a, b, u: float) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dot = float(np.dot(a, b))
    if dot < 0.0:
        b, dot = -b, -dot
    if dot > 1.0 - 1e-10:
        q = a + u * (b - a)
        return q / np.linalg.norm(q)
    theta = np.arccos(min(dot, 1.0))
    sin_t = np.sin(theta)
    q = (np.sin((1.0 - u) * theta) / sin_t) * a + (np.sin(u * theta) / sin_t) * b
    return q / np.linalg.norm(q)


def orientation_track(axis, speed_deg_per_frame: float, n_frames: int,
                      initial=None) -> np.ndarray:
    """Unit quaternions (n_frames, 4): frame k rotated k*speed about axis.

    Each frame's rotation is built directly from the accumulated angle, so
    there is no numerical drift from repeated composition.
    """
    axis = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(axis)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError("rotation axis must be a unit vector")
    q0 = IDENTITY_QUAT if initial is None else np.asarray(initial, dtype=np.float64)
    out = np.empty((n_frames, 4))
    for k in range(n_frames):
        step = quat_from_axis_angle(axis, np.deg2rad(speed_deg_per_frame * k))
        out[k] = quat_mul(step, q0)
    return out
