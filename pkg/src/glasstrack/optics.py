"""Dielectric interface math (vectorized reference) and the material model
constants shared by the planner and the renderer.

The compiled kernels carry scalar twins of these functions; tests hold the
two implementations together.
"""

import numpy as np

IOR_GLASS = 1.5

# material weight per transparency level: fraction of energy that continues
# through the interface (the rest is extracted as a flat gray response)
TRANSPARENCY_WEIGHTS = {1: 0.55, 2: 0.75, 3: 0.90, 4: 0.99}

GRAY_ALBEDO = 0.5
AMBIENT = 1.0


def fresnel_reflectance(cos_i, n1, n2):
    """Exact unpolarized reflectance; 1.0 under total internal reflection.

    cos_i is the cosine of the incidence angle, any broadcastable shape.
    """
    cos_i = np.asarray(cos_i, dtype=np.float64)
    ratio = np.asarray(n1, dtype=np.float64) / n2
    sin_t2 = ratio * ratio * (1.0 - cos_i * cos_i)
    tir = sin_t2 >= 1.0
    cos_t = np.sqrt(np.clip(1.0 - sin_t2, 0.0, None))
    # denominators vanish only at grazing TIR, where the result is 1 anyway
    den_s = n1 * cos_i + n2 * cos_t
    den_p = n1 * cos_t + n2 * cos_i
    rs = (n1 * cos_i - n2 * cos_t) / np.where(den_s > 0.0, den_s, 1.0)
    rp = (n1 * cos_t - n2 * cos_i) / np.where(den_p > 0.0, den_p, 1.0)
    r = 0.5 * (rs * rs + rp * rp)
    out = np.where(tir, 1.0, r)
    return float(out) if out.ndim == 0 else out


def reflect(direction, normal):
    d = np.asarray(direction, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    return d - 2.0 * np.sum(d * n, axis=-1, keepdims=True) * n


def refract(direction, normal, n1, n2):
    """Refracted unit direction through an interface whose unit normal faces
    the incoming side (dot(d, n) <= 0).

    Returns (directions, valid): valid is False where total internal
    reflection occurs (those directions are not meaningful).
    """
    d = np.asarray(direction, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    cos_i = -np.sum(d * n, axis=-1)
    eta = n1 / n2
    sin_t2 = eta * eta * (1.0 - cos_i * cos_i)
    valid = sin_t2 < 1.0
    cos_t = np.sqrt(np.clip(1.0 - sin_t2, 0.0, None))
    t = eta * d + (eta * cos_i - cos_t)[..., None] * n
    norm = np.linalg.norm(t, axis=-1, keepdims=True)
    t = t / np.where(norm > 0.0, norm, 1.0)
    if t.ndim == 1:
        return t, bool(valid)
    return t, valid


def critical_angle(n1, n2):
    """Incidence angle (radians) beyond which TIR occurs, for n1 > n2."""
    if n1 <= n2:
        raise ValueError("TIR needs the denser medium on the incoming side")
    return float(np.arcsin(n2 / n1))
