import numpy as np
import pytest

from glasstrack import kernels, optics


def test_normal_incidence_reflectance():
    # air to glass at normal incidence: ((n2-n1)/(n2+n1))^2 = 0.04
    r = optics.fresnel_reflectance(1.0, 1.0, 1.5)
    assert abs(r - 0.04) <= 1e-12


def test_grazing_incidence_approaches_one():
    r = optics.fresnel_reflectance(1e-8, 1.0, 1.5)
    assert r > 0.999


def test_tir_reflectance_is_exactly_one():
    crit = optics.critical_angle(1.5, 1.0)
    cos_i = np.cos(crit + 0.01)
    assert optics.fresnel_reflectance(cos_i, 1.5, 1.0) == 1.0


def test_reflectance_monotone_in_angle():
    angles = np.linspace(0.0, np.pi / 2 - 1e-6, 200)
    r = optics.fresnel_reflectance(np.cos(angles), 1.0, 1.5)
    assert (np.diff(r) >= -1e-15).all()
    assert r[0] < r[-1]


def test_reflectance_reciprocity():
    # R(theta_i; n1->n2) equals R(theta_t; n2->n1) by Snell symmetry
    rng = np.random.default_rng(4)
    for _ in range(50):
        theta_i = rng.uniform(0.0, np.pi / 2 - 0.05)
        sin_t = np.sin(theta_i) / 1.5
        theta_t = np.arcsin(sin_t)
        r_fwd = optics.fresnel_reflectance(np.cos(theta_i), 1.0, 1.5)
        r_bwd = optics.fresnel_reflectance(np.cos(theta_t), 1.5, 1.0)
        assert abs(r_fwd - r_bwd) < 1e-9


def test_reflectance_vectorized_matches_scalar():
    cos_i = np.linspace(0.01, 1.0, 17)
    vec = optics.fresnel_reflectance(cos_i, 1.0, 1.5)
    for c, r in zip(cos_i, vec):
        assert r == optics.fresnel_reflectance(float(c), 1.0, 1.5)


def test_kernel_fresnel_matches_reference():
    cos_i = np.linspace(0.0, 1.0, 101)
    for c in cos_i:
        ref = optics.fresnel_reflectance(float(c), 1.0, 1.5)
        ker = kernels.fresnel_reflectance(float(c), 1.0, 1.5)
        assert abs(ref - ker) < 1e-15
    # and on the dense-to-thin side, including the TIR region
    for c in cos_i:
        ref = optics.fresnel_reflectance(float(c), 1.5, 1.0)
        ker = kernels.fresnel_reflectance(float(c), 1.5, 1.0)
        assert abs(ref - ker) < 1e-15


def test_reflect_mirrors_about_normal():
    d = np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0)
    n = np.array([0.0, 1.0, 0.0])
    out = optics.reflect(d, n)
    assert np.allclose(out, [1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0), 0.0], atol=1e-15)
    # energy preserved
    assert np.isclose(np.linalg.norm(out), 1.0, atol=1e-15)


def test_refract_normal_incidence_straight_through():
    d = np.array([0.0, 0.0, -1.0])
    n = np.array([0.0, 0.0, 1.0])
    t, valid = optics.refract(d, n, 1.0, 1.5)
    assert valid
    assert np.allclose(t, d, atol=1e-15)


def test_refract_snells_law():
    rng = np.random.default_rng(8)
    n = np.array([0.0, 0.0, 1.0])
    for _ in range(30):
        theta_i = rng.uniform(0.01, np.pi / 2 - 0.01)
        d = np.array([np.sin(theta_i), 0.0, -np.cos(theta_i)])
        t, valid = optics.refract(d, n, 1.0, 1.5)
        assert valid
        sin_t = np.linalg.norm(np.cross(t, -n))
        assert abs(np.sin(theta_i) - 1.5 * sin_t) < 1e-12
        assert np.isclose(np.linalg.norm(t), 1.0, atol=1e-12)


def test_refract_flags_tir():
    crit = optics.critical_angle(1.5, 1.0)
    theta = crit + 0.05
    d = np.array([np.sin(theta), 0.0, -np.cos(theta)])
    n = np.array([0.0, 0.0, 1.0])
    _, valid = optics.refract(d, n, 1.5, 1.0)
    assert not valid


def test_kernel_refract_matches_reference():
    rng = np.random.default_rng(12)
    n = np.array([0.0, 0.0, 1.0])
    for _ in range(30):
        theta_i = rng.uniform(0.01, np.pi / 2 - 0.01)
        d = np.array([np.sin(theta_i), 0.0, -np.cos(theta_i)])
        ref, valid = optics.refract(d, n, 1.0, 1.5)
        assert valid
        # kernel variant takes eta and cos_i; TIR is the caller's problem
        kx, ky, kz = kernels.refract_dir(
            d[0], d[1], d[2], n[0], n[1], n[2], 1.0 / 1.5, np.cos(theta_i))
        assert np.allclose([kx, ky, kz], ref, atol=1e-12)


def test_critical_angle_glass_air():
    crit = optics.critical_angle(1.5, 1.0)
    assert abs(crit - np.arcsin(2.0 / 3.0)) < 1e-15
    with pytest.raises(ValueError):
        optics.critical_angle(1.0, 1.5)


def test_transparency_weights_table():
    assert optics.TRANSPARENCY_WEIGHTS == {1: 0.55, 2: 0.75, 3: 0.90, 4: 0.99}
    assert optics.IOR_GLASS == 1.5
