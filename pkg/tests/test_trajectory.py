import numpy as np
import pytest

from glasstrack import trajectory as tj


CP = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [2.0, 1.0, 1.0]])


def test_spline_interpolates_control_points_at_knots():
    sp = tj.catmull_rom(CP)
    for k, t in enumerate([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]):
        assert np.allclose(tj.eval_spline(sp, t), CP[k], atol=1e-12)


def test_spline_endpoints_exact():
    sp = tj.catmull_rom(CP)
    assert np.array_equal(tj.eval_spline(sp, 0.0), CP[0])
    assert np.array_equal(tj.eval_spline(sp, 1.0), CP[3])


def test_hermite_midpoint_value():
    # hand-evaluated: segment 1 at s=0.5, basis (0.5, 0.125, 0.5, -0.125),
    # tangents t1=(0.5,0.5,0), t2=(0.5,0.5,0.5) give (1.0, 0.5, -0.0625)
    sp = tj.catmull_rom(CP)
    mid = tj.eval_spline(sp, 0.5)
    assert np.allclose(mid, [1.0, 0.5, -0.0625], atol=1e-15)


def test_eval_many_matches_scalar():
    sp = tj.catmull_rom(CP)
    ts = np.linspace(0.0, 1.0, 37)
    many = tj.eval_spline_many(sp, ts)
    for t, row in zip(ts, many):
        assert np.array_equal(row, tj.eval_spline(sp, t))


def test_spline_continuity_across_knots():
    sp = tj.catmull_rom(CP)
    for knot in (1.0 / 3.0, 2.0 / 3.0):
        lo = tj.eval_spline(sp, knot - 1e-9)
        hi = tj.eval_spline(sp, knot + 1e-9)
        assert np.linalg.norm(hi - lo) < 1e-7


def test_parameter_bounds_enforced():
    sp = tj.catmull_rom(CP)
    with pytest.raises(ValueError):
        tj.eval_spline(sp, -0.01)
    with pytest.raises(ValueError):
        tj.eval_spline(sp, 1.01)
    with pytest.raises(ValueError):
        tj.eval_spline_many(sp, np.array([0.0, 1.2]))
    with pytest.raises(ValueError):
        tj.arc_params(sp, [-0.1])


def test_control_point_validation():
    with pytest.raises(ValueError):
        tj.catmull_rom(np.zeros((3, 3)))
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        tj.sample_control_points(rng, (np.zeros(3), np.zeros(3)))


def test_sampled_control_points_inside_region():
    rng = np.random.default_rng(7)
    lo = np.array([-2.0, -1.0, 3.0])
    hi = np.array([2.0, 1.0, 5.0])
    for _ in range(20):
        pts = tj.sample_control_points(rng, (lo, hi))
        assert pts.shape == (4, 3)
        assert (pts >= lo).all() and (pts <= hi).all()


def test_arc_table_monotone():
    sp = tj.catmull_rom(CP)
    ts, cum = tj.arc_length_table(sp)
    assert ts[0] == 0.0 and ts[-1] == 1.0
    assert (np.diff(ts) > 0).all()
    assert (np.diff(cum) >= 0).all()


def test_constant_speed_endpoints_exact():
    sp = tj.catmull_rom(CP)
    track = tj.constant_speed_track(sp, 9)
    assert np.array_equal(track[0], CP[0])
    assert np.array_equal(track[-1], CP[3])


def test_constant_speed_arc_steps_uniform():
    # equal *arc length* per step, checked against a dense chord integration
    # that is independent of the adaptive table
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(15):
        sp = tj.catmull_rom(rng.uniform(-1.0, 1.0, size=(4, 3)))
        params = tj.arc_params(sp, np.arange(25) / 24.0)
        dense_t = np.linspace(0.0, 1.0, 20001)
        pts = tj.eval_spline_many(sp, dense_t)
        dense_cum = np.concatenate(
            [[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))]
        )
        arcs = np.interp(params, dense_t, dense_cum)
        steps = np.diff(arcs)
        spread = (steps.max() - steps.min()) / steps.mean()
        worst = max(worst, spread)
    assert worst <= 1e-3, f"arc-step spread {worst:.2e}"


def test_track_needs_two_frames():
    sp = tj.catmull_rom(CP)
    with pytest.raises(ValueError):
        tj.constant_speed_track(sp, 1)


def test_quat_identity_and_matrix():
    assert np.array_equal(tj.quat_to_matrix(tj.IDENTITY_QUAT), np.eye(3))
    q = tj.quat_from_axis_angle([0.0, 0.0, 1.0], np.pi / 2)
    r = tj.quat_to_matrix(q)
    assert np.allclose(r @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-15)


def test_quat_mul_composes_rotations():
    a = tj.quat_from_axis_angle([0.0, 0.0, 1.0], 0.3)
    b = tj.quat_from_axis_angle([0.0, 0.0, 1.0], 0.5)
    ab = tj.quat_mul(a, b)
    expect = tj.quat_from_axis_angle([0.0, 0.0, 1.0], 0.8)
    assert np.allclose(ab, expect, atol=1e-12)


def test_quat_to_matrix_is_rotation():
    rng = np.random.default_rng(3)
    for _ in range(10):
        q = rng.normal(size=4)
        r = tj.quat_to_matrix(q)
        assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert np.isclose(np.linalg.det(r), 1.0, atol=1e-12)


def test_slerp_endpoints_and_midpoint():
    a = tj.IDENTITY_QUAT
    b = tj.quat_from_axis_angle([1.0, 0.0, 0.0], 1.0)
    assert np.allclose(tj.quat_slerp(a, b, 0.0), a, atol=1e-15)
    assert np.allclose(tj.quat_slerp(a, b, 1.0), b, atol=1e-15)
    mid = tj.quat_slerp(a, b, 0.5)
    expect = tj.quat_from_axis_angle([1.0, 0.0, 0.0], 0.5)
    assert np.allclose(mid, expect, atol=1e-12)


def test_slerp_takes_short_path():
    a = tj.quat_from_axis_angle([0.0, 1.0, 0.0], 0.2)
    b = -tj.quat_from_axis_angle([0.0, 1.0, 0.0], 0.4)  # same rotation, flipped
    mid = tj.quat_slerp(a, b, 0.5)
    expect = tj.quat_from_axis_angle([0.0, 1.0, 0.0], 0.3)
    assert min(np.linalg.norm(mid - expect), np.linalg.norm(mid + expect)) < 1e-12


def test_orientation_track_accumulates_exactly():
    # 10 frames at 5.4 deg/frame: frame 10 is 54 degrees about the axis
    axis = np.array([0.0, 1.0, 0.0])
    track = tj.orientation_track(axis, 5.4, 11)
    assert np.array_equal(track[0], tj.IDENTITY_QUAT)
    expect = tj.quat_from_axis_angle(axis, np.deg2rad(54.0))
    assert np.allclose(track[10], expect, atol=1e-9)
    for q in track:
        assert abs(np.linalg.norm(q) - 1.0) < 1e-12


def test_orientation_track_rejects_non_unit_axis():
    with pytest.raises(ValueError):
        tj.orientation_track([0.0, 2.0, 0.0], 1.0, 5)


def test_orientation_track_zero_speed_is_constant():
    track = tj.orientation_track([0.0, 0.0, 1.0], 0.0, 7)
    for q in track:
        assert np.array_equal(q, tj.IDENTITY_QUAT)
