import dataclasses
import json
import os

import numpy as np
import pytest

from glasstrack import geometry as geo
from glasstrack import imgio, primitives, render, trajectory
from glasstrack.annotate import read_boxes
from glasstrack.errors import GlasstrackError
from glasstrack.seqplan import SequenceConfig


def make_config(**overrides):
    base = dict(
        seq_id="seq_test",
        seed=41,
        width=96,
        height=54,
        n_frames=4,
        spp=1,
        background="clip_0000",
        object_type="cube",
        hollow=False,
        tint=(0.95, 0.97, 1.0),
        transparency=3,
        blur=0,
        occlusion=0,
        rotation=5.4,
        rotation_axis=(0.0, 1.0, 0.0),
        scale_fraction=0.25,
        control_points=(
            (-1.2, -0.5, -4.0),
            (-0.4, 0.3, -3.6),
            (0.4, -0.3, -4.4),
            (1.2, 0.5, -4.0),
        ),
        distractor=False,
        distractor_type="sphere",
        distractor_scale_fraction=0.2,
        distractor_angle=0.7,
        distractor_axis=(1.0, 0.0, 0.0),
    )
    base.update(overrides)
    return SequenceConfig(**base)


def single_object_scene(camera, weight=0.75, tint=None, kind="sphere",
                        hollow=True, scale=0.5):
    mesh = primitives.make_mesh(kind, hollow=hollow)
    obj = render.SceneObject(
        bvh=geo.build_bvh(mesh),
        positions=np.array([[0.0, 0.0, -4.0]]),
        quats=np.array([trajectory.IDENTITY_QUAT]),
        scale=scale,
        weight=weight,
        tint=np.ones(3) if tint is None else np.asarray(tint, dtype=float),
    )
    return render.flatten_scene([obj])


# ---------------------------------------------------------------------------
# camera and framing

def test_camera_validation():
    with pytest.raises(GlasstrackError):
        render.Camera(8, 360)
    with pytest.raises(GlasstrackError):
        render.Camera(640, 8)
    with pytest.raises(GlasstrackError):
        render.Camera(640, 360, fov_deg=5.0)
    with pytest.raises(GlasstrackError):
        render.Camera(640, 360, fov_deg=150.0)


def test_camera_derived_quantities():
    cam = render.Camera(640, 360, 55.0)
    assert np.isclose(cam.tan_half, np.tan(np.deg2rad(27.5)), atol=1e-15)
    assert np.isclose(cam.aspect, 640.0 / 360.0, atol=1e-15)


def test_world_radius_formula():
    cam = render.Camera(640, 360, 55.0)
    # projected diameter of the bounding sphere covers scale_fraction of the
    # short side at the mid depth
    r = render.world_radius(cam, 0.2)
    assert np.isclose(r, 0.2 * 360 * 4.0 * cam.tan_half / 360, atol=1e-15)
    # at that depth the projection back to pixels recovers the fraction
    px = r / (4.0 * cam.tan_half) * cam.height
    assert np.isclose(px / min(cam.width, cam.height), 0.2, atol=1e-15)


def test_safe_region_keeps_sphere_in_view():
    cam = render.Camera(320, 180, 55.0)
    r = render.world_radius(cam, 0.3)
    lo, hi = render.safe_region(cam, r)
    assert (lo < hi).all()
    assert hi[2] == -3.2 and lo[2] == -4.8
    # a sphere centered at any corner stays inside the near-plane frustum
    half_h = 3.2 * cam.tan_half
    half_w = half_h * cam.aspect
    assert hi[0] + r <= half_w
    assert hi[1] + r <= half_h


def test_safe_region_rejects_oversized_object():
    cam = render.Camera(320, 180, 55.0)
    with pytest.raises(GlasstrackError):
        render.safe_region(cam, radius=100.0)


# ---------------------------------------------------------------------------
# jitter

def test_jitter_single_sample_is_pixel_center():
    jit = render.sample_jitter(7, 0, 5, 6, 1)
    assert jit.shape == (5, 6, 1, 2)
    assert (jit == 0.5).all()


def test_jitter_stratified_within_cells():
    jit = render.sample_jitter(7, 3, 4, 4, 4)
    assert jit.shape == (4, 4, 4, 2)
    assert (jit >= 0.0).all() and (jit < 1.0).all()
    for s in range(4):
        cx, cy = s % 2, s // 2
        assert (jit[..., s, 0] >= cx / 2).all() and (jit[..., s, 0] < (cx + 1) / 2).all()
        assert (jit[..., s, 1] >= cy / 2).all() and (jit[..., s, 1] < (cy + 1) / 2).all()


def test_jitter_deterministic_and_frame_dependent():
    a = render.sample_jitter(7, 2, 6, 8, 9)
    b = render.sample_jitter(7, 2, 6, 8, 9)
    c = render.sample_jitter(7, 3, 6, 8, 9)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_jitter_rejects_non_square_spp():
    with pytest.raises(GlasstrackError):
        render.sample_jitter(7, 0, 4, 4, 3)
    with pytest.raises(GlasstrackError):
        render.sample_jitter(7, 0, 4, 4, 0)


# ---------------------------------------------------------------------------
# radiance properties

def test_uniform_environment_invariance_clear_material():
    # a fully transmissive interface (weight 1, no tint) in a uniform
    # environment must leave every pixel at the environment value
    cam = render.Camera(64, 36, 55.0)
    flat = single_object_scene(cam, weight=1.0)
    bg = np.full((36, 64, 3), 0.6)
    backdrop = render.make_backdrop(bg, cam)
    img = render.render_frame(flat, cam, backdrop, bg, 0, 4, 0.0, 11)
    assert np.abs(img - 0.6).max() < 1e-12


def test_uniform_environment_near_invariance_strong_material():
    cam = render.Camera(64, 36, 55.0)
    flat = single_object_scene(cam, weight=0.99)
    bg = np.full((36, 64, 3), 0.6)
    backdrop = render.make_backdrop(bg, cam)
    img = render.render_frame(flat, cam, backdrop, bg, 0, 4, 0.0, 11)
    assert np.abs(img - 0.6).max() < 2e-2


def test_radiance_in_unit_range():
    cam = render.Camera(64, 36, 55.0)
    flat = single_object_scene(cam, weight=0.55, tint=(0.85, 0.9, 1.0))
    rng = np.random.default_rng(1)
    bg = rng.random((36, 64, 3))
    backdrop = render.make_backdrop(bg, cam)
    img = render.render_frame(flat, cam, backdrop, bg, 0, 4, 0.0, 11)
    assert (img >= 0.0).all() and (img <= 1.0).all()


def test_background_passthrough_single_sample():
    # with one sample per pixel the primary ray is the mask ray, so every
    # pixel off the silhouette carries the source background byte for byte
    cam = render.Camera(64, 36, 55.0)
    flat = single_object_scene(cam, weight=0.75, tint=(0.9, 0.95, 1.0))
    rng = np.random.default_rng(2)
    bg_u8 = rng.integers(0, 256, size=(36, 64, 3), dtype=np.uint8)
    bg = bg_u8.astype(np.float64) / 255.0
    backdrop = render.make_backdrop(bg, cam)
    img = render.render_frame(flat, cam, backdrop, bg, 0, 1, 0.0, 11)
    frame_u8 = render.to_uint8(img)
    mask = render.mask_frame(flat, cam, 0) >= 0
    assert mask.any() and not mask.all()
    outside = ~mask
    assert np.array_equal(frame_u8[outside], bg_u8[outside])
    # and the silhouette really differs from the background
    assert (frame_u8[mask] != bg_u8[mask]).any()


def test_multisample_diffs_confined_to_dilated_silhouette():
    cam = render.Camera(64, 36, 55.0)
    flat = single_object_scene(cam, weight=0.75, tint=(0.9, 0.95, 1.0))
    rng = np.random.default_rng(3)
    bg_u8 = rng.integers(0, 256, size=(36, 64, 3), dtype=np.uint8)
    bg = bg_u8.astype(np.float64) / 255.0
    backdrop = render.make_backdrop(bg, cam)
    img = render.render_frame(flat, cam, backdrop, bg, 0, 16, 0.0, 11)
    frame_u8 = render.to_uint8(img)
    mask = render.mask_frame(flat, cam, 0) >= 0
    dilated = mask.copy()
    m = mask
    dilated[1:, :] |= m[:-1, :]
    dilated[:-1, :] |= m[1:, :]
    dilated[:, 1:] |= m[:, :-1]
    dilated[:, :-1] |= m[:, 1:]
    diff = (frame_u8 != bg_u8).any(axis=2)
    assert not (diff & ~dilated).any()


def test_render_deterministic():
    cam = render.Camera(48, 27, 55.0)
    flat = single_object_scene(cam)
    rng = np.random.default_rng(4)
    bg = rng.random((27, 48, 3))
    backdrop = render.make_backdrop(bg, cam)
    a = render.render_frame(flat, cam, backdrop, bg, 0, 4, 0.5, 13)
    b = render.render_frame(flat, cam, backdrop, bg, 0, 4, 0.5, 13)
    assert np.array_equal(a, b)


def test_to_uint8_rounding_and_clipping():
    vals = np.array([[-0.2, 0.0, 0.5, 1.0, 1.3]])
    out = render.to_uint8(vals)
    assert out.tolist() == [[0, 0, 128, 255, 255]]


# ---------------------------------------------------------------------------
# poses and motion blur

def test_pose_arrays_exact_at_zero_shutter():
    cam = render.Camera(48, 27, 55.0)
    cfg = make_config(n_frames=5, rotation=10.6)
    objects = render.build_scene_objects(cfg, cam)
    inv_rot, pos = render.pose_arrays(objects, 2, 1, 0.0)
    assert inv_rot.shape == (1, 1, 3, 3)
    assert np.array_equal(pos[0, 0], objects[0].positions[2])
    expect = trajectory.quat_to_matrix(objects[0].quats[2]).T
    assert np.array_equal(inv_rot[0, 0], expect)


def test_pose_arrays_interpolates_toward_next_frame():
    cam = render.Camera(48, 27, 55.0)
    cfg = make_config(n_frames=5)
    objects = render.build_scene_objects(cfg, cam)
    inv_rot, pos = render.pose_arrays(objects, 1, 8, 1.0)
    p1, p2 = objects[0].positions[1], objects[0].positions[2]
    for s in range(8):
        u = (s + 0.5) / 8.0
        assert np.allclose(pos[s, 0], (1 - u) * p1 + u * p2, atol=1e-12)
    # samples advance monotonically along the segment
    d = np.diff(pos[:, 0, 0])
    assert (np.sign(d) == np.sign(d[0])).all()


def test_pose_arrays_clamps_last_frame():
    cam = render.Camera(48, 27, 55.0)
    cfg = make_config(n_frames=3)
    objects = render.build_scene_objects(cfg, cam)
    _, pos = render.pose_arrays(objects, 2, 8, 1.0)
    for s in range(8):
        assert np.array_equal(pos[s, 0], objects[0].positions[2])


def test_motion_blur_widens_silhouette_footprint():
    cam = render.Camera(96, 54, 55.0)
    cfg = make_config(width=96, height=54, n_frames=3, scale_fraction=0.22)
    objects = render.build_scene_objects(cfg, cam)
    flat = render.flatten_scene(objects)
    bg = np.full((54, 96, 3), 0.5)
    # make the object visibly darker than the background so coverage counts
    flat.mat_w[:] = 0.3
    backdrop = render.make_backdrop(bg, cam)
    sharp = render.render_frame(flat, cam, backdrop, bg, 0, 4, 0.0, 9)
    blurred = render.render_frame(flat, cam, backdrop, bg, 0, 4, 1.0, 9)
    touched_sharp = (np.abs(sharp - 0.5) > 1e-6).any(axis=2).sum()
    touched_blur = (np.abs(blurred - 0.5) > 1e-6).any(axis=2).sum()
    assert touched_blur > touched_sharp


# ---------------------------------------------------------------------------
# occluder stripes

def test_occluder_starts_drift():
    s0 = render.occluder_starts(640, 7, 0)
    s5 = render.occluder_starts(640, 7, 5)
    assert np.array_equal(s5, (s0 + 15) % 640)


def test_occluder_stripe_count_by_level():
    for stripes in (7, 11, 20):
        for frame in (0, 3, 57):
            mask = render.occluder_mask(640, 4, stripes, frame)
            assert render.count_column_runs(mask[0]) == stripes


def test_occluder_mask_zero_level_empty():
    assert not render.occluder_mask(640, 4, 0, 0).any()
    assert render.count_column_runs(np.zeros(10, dtype=bool)) == 0
    assert render.count_column_runs(np.ones(10, dtype=bool)) == 1


def test_count_column_runs_wraps_circularly():
    cols = np.zeros(12, dtype=bool)
    cols[[0, 1, 11]] = True  # one stripe spanning the wrap
    cols[5] = True
    assert render.count_column_runs(cols) == 2


def test_composite_occluder_writes_palette_bytes():
    img = np.zeros((6, 80, 3), dtype=np.uint8)
    out = render.composite_occluder(img, 7, 2)
    mask = render.occluder_mask(80, 6, 7, 2)
    assert (out[~mask] == 0).all()
    palette = {tuple(c) for c in render.OCCLUDER_PALETTE}
    seen = {tuple(px) for px in out[mask]}
    assert seen <= palette and len(seen) >= 6
    # original untouched
    assert (img == 0).all()


def test_composite_occluder_zero_is_identity():
    img = np.full((4, 50, 3), 9, dtype=np.uint8)
    assert render.composite_occluder(img, 0, 3) is img


# ---------------------------------------------------------------------------
# sequence assembly

def test_build_scene_objects_shapes_and_distractor():
    cam = render.Camera(96, 54, 55.0)
    cfg = make_config(distractor=True)
    objects = render.build_scene_objects(cfg, cam)
    assert len(objects) == 2
    target, distractor = objects
    assert target.positions.shape == (4, 3)
    assert distractor.positions.shape == (4, 3)
    # the distractor rides the target's path, delayed, with a constant
    # sideways offset of 1.25 x the summed shell radii
    from glasstrack.trajectory import arc_positions, catmull_rom
    spline = catmull_rom(np.asarray(cfg.control_points, dtype=float))
    lagged = arc_positions(spline, np.clip(np.arange(4) / 3.0 - 0.15, 0.0, 1.0))
    offset = distractor.positions - lagged
    assert np.allclose(offset, offset[0], atol=1e-12)
    assert offset[0, 2] == 0.0
    expect = 1.25 * (target.scale + distractor.scale)
    assert np.isclose(np.linalg.norm(offset[0]), expect, atol=1e-12)


def test_distractor_lags_target():
    cam = render.Camera(96, 54, 55.0)
    cfg = make_config(distractor=True, n_frames=8)
    target, distractor = render.build_scene_objects(cfg, cam)
    # early frames: distractor pinned at the path start (lag clamps to 0)
    assert np.allclose(distractor.positions[0], distractor.positions[1], atol=1e-12)


def test_validate_sequence_config_errors():
    good = make_config()
    render.validate_sequence_config(good, n_backgrounds=10)
    with pytest.raises(GlasstrackError):
        render.validate_sequence_config(make_config(n_frames=1), 10)
    with pytest.raises(GlasstrackError):
        render.validate_sequence_config(make_config(spp=3), 10)
    with pytest.raises(GlasstrackError):
        render.validate_sequence_config(good, n_backgrounds=2)
    with pytest.raises(GlasstrackError):
        render.validate_sequence_config(make_config(transparency=5), 10)
    with pytest.raises(GlasstrackError):
        render.validate_sequence_config(make_config(blur=9), 10)


def test_resolve_workers(monkeypatch):
    monkeypatch.delenv("GLASSTRACK_WORKERS", raising=False)
    assert render.resolve_workers(3) == 3
    assert render.resolve_workers() >= 1
    monkeypatch.setenv("GLASSTRACK_WORKERS", "2")
    assert render.resolve_workers() == 2
    with pytest.raises(GlasstrackError):
        render.resolve_workers(0)


def test_sequence_attributes_payload():
    cfg = make_config(occlusion=11, blur=2, distractor=True)
    attrs = render.sequence_attributes(cfg)
    assert attrs["seq_id"] == "seq_test"
    assert attrs["occlusion"] == 11
    assert attrs["blur"] == 2
    assert attrs["rotation"] == 5.4
    assert attrs["transparency"] == 3
    assert attrs["distractor"] is True


# ---------------------------------------------------------------------------
# full sequences on disk

@pytest.fixture(scope="module")
def rendered_seq(tmp_path_factory, bg_paths_factory):
    out = tmp_path_factory.mktemp("seqs")
    cfg = make_config(n_frames=4, occlusion=7, distractor=True)
    paths = bg_paths_factory("clip_0000", 4)
    seq_dir = render.render_sequence(cfg, paths, str(out), workers=2)
    return cfg, paths, seq_dir


def test_sequence_layout(rendered_seq):
    cfg, paths, seq_dir = rendered_seq
    for k in range(cfg.n_frames):
        assert os.path.exists(os.path.join(seq_dir, "frames", f"{k:06d}.ppm"))
        assert os.path.exists(os.path.join(seq_dir, "masks", "target", f"{k:06d}.pgm"))
        assert os.path.exists(
            os.path.join(seq_dir, "masks", "distractor", f"{k:06d}.pgm"))
    assert os.path.exists(os.path.join(seq_dir, "groundtruth.txt"))
    assert os.path.exists(os.path.join(seq_dir, "groundtruth_distractor.txt"))
    with open(os.path.join(seq_dir, "meta.json")) as fh:
        meta = json.load(fh)
    assert meta["complete"] is True
    with open(os.path.join(seq_dir, "attributes.json")) as fh:
        attrs = json.load(fh)
    assert attrs == render.sequence_attributes(cfg)


def test_sequence_groundtruth_matches_masks(rendered_seq):
    cfg, paths, seq_dir = rendered_seq
    from glasstrack.annotate import mask_to_bbox
    boxes = read_boxes(os.path.join(seq_dir, "groundtruth.txt"))
    assert len(boxes) == cfg.n_frames
    for k in range(cfg.n_frames):
        mask = imgio.read_pgm(
            os.path.join(seq_dir, "masks", "target", f"{k:06d}.pgm")) > 0
        assert boxes[k] == mask_to_bbox(mask)


def test_sequence_frames_contain_occluder(rendered_seq):
    cfg, paths, seq_dir = rendered_seq
    frame = imgio.read_ppm(os.path.join(seq_dir, "frames", "000001.ppm"))
    omask = render.occluder_mask(cfg.width, cfg.height, cfg.occlusion, 1)
    palette = {tuple(c) for c in render.OCCLUDER_PALETTE}
    seen = {tuple(px) for px in frame[omask]}
    assert seen <= palette


def test_sequence_resume_skips_complete(rendered_seq, tmp_path):
    cfg, paths, seq_dir = rendered_seq
    marker = os.path.join(seq_dir, "frames", "000000.ppm")
    before = os.path.getmtime(marker)
    again = render.render_sequence(cfg, paths, os.path.dirname(seq_dir), workers=1)
    assert again == seq_dir
    assert os.path.getmtime(marker) == before


def test_sequence_worker_count_invariant(bg_paths_factory, tmp_path):
    cfg = make_config(n_frames=3, occlusion=7, distractor=True, seq_id="wk")
    paths = bg_paths_factory("clip_0001", 3)
    d1 = render.render_sequence(cfg, paths, str(tmp_path / "a"), workers=1)
    d4 = render.render_sequence(cfg, paths, str(tmp_path / "b"), workers=4)
    for sub in ("frames/000000.ppm", "frames/000002.ppm",
                "masks/target/000001.pgm", "groundtruth.txt",
                "groundtruth_distractor.txt"):
        with open(os.path.join(d1, sub), "rb") as fh:
            a = fh.read()
        with open(os.path.join(d4, sub), "rb") as fh:
            b = fh.read()
        assert a == b, sub


def test_sequence_modal_masks_subtract_stripes(bg_paths_factory, tmp_path):
    cfg = make_config(n_frames=3, occlusion=20, scale_fraction=0.3,
                      seq_id="modal")
    paths = bg_paths_factory("clip_0002", 3)
    d_amodal = render.render_sequence(cfg, paths, str(tmp_path / "a"), workers=1)
    d_modal = render.render_sequence(cfg, paths, str(tmp_path / "b"),
                                     workers=1, modal_masks=True)
    shrunk = False
    for k in range(cfg.n_frames):
        am = imgio.read_pgm(
            os.path.join(d_amodal, "masks", "target", f"{k:06d}.pgm")) > 0
        mo = imgio.read_pgm(
            os.path.join(d_modal, "masks", "target", f"{k:06d}.pgm")) > 0
        assert not (mo & ~am).any()
        stripe = render.occluder_mask(cfg.width, cfg.height, cfg.occlusion, k)
        assert not (mo & stripe).any()
        if mo.sum() < am.sum():
            shrunk = True
    assert shrunk


def test_sequence_force_rerenders_identically(bg_paths_factory, tmp_path):
    cfg = make_config(n_frames=2, seq_id="force")
    paths = bg_paths_factory("clip_0003", 2)
    d = render.render_sequence(cfg, paths, str(tmp_path), workers=1)
    with open(os.path.join(d, "frames", "000001.ppm"), "rb") as fh:
        first = fh.read()
    render.render_sequence(cfg, paths, str(tmp_path), workers=1, force=True)
    with open(os.path.join(d, "frames", "000001.ppm"), "rb") as fh:
        second = fh.read()
    assert first == second


def test_sequence_passthrough_on_disk(bg_paths_factory, tmp_path):
    # spp 1, no blur, no occluder: every off-mask pixel equals the (resized)
    # source background byte for byte
    cfg = make_config(n_frames=2, spp=1, seq_id="pass")
    paths = bg_paths_factory("clip_0004", 2)
    d = render.render_sequence(cfg, paths, str(tmp_path), workers=1)
    for k in range(cfg.n_frames):
        frame = imgio.read_ppm(os.path.join(d, "frames", f"{k:06d}.ppm"))
        mask = imgio.read_pgm(
            os.path.join(d, "masks", "target", f"{k:06d}.pgm")) > 0
        src = imgio.resize_bilinear(imgio.read_ppm(paths[k]),
                                    cfg.width, cfg.height)
        assert np.array_equal(frame[~mask], src[~mask])
        assert mask.any()
