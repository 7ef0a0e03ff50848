"""Scene assembly and deterministic sequence rendering.

The camera sits at the origin looking down -z with a vertical field of view.
A sequence is rendered one frame at a time; frames are independent and all
per-sample randomness is hashed from (seed, frame, pixel, sample), so the
output is byte-identical for any worker count.

Per-frame products: the RGB frame (with the striped occluder composited on
top), a target segmentation mask traced at the exact frame pose with one
center ray per pixel (so masks ignore motion blur and the occluder), an
optional distractor mask, and a ground-truth box row per object.
"""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .annotate import format_bbox_line, mask_to_bbox
from .errors import GlasstrackError
from .geometry import BVH, build_bvh
from .imgio import read_ppm, resize_bilinear, write_pgm, write_ppm
from .optics import AMBIENT, GRAY_ALBEDO, IOR_GLASS, TRANSPARENCY_WEIGHTS
from .primitives import make_mesh
from .rng import counter_floats, derive_seed
from .trajectory import (
    arc_positions,
    catmull_rom,
    constant_speed_track,
    orientation_track,
    quat_slerp,
    quat_to_matrix,
)

FOV_DEG = 55.0
FOV_LIMITS = (10.0, 120.0)
DEPTH_RANGE = (3.2, 4.8)
BACKDROP_DISTANCE = 9.6
TEMPORAL_SAMPLES = 8
BLUR_SHUTTER = {0: 0.0, 1: 0.25, 2: 0.5, 3: 1.0}
SAFE_MARGIN = 0.02
EPS_OFFSET = 1e-4

OCCLUDER_SPEED = 3  # columns per frame
OCCLUDER_PALETTE = np.array(
    [
        [204, 51, 51],
        [51, 153, 204],
        [230, 194, 41],
        [64, 179, 102],
        [153, 102, 204],
        [230, 126, 34],
    ],
    dtype=np.uint8,
)

DISTRACTOR_LAG = 0.15    # fraction of total arc length
DISTRACTOR_GAP = 1.25    # lateral offset in units of summed radii


@dataclass(frozen=True)
class Camera:
    width: int
    height: int
    fov_deg: float = FOV_DEG

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise GlasstrackError("resolution must be at least 16x16")
        if not FOV_LIMITS[0] <= self.fov_deg <= FOV_LIMITS[1]:
            raise GlasstrackError(
                f"vertical fov {self.fov_deg} outside {FOV_LIMITS}"
            )

    @property
    def tan_half(self) -> float:
        return math.tan(math.radians(self.fov_deg) * 0.5)

    @property
    def aspect(self) -> float:
        return self.width / self.height


def world_radius(camera: Camera, scale_fraction: float,
                 depth: float = None) -> float:
    """World-space bounding radius whose projected diameter covers the given
    fraction of the short image side at the reference depth."""
    if depth is None:
        depth = 0.5 * (DEPTH_RANGE[0] + DEPTH_RANGE[1])
    px = scale_fraction * min(camera.width, camera.height)
    return px * depth * camera.tan_half / camera.height


def safe_region(camera: Camera, radius: float, depth_range=DEPTH_RANGE,
                margin: float = SAFE_MARGIN):
    """Camera-space box where a sphere of the given radius stays fully in
    view over the whole depth range (the near plane is the binding one)."""
    near, far = depth_range
    half_h = near * camera.tan_half
    half_w = half_h * camera.aspect
    hx = half_w * (1.0 - margin) - radius
    hy = half_h * (1.0 - margin) - radius
    if hx <= 0.0 or hy <= 0.0:
        raise GlasstrackError(
            f"object radius {radius:.3f} does not fit the view at depth {near}"
        )
    lo = np.array([-hx, -hy, -far])
    hi = np.array([hx, hy, -near])
    return lo, hi


@dataclass
class SceneObject:
    bvh: BVH
    positions: np.ndarray   # (n_frames, 3)
    quats: np.ndarray       # (n_frames, 4)
    scale: float
    weight: float           # energy passed through an interface
    tint: np.ndarray        # (3,) transmission filter
    ior: float = IOR_GLASS


@dataclass
class FlatScene:
    """Per-object hierarchies concatenated for the kernels; object i owns
    nodes node_off[i]:node_off[i+1] and triangles tri_off[i]:tri_off[i+1]."""
    objects: list
    node_min: np.ndarray
    node_max: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_count: np.ndarray
    node_axis: np.ndarray
    node_off: np.ndarray
    tri_p0: np.ndarray
    tri_e1: np.ndarray
    tri_e2: np.ndarray
    tri_off: np.ndarray
    scale: np.ndarray
    mat_w: np.ndarray
    tint: np.ndarray
    ior: np.ndarray


def flatten_scene(objects) -> FlatScene:
    bvhs = [ob.bvh for ob in objects]
    node_off = np.cumsum([0] + [b.node_min.shape[0] for b in bvhs]).astype(np.int64)
    tri_off = np.cumsum([0] + [b.tri_p0.shape[0] for b in bvhs]).astype(np.int64)
    cat = np.concatenate
    return FlatScene(
        objects=list(objects),
        node_min=cat([b.node_min for b in bvhs]),
        node_max=cat([b.node_max for b in bvhs]),
        node_left=cat([b.node_left for b in bvhs]),
        node_right=cat([b.node_right for b in bvhs]),
        node_count=cat([b.node_count for b in bvhs]),
        node_axis=cat([b.node_axis for b in bvhs]),
        node_off=node_off,
        tri_p0=cat([b.tri_p0 for b in bvhs]),
        tri_e1=cat([b.tri_e1 for b in bvhs]),
        tri_e2=cat([b.tri_e2 for b in bvhs]),
        tri_off=tri_off,
        scale=np.array([ob.scale for ob in objects]),
        mat_w=np.array([ob.weight for ob in objects]),
        tint=np.array([ob.tint for ob in objects], dtype=np.float64),
        ior=np.array([ob.ior for ob in objects]),
    )


@dataclass(frozen=True)
class Backdrop:
    image: np.ndarray   # (h, w, 3) float64 in [0, 1]
    distance: float
    half_w: float
    half_h: float


def make_backdrop(image_float, camera: Camera,
                  distance: float = BACKDROP_DISTANCE) -> Backdrop:
    """Plane at z = -distance sized to fill the frustum exactly."""
    half_h = distance * camera.tan_half
    return Backdrop(
        np.ascontiguousarray(image_float, dtype=np.float64),
        distance, half_h * camera.aspect, half_h,
    )


def backdrop_radiance(backdrop: Backdrop, origin, direction) -> np.ndarray:
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    return np.array(kernels.sample_backdrop(
        backdrop.image, backdrop.half_w, backdrop.half_h, backdrop.distance,
        o[0], o[1], o[2], d[0], d[1], d[2]))


# ---------------------------------------------------------------------------
# per-frame work

def sample_jitter(seed: int, frame: int, height: int, width: int,
                  spp: int) -> np.ndarray:
    """Sub-pixel offsets (h, w, spp, 2). One sample uses the exact pixel
    center; otherwise spp must be a perfect square and samples jitter within
    a stratified grid, hashed from (seed, frame, pixel, sample)."""
    if spp < 1:
        raise GlasstrackError("spp must be positive")
    if spp == 1:
        return np.full((height, width, 1, 2), 0.5)
    g = math.isqrt(spp)
    if g * g != spp:
        raise GlasstrackError(f"spp must be a perfect square, got {spp}")
    u = counter_floats(
        derive_seed(seed, "jitter", frame), height * width * spp * 2
    ).reshape(height, width, spp, 2)
    cells = np.arange(spp)
    jit = np.empty((height, width, spp, 2))
    jit[..., 0] = ((cells % g)[None, None, :] + u[..., 0]) / g
    jit[..., 1] = ((cells // g)[None, None, :] + u[..., 1]) / g
    return jit


def pose_arrays(objects, frame: int, n_time: int, shutter: float):
    """Inverse rotations (n_time, n_obj, 3, 3) and positions (n_time, n_obj,
    3) at shutter offsets u = (s + 0.5) / n_time * shutter between this frame
    and the next (the last frame holds its pose)."""
    n_obj = len(objects)
    inv_rot = np.empty((n_time, n_obj, 3, 3))
    pos = np.empty((n_time, n_obj, 3))
    for s in range(n_time):
        u = 0.0 if n_time == 1 else (s + 0.5) / n_time * shutter
        for i, ob in enumerate(objects):
            k2 = min(frame + 1, ob.positions.shape[0] - 1)
            if u == 0.0:
                pos[s, i] = ob.positions[frame]
                q = ob.quats[frame]
            else:
                pos[s, i] = (1.0 - u) * ob.positions[frame] + u * ob.positions[k2]
                q = quat_slerp(ob.quats[frame], ob.quats[k2], u)
            inv_rot[s, i] = quat_to_matrix(q).T
    return inv_rot, pos


def render_frame(flat: FlatScene, camera: Camera, backdrop: Backdrop,
                 background_float, frame: int, spp: int, shutter: float,
                 seed: int) -> np.ndarray:
    """Average radiance (h, w, 3) float64 in [0, 1] scale."""
    n_time = TEMPORAL_SAMPLES if shutter > 0.0 else 1
    inv_rot, pos = pose_arrays(flat.objects, frame, n_time, shutter)
    jit = sample_jitter(seed, frame, camera.height, camera.width, spp)
    bg = np.ascontiguousarray(background_float, dtype=np.float64)
    return kernels.render_frame_kernel(
        bg, jit, camera.tan_half, camera.aspect,
        backdrop.image, backdrop.half_w, backdrop.half_h, backdrop.distance,
        flat.node_min, flat.node_max, flat.node_left, flat.node_right,
        flat.node_count, flat.node_axis, flat.node_off,
        flat.tri_p0, flat.tri_e1, flat.tri_e2, flat.tri_off,
        inv_rot, pos, flat.scale, flat.mat_w, flat.tint, flat.ior,
        GRAY_ALBEDO, AMBIENT, kernels.MAX_DEPTH, kernels.WEIGHT_CUTOFF,
        EPS_OFFSET)


def mask_frame(flat: FlatScene, camera: Camera, frame: int) -> np.ndarray:
    """(h, w) int8 of visible object ids at the exact frame pose, -1 where
    no object is hit. Independent of blur and of the occluder."""
    inv_rot, pos = pose_arrays(flat.objects, frame, 1, 0.0)
    return kernels.mask_frame_kernel(
        camera.height, camera.width, camera.tan_half, camera.aspect,
        flat.node_min, flat.node_max, flat.node_left, flat.node_right,
        flat.node_count, flat.node_axis, flat.node_off,
        flat.tri_p0, flat.tri_e1, flat.tri_e2, flat.tri_off,
        inv_rot[0], pos[0], flat.scale)


def to_uint8(img_float) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img_float) * 255.0), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# striped occluder (composited after rendering; never enters the masks)

def occluder_starts(width: int, stripes: int, frame: int) -> np.ndarray:
    base = np.round(np.arange(stripes) * width / stripes).astype(np.int64)
    return (base + OCCLUDER_SPEED * frame) % width


def occluder_mask(width: int, height: int, stripes: int,
                  frame: int) -> np.ndarray:
    cols = np.zeros(width, dtype=bool)
    if stripes > 0:
        w = max(1, width // 40)
        for s in occluder_starts(width, stripes, frame):
            cols[np.arange(s, s + w) % width] = True
    return np.tile(cols, (height, 1))


def composite_occluder(img_u8, stripes: int, frame: int) -> np.ndarray:
    if stripes == 0:
        return img_u8
    out = img_u8.copy()
    width = img_u8.shape[1]
    w = max(1, width // 40)
    for i, s in enumerate(occluder_starts(width, stripes, frame)):
        out[:, np.arange(s, s + w) % width, :] = OCCLUDER_PALETTE[i % len(OCCLUDER_PALETTE)]
    return out


def count_column_runs(columns) -> int:
    """Number of circular runs of True columns (a stripe wrapping the edge
    counts once)."""
    c = np.asarray(columns, dtype=bool)
    if not c.any():
        return 0
    if c.all():
        return 1
    return int(np.sum(c & ~np.roll(c, 1)))


# ---------------------------------------------------------------------------
# sequence assembly

def build_scene_objects(config, camera: Camera):
    """Target (id 0) and optional distractor (id 1) from a sequence config.

    The distractor follows the same path delayed by a fixed fraction of arc
    length and pushed sideways so the shells never touch; it spins about its
    own axis at the target's rate.
    """
    n = config.n_frames
    spline = catmull_rom(np.asarray(config.control_points, dtype=np.float64))
    positions = constant_speed_track(spline, n)
    quats = orientation_track(
        np.asarray(config.rotation_axis, dtype=np.float64), config.rotation, n)
    r_t = world_radius(camera, config.scale_fraction)
    target = SceneObject(
        bvh=build_bvh(make_mesh(config.object_type, config.hollow)),
        positions=positions,
        quats=quats,
        scale=r_t,
        weight=TRANSPARENCY_WEIGHTS[config.transparency],
        tint=np.asarray(config.tint, dtype=np.float64),
    )
    objects = [target]
    if config.distractor:
        r_d = world_radius(camera, config.distractor_scale_fraction)
        fr = np.clip(np.arange(n) / (n - 1) - DISTRACTOR_LAG, 0.0, 1.0)
        ang = config.distractor_angle
        offset = np.array([math.cos(ang), math.sin(ang), 0.0])
        offset *= (r_t + r_d) * DISTRACTOR_GAP
        objects.append(SceneObject(
            bvh=build_bvh(make_mesh(config.distractor_type, config.hollow)),
            positions=arc_positions(spline, fr) + offset,
            quats=orientation_track(
                np.asarray(config.distractor_axis, dtype=np.float64),
                config.rotation, n),
            scale=r_d,
            weight=TRANSPARENCY_WEIGHTS[config.transparency],
            tint=np.asarray(config.tint, dtype=np.float64),
        ))
    return objects


def sequence_attributes(config) -> dict:
    return {
        "seq_id": config.seq_id,
        "object_type": config.object_type,
        "hollow": bool(config.hollow),
        "transparency": int(config.transparency),
        "blur": int(config.blur),
        "occlusion": int(config.occlusion),
        "rotation": float(config.rotation),
        "distractor": bool(config.distractor),
        "n_frames": int(config.n_frames),
        "width": int(config.width),
        "height": int(config.height),
    }


def resolve_workers(workers=None) -> int:
    if workers is None:
        env = os.environ.get("GLASSTRACK_WORKERS", "")
        if env:
            workers = int(env)
        else:
            workers = min(8, os.cpu_count() or 1)
    if workers < 1:
        raise GlasstrackError("worker count must be positive")
    return workers


def validate_sequence_config(config, n_backgrounds: int):
    if config.n_frames < 2:
        raise GlasstrackError(f"{config.seq_id}: need at least 2 frames")
    if config.transparency not in TRANSPARENCY_WEIGHTS:
        raise GlasstrackError(f"{config.seq_id}: bad transparency level")
    if config.blur not in BLUR_SHUTTER:
        raise GlasstrackError(f"{config.seq_id}: bad blur level")
    if config.occlusion < 0:
        raise GlasstrackError(f"{config.seq_id}: bad occlusion stripe count")
    if n_backgrounds < config.n_frames:
        raise GlasstrackError(
            f"{config.seq_id}: background clip has {n_backgrounds} frames, "
            f"sequence needs {config.n_frames}")
    spp = config.spp
    if spp != 1 and math.isqrt(spp) ** 2 != spp:
        raise GlasstrackError(f"{config.seq_id}: spp must be a perfect square")


def sequence_complete(seq_dir, config) -> bool:
    meta_path = os.path.join(seq_dir, "meta.json")
    if not os.path.exists(meta_path):
        return False
    try:
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return False
    if not meta.get("complete"):
        return False
    for k in range(config.n_frames):
        if not os.path.exists(os.path.join(seq_dir, "frames", f"{k:06d}.ppm")):
            return False
    return True


def render_sequence(config, bg_paths, out_dir, workers=None,
                    modal_masks=False, force=False) -> str:
    """Render one sequence into out_dir/<seq_id>/. Returns the sequence
    directory. A directory whose meta.json says complete is skipped unless
    force is set; frames are dispatched to a thread pool and the output is
    byte-identical for any worker count.
    """
    validate_sequence_config(config, len(bg_paths))
    camera = Camera(config.width, config.height)
    seq_dir = os.path.join(out_dir, config.seq_id)
    if not force and sequence_complete(seq_dir, config):
        return seq_dir
    objects = build_scene_objects(config, camera)
    flat = flatten_scene(objects)
    shutter = BLUR_SHUTTER[config.blur]
    has_distractor = len(objects) > 1

    os.makedirs(os.path.join(seq_dir, "frames"), exist_ok=True)
    os.makedirs(os.path.join(seq_dir, "masks", "target"), exist_ok=True)
    if has_distractor:
        os.makedirs(os.path.join(seq_dir, "masks", "distractor"), exist_ok=True)

    n = config.n_frames
    target_boxes = [None] * n
    distractor_boxes = [None] * n

    def do_frame(k):
        bg_u8 = resize_bilinear(read_ppm(bg_paths[k]), config.width, config.height)
        bg_f = bg_u8.astype(np.float64) / 255.0
        backdrop = make_backdrop(bg_f, camera)
        img = render_frame(flat, camera, backdrop, bg_f, k, config.spp,
                           shutter, config.seed)
        frame_u8 = composite_occluder(to_uint8(img), config.occlusion, k)
        ids = mask_frame(flat, camera, k)
        tmask = ids == 0
        dmask = ids == 1
        if modal_masks and config.occlusion > 0:
            visible = ~occluder_mask(config.width, config.height,
                                     config.occlusion, k)
            tmask &= visible
            dmask &= visible
        write_ppm(os.path.join(seq_dir, "frames", f"{k:06d}.ppm"), frame_u8)
        write_pgm(os.path.join(seq_dir, "masks", "target", f"{k:06d}.pgm"),
                  tmask.astype(np.uint8) * 255)
        if has_distractor:
            write_pgm(os.path.join(seq_dir, "masks", "distractor", f"{k:06d}.pgm"),
                      dmask.astype(np.uint8) * 255)
        target_boxes[k] = mask_to_bbox(tmask)
        distractor_boxes[k] = mask_to_bbox(dmask)

    n_workers = resolve_workers(workers)
    if n_workers == 1:
        for k in range(n):
            do_frame(k)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(do_frame, range(n)))

    with open(os.path.join(seq_dir, "groundtruth.txt"), "w", encoding="utf-8") as fh:
        for box in target_boxes:
            fh.write(format_bbox_line(box) + "\n")
    if has_distractor:
        with open(os.path.join(seq_dir, "groundtruth_distractor.txt"), "w",
                  encoding="utf-8") as fh:
            for box in distractor_boxes:
                fh.write(format_bbox_line(box) + "\n")
    with open(os.path.join(seq_dir, "attributes.json"), "w", encoding="utf-8") as fh:
        json.dump(sequence_attributes(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    meta = {
        "complete": True,
        "seed": config.seed,
        "spp": int(config.spp),
        "shutter": shutter,
        "modal_masks": bool(modal_masks),
        "backend": kernels.BACKEND,
    }
    with open(os.path.join(seq_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return seq_dir
