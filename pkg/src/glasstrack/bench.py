"""Backend benchmark: renders a fixed synthetic scene under the compiled
and the pure-python backends in separate processes and checks that both
produce byte-identical frames.

Run as `glasstrack bench` or `python -m glasstrack.bench`.
"""

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np

from .errors import GlasstrackError


def _bench_scene(width, height, spp, n_frames, blur=False):
    """Deterministic self-contained scene: a spinning hollow cube crossing
    a striped gradient. Returns (sha256 of all frame and mask bytes,
    seconds spent rendering after a warmup frame)."""
    from .geometry import build_bvh
    from .optics import TRANSPARENCY_WEIGHTS
    from .primitives import make_mesh
    from .render import (
        Camera, SceneObject, flatten_scene, make_backdrop, mask_frame,
        render_frame, to_uint8, world_radius,
    )
    from .trajectory import catmull_rom, constant_speed_track, orientation_track

    camera = Camera(width, height)
    yy, xx = np.meshgrid(np.linspace(0.0, 1.0, height),
                         np.linspace(0.0, 1.0, width), indexing="ij")
    bg = np.stack([0.2 + 0.6 * xx, 0.3 + 0.4 * yy,
                   0.5 + 0.3 * np.sin(8.0 * xx)], axis=-1)
    bg = np.ascontiguousarray(np.clip(bg, 0.0, 1.0))
    backdrop = make_backdrop(bg, camera)

    radius = world_radius(camera, 0.22)
    spline = catmull_rom(np.array([
        [-0.6, -0.3, -3.6], [-0.2, 0.25, -4.2],
        [0.25, -0.15, -3.9], [0.6, 0.3, -4.4],
    ]))
    frames = max(n_frames, 2)
    obj = SceneObject(
        bvh=build_bvh(make_mesh("cube", hollow=True)),
        positions=constant_speed_track(spline, frames),
        quats=orientation_track(np.array([0.0, 1.0, 0.0]), 5.4, frames),
        scale=radius,
        weight=TRANSPARENCY_WEIGHTS[3],
        tint=np.array([0.97, 0.99, 0.95]),
    )
    flat = flatten_scene([obj])
    shutter = 0.5 if blur else 0.0

    def one(k):
        img = to_uint8(render_frame(flat, camera, backdrop, bg, k, spp,
                                    shutter, seed=7))
        ids = mask_frame(flat, camera, k)
        return img.tobytes() + ids.tobytes()

    one(0)  # warmup pays any compilation cost outside the timing
    digest = hashlib.sha256()
    t0 = time.perf_counter()
    for k in range(frames):
        digest.update(one(k))
    elapsed = time.perf_counter() - t0
    return digest.hexdigest(), elapsed


def run_child(args) -> dict:
    from . import kernels

    frame_hash, seconds = _bench_scene(args.width, args.height, args.spp,
                                       args.frames, args.blur)
    return {
        "backend": kernels.BACKEND,
        "hash": frame_hash,
        "seconds": seconds,
        "frames": args.frames,
    }


def compare(width=128, height=72, spp=4, frames=4, blur=False):
    """Run both backends in fresh interpreters; returns their reports."""
    from .render import sample_jitter

    # fail on bad parameters here, before they crash inside a child process
    sample_jitter(0, 0, 1, 1, spp)
    out = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, GLASSTRACK_BACKEND=backend)
        cmd = [sys.executable, "-m", "glasstrack.bench", "--child",
               "--width", str(width), "--height", str(height),
               "--spp", str(spp), "--frames", str(frames)]
        if blur:
            cmd.append("--blur")
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            raise GlasstrackError(
                f"bench child ({backend}) failed:\n{proc.stderr}")
        out[backend] = json.loads(proc.stdout.strip().splitlines()[-1])
    return out


def format_comparison(results) -> str:
    nb = results["numba"]
    py = results["numpy"]
    match = nb["hash"] == py["hash"]
    speedup = py["seconds"] / nb["seconds"] if nb["seconds"] > 0 else float("inf")
    lines = [
        f"numba : {nb['seconds']:8.3f} s for {nb['frames']} frames",
        f"numpy : {py['seconds']:8.3f} s for {py['frames']} frames",
        f"speedup: {speedup:.1f}x",
        f"outputs: {'identical' if match else 'MISMATCH'}",
    ]
    if not match:
        lines.append(f"  numba {nb['hash']}")
        lines.append(f"  numpy {py['hash']}")
    return "\n".join(lines)


def build_parser():
    p = argparse.ArgumentParser(description="compare render backends")
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=72)
    p.add_argument("--spp", type=int, default=4)
    p.add_argument("--frames", type=int, default=4)
    p.add_argument("--blur", action="store_true",
                   help="enable motion blur (8 shutter samples)")
    p.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.child:
        print(json.dumps(run_child(args)))
        return 0
    results = compare(args.width, args.height, args.spp, args.frames,
                      args.blur)
    print(format_comparison(results))
    return 0 if results["numba"]["hash"] == results["numpy"]["hash"] else 1


if __name__ == "__main__":
    sys.exit(main())
