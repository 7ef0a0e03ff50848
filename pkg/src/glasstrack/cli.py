"""Command-line entry point.

Subcommands cover the whole pipeline: make background clips (demo-assets or
convert-bg), plan a corpus (plan / study), render it (generate), evaluate
tracker results (eval), build training schedules (mix), and compare compute
backends (bench).

Exit codes: 0 success, 1 partial failure (some sequences failed), 2 bad
configuration or input.
"""

import argparse
import glob
import json
import os
import sys

import numpy as np

from . import bench as bench_mod
from .errors import GlasstrackError
from .evalkit import (
    difficulty_table,
    evaluate_tracker,
    groundtruth_as_results,
    load_corpus,
    load_results,
    write_report,
)
from .imgio import write_ppm
from .render import render_sequence
from .rng import generator
from .seqplan import (
    DEFAULT_N_FRAMES,
    DEFAULT_SPP,
    DISTRACTOR_PROB,
    MIX_TRANSPARENT_FRACTION,
    BackgroundPool,
    load_plan,
    make_plan,
    make_study_plan,
    mix_batches,
    save_plan,
    transparent_fraction,
)


def _merge_config(args, parser):
    """--config FILE supplies defaults; explicit flags win."""
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise GlasstrackError(f"bad config file {args.config}: {exc}")
    for key, value in data.items():
        dest = key.replace("-", "_")
        if (dest.startswith("_") or dest in ("func", "config")
                or not hasattr(args, dest)):
            raise GlasstrackError(f"unknown config key {key!r}")
        if parser.get_default(dest) == getattr(args, dest):
            setattr(args, dest, value)
    return args


def _add_plan_args(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backgrounds", required=True,
                   help="directory of background clips")
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=180)
    p.add_argument("--frames", type=int, default=DEFAULT_N_FRAMES)
    p.add_argument("--spp", type=int, default=DEFAULT_SPP)
    p.add_argument("-o", "--out", required=True, help="plan JSON path")
    p.add_argument("--config", help="JSON file with default option values")
    # the subparser knows this command's defaults; the root parser does not
    p.set_defaults(_parser=p)


def cmd_plan(args):
    pool = BackgroundPool.from_dir(args.backgrounds)
    plan = make_plan(args.seed, args.sequences, pool,
                     width=args.width, height=args.height,
                     n_frames=args.frames, spp=args.spp,
                     distractor_prob=args.distractor_prob)
    save_plan(plan, args.out)
    print(f"wrote plan with {len(plan.sequences)} sequences to {args.out}")
    return 0


def cmd_study(args):
    pool = BackgroundPool.from_dir(args.backgrounds)
    plan = make_study_plan(args.seed, pool,
                           width=args.width, height=args.height,
                           n_frames=args.frames, spp=args.spp)
    save_plan(plan, args.out)
    print(f"wrote study plan with {len(plan.sequences)} sequences to {args.out}")
    return 0


def cmd_generate(args):
    plan = load_plan(args.plan)
    failures = []
    for cfg in plan.sequences:
        clip = os.path.join(args.backgrounds, cfg.background)
        bg_paths = sorted(glob.glob(os.path.join(clip, "*.ppm")))[:cfg.n_frames]
        try:
            render_sequence(cfg, bg_paths, args.out, workers=args.workers,
                            modal_masks=args.modal_masks, force=args.force)
            print(f"rendered {cfg.seq_id}")
        except GlasstrackError as exc:
            failures.append(cfg.seq_id)
            print(f"failed {cfg.seq_id}: {exc}", file=sys.stderr)
    if failures:
        print(f"{len(failures)} of {len(plan.sequences)} sequences failed",
              file=sys.stderr)
        return 1
    return 0


def cmd_eval(args):
    corpus = load_corpus(args.dataset)
    if args.gt_as_results:
        results = {"groundtruth": groundtruth_as_results(corpus)}
    else:
        if not args.results:
            raise GlasstrackError("provide --results or --gt-as-results")
        results = load_results(args.results)
    reports = [evaluate_tracker(name, corpus, runs)
               for name, runs in sorted(results.items())]
    table = difficulty_table(corpus, results)
    json_path, csv_path = write_report(args.out, reports, table)
    for r in reports:
        print(f"{r.name}: auc={r.auc:.4f} precision@20={r.precision_at_20:.4f}")
    print(f"wrote {json_path} and {csv_path}")
    return 0


def _read_id_list(path):
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def cmd_mix(args):
    entries = mix_batches(_read_id_list(args.transparent),
                          _read_id_list(args.opaque),
                          args.total, args.fraction, args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump([{"source": e.source, "item": e.item} for e in entries],
                  fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(entries)} entries "
          f"(transparent fraction {transparent_fraction(entries):.4f}) "
          f"to {args.out}")
    return 0


def cmd_demo_assets(args):
    """Procedural background clips: drifting multi-frequency color fields,
    enough to plan and render a corpus with no external data."""
    rng = generator(args.seed, "demo-assets")
    yy, xx = np.meshgrid(np.arange(args.height), np.arange(args.width),
                         indexing="ij")
    for c in range(args.clips):
        clip_dir = os.path.join(args.dest, f"clip_{c:04d}")
        os.makedirs(clip_dir, exist_ok=True)
        freq = rng.uniform(0.01, 0.06, size=(3, 2))
        phase = rng.uniform(0.0, 2.0 * np.pi, size=3)
        drift = rng.uniform(0.05, 0.25, size=3)
        base = rng.uniform(0.25, 0.75, size=3)
        amp = rng.uniform(0.1, 0.25, size=3)
        for k in range(args.frames):
            img = np.empty((args.height, args.width, 3))
            for ch in range(3):
                wave = np.sin(freq[ch, 0] * xx + freq[ch, 1] * yy
                              + phase[ch] + drift[ch] * k)
                img[..., ch] = base[ch] + amp[ch] * wave
            write_ppm(os.path.join(clip_dir, f"{k:06d}.ppm"),
                      np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8))
    print(f"wrote {args.clips} clips x {args.frames} frames under {args.dest}")
    return 0


def cmd_convert_bg(args):
    try:
        from PIL import Image
    except ImportError:
        raise GlasstrackError(
            "convert-bg needs Pillow (pip install glasstrack[images])")
    patterns = ("*.png", "*.jpg", "*.jpeg", "*.bmp", "*.ppm")
    sources = sorted(p for pat in patterns
                     for p in glob.glob(os.path.join(args.src, pat)))
    if not sources:
        raise GlasstrackError(f"no images found under {args.src}")
    pan = max(8, args.width // 10)
    for path in sources:
        name = os.path.splitext(os.path.basename(path))[0]
        clip_dir = os.path.join(args.dest, name)
        os.makedirs(clip_dir, exist_ok=True)
        with Image.open(path) as im:
            im = im.convert("RGB").resize(
                (args.width + pan, args.height), Image.BILINEAR)
            full = np.asarray(im, dtype=np.uint8)
        # horizontal pan turns a still image into a short clip
        offsets = np.linspace(0, pan, args.frames).astype(int)
        for k, off in enumerate(offsets):
            write_ppm(os.path.join(clip_dir, f"{k:06d}.ppm"),
                      full[:, off:off + args.width])
    print(f"converted {len(sources)} images into clips under {args.dest}")
    return 0


def cmd_bench(args):
    results = bench_mod.compare(args.width, args.height, args.spp,
                                args.frames, args.blur)
    print(bench_mod.format_comparison(results))
    return 0 if results["numba"]["hash"] == results["numpy"]["hash"] else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="glasstrack",
        description="procedural transparent-object tracking corpora with "
                    "exact ground truth, plus the matching evaluation tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="draw a random corpus plan")
    _add_plan_args(p)
    p.add_argument("--sequences", type=int, required=True)
    p.add_argument("--distractor-prob", type=float, default=DISTRACTOR_PROB)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("study", help="plan the controlled attribute study "
                                     "(4 attributes x 4 levels x 5 variations)")
    _add_plan_args(p)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("generate", help="render every sequence in a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--backgrounds", required=True)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--workers", type=int, default=None,
                   help="frame threads per sequence "
                        "(default: GLASSTRACK_WORKERS or cpu count, max 8)")
    p.add_argument("--modal-masks", action="store_true",
                   help="cut occluder stripes out of the masks")
    p.add_argument("--force", action="store_true",
                   help="re-render sequences already marked complete")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="score tracker results and write "
                                    "report.json / report.csv")
    p.add_argument("--dataset", required=True)
    p.add_argument("--results")
    p.add_argument("--gt-as-results", action="store_true",
                   help="evaluate the ground truth against itself "
                        "(oracle sanity check)")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mix", help="deterministic training-batch schedule")
    p.add_argument("--transparent", required=True,
                   help="text file of transparent item ids")
    p.add_argument("--opaque", required=True,
                   help="text file of opaque item ids")
    p.add_argument("--total", type=int, required=True)
    p.add_argument("--fraction", type=float,
                   default=MIX_TRANSPARENT_FRACTION)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("demo-assets", help="make procedural background clips")
    p.add_argument("--dest", required=True)
    p.add_argument("--clips", type=int, default=8)
    p.add_argument("--frames", type=int, default=DEFAULT_N_FRAMES)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=180)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_demo_assets)

    p = sub.add_parser("convert-bg", help="turn still images into "
                                          "panning background clips")
    p.add_argument("--src", required=True)
    p.add_argument("--dest", required=True)
    p.add_argument("--frames", type=int, default=DEFAULT_N_FRAMES)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=180)
    p.set_defaults(func=cmd_convert_bg)

    p = sub.add_parser("bench", help="compare numba and numpy backends")
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=72)
    p.add_argument("--spp", type=int, default=4)
    p.add_argument("--frames", type=int, default=4)
    p.add_argument("--blur", action="store_true")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if hasattr(args, "config"):
            args = _merge_config(args, getattr(args, "_parser", parser))
        return args.func(args)
    except GlasstrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
