"""Dataset planning: deterministic sequence parameter draws, the controlled
per-attribute study grid, and training-batch mixing.

A plan is pure data (JSON-serializable dataclasses); rendering consumes it
unchanged. Every random quantity for sequence number i comes from a
generator seeded by (global_seed, "sequence", i), so plans are reproducible
and individual sequences can be re-drawn in isolation.
"""

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import BackgroundsDepletedError, GlasstrackError
from .primitives import OBJECT_TYPES
from .render import Camera, safe_region, world_radius
from .rng import derive_seed, generator
from .trajectory import catmull_rom, sample_control_points

# attribute grammar: four difficulty axes with four levels each
TRANSPARENCY_LEVELS = (1, 2, 3, 4)
BLUR_LEVELS = (0, 1, 2, 3)
OCCLUSION_LEVELS = (0, 7, 11, 20)        # stripe counts
ROTATION_SPEEDS = (0.0, 1.3, 5.4, 10.6)  # degrees per frame

ATTRIBUTE_LEVELS = {
    "transparency": TRANSPARENCY_LEVELS,
    "occlusion": OCCLUSION_LEVELS,
    "rotation": ROTATION_SPEEDS,
    "blur": BLUR_LEVELS,
}
STUDY_ATTRIBUTES = ("transparency", "occlusion", "rotation", "blur")
STUDY_VARIATIONS = 5
# attribute values pinned while one axis is swept
STUDY_NEUTRAL = {"transparency": 2, "occlusion": 0, "rotation": 0.0, "blur": 0}

# random draw distributions
BLUR_PROB = 0.15
OCCLUSION_PROB = 0.20
DISTRACTOR_PROB = 0.30
SCALE_RANGE = (0.1, 0.3)   # projected diameter as a fraction of min(W, H)
TINT_RANGE = (0.85, 1.0)

DEFAULT_N_FRAMES = 51
DEFAULT_WIDTH = 640
DEFAULT_HEIGHT = 360
DEFAULT_SPP = 16

# the reference corpus: sequence count and total frame budget
REFERENCE_SEQUENCE_COUNT = 2039
REFERENCE_TOTAL_FRAMES = 104343

MIX_TRANSPARENT_FRACTION = 0.625


@dataclass(frozen=True)
class SequenceConfig:
    seq_id: str
    seed: int
    width: int
    height: int
    n_frames: int
    spp: int
    background: str
    object_type: str
    hollow: bool
    tint: list
    transparency: int
    blur: int
    occlusion: int
    rotation: float
    rotation_axis: list
    scale_fraction: float
    control_points: list          # 4 x 3, camera space
    distractor: bool
    distractor_type: str
    distractor_scale_fraction: float
    distractor_angle: float
    distractor_axis: list
    study_attribute: str = ""
    study_level: int = -1


@dataclass(frozen=True)
class DatasetPlan:
    seed: int
    width: int
    height: int
    n_frames: int
    spp: int
    kind: str                     # "random" | "study"
    sequences: list = field(default_factory=list)


class BackgroundPool:
    """Catalog of background clips. A draw consumes one unused clip with at
    least the requested number of frames; clips are never reused within a
    plan so every sequence gets a distinct background.
    """

    def __init__(self, entries):
        entries = list(entries)
        self.ids = [str(e[0]) for e in entries]
        if len(set(self.ids)) != len(self.ids):
            raise GlasstrackError("duplicate background ids in catalog")
        self.counts = [int(e[1]) for e in entries]
        self.used = [False] * len(self.ids)
        self._eligible = {}   # n_frames -> list of candidate indices

    @classmethod
    def from_dir(cls, root):
        import os

        entries = []
        for name in sorted(os.listdir(root)):
            clip = os.path.join(root, name)
            if os.path.isdir(clip):
                n = len([f for f in os.listdir(clip) if f.endswith(".ppm")])
                if n:
                    entries.append((name, n))
        if not entries:
            raise GlasstrackError(f"no background clips under {root}")
        return cls(entries)

    def remaining(self, n_frames: int) -> int:
        return sum(
            1 for i in range(len(self.ids))
            if not self.used[i] and self.counts[i] >= n_frames
        )

    def draw(self, rng: np.random.Generator, n_frames: int) -> str:
        cand = self._eligible.get(n_frames)
        if cand is None:
            cand = [i for i, c in enumerate(self.counts) if c >= n_frames]
            self._eligible[n_frames] = cand
        # swap-pop keeps each draw O(1); indices taken through another
        # eligibility list are dropped lazily
        while cand:
            j = int(rng.integers(len(cand)))
            i = cand[j]
            cand[j] = cand[-1]
            cand.pop()
            if not self.used[i]:
                self.used[i] = True
                return self.ids[i]
        raise BackgroundsDepletedError(
            f"no unused background clip with >= {n_frames} frames left"
        )


def _unit_vector(rng: np.random.Generator) -> list:
    while True:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
        if n > 1e-9:
            return (v / n).tolist()


def draw_sequence(global_seed: int, ordinal: int, pool: BackgroundPool,
                  width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT,
                  n_frames: int = DEFAULT_N_FRAMES, spp: int = DEFAULT_SPP,
                  distractor_prob: float = DISTRACTOR_PROB,
                  seq_id: str = "") -> SequenceConfig:
    """One random sequence. Draw order is fixed; changing it would silently
    re-randomize every plan, so append new draws at the end only."""
    seed = derive_seed(global_seed, "sequence", ordinal)
    rng = generator(seed)
    camera = Camera(width, height)

    background = pool.draw(rng, n_frames)
    object_type = OBJECT_TYPES[int(rng.integers(len(OBJECT_TYPES)))]
    hollow = bool(rng.random() < 0.5)
    tint = rng.uniform(TINT_RANGE[0], TINT_RANGE[1], 3).tolist()
    # level 1 (most opaque) is reserved for the controlled study
    transparency = int(rng.choice(TRANSPARENCY_LEVELS[1:]))
    blur = int(rng.choice(BLUR_LEVELS[1:])) if rng.random() < BLUR_PROB else 0
    occlusion = (int(rng.choice(OCCLUSION_LEVELS[1:]))
                 if rng.random() < OCCLUSION_PROB else 0)
    rotation = float(rng.choice(ROTATION_SPEEDS[1:]))
    rotation_axis = _unit_vector(rng)
    scale_fraction = float(rng.uniform(*SCALE_RANGE))
    distractor = bool(rng.random() < distractor_prob)
    others = [t for t in OBJECT_TYPES if t != object_type]
    distractor_type = others[int(rng.integers(len(others)))]
    distractor_scale_fraction = float(rng.uniform(*SCALE_RANGE))
    distractor_angle = float(rng.uniform(0.0, 2.0 * np.pi))
    distractor_axis = _unit_vector(rng)

    radius = world_radius(camera, scale_fraction)
    region = safe_region(camera, radius)
    control_points = sample_control_points(rng, region)
    catmull_rom(control_points)  # validates shape early
    return SequenceConfig(
        seq_id=seq_id or f"seq_{ordinal:05d}",
        seed=seed,
        width=width,
        height=height,
        n_frames=n_frames,
        spp=spp,
        background=background,
        object_type=object_type,
        hollow=hollow,
        tint=tint,
        transparency=transparency,
        blur=blur,
        occlusion=occlusion,
        rotation=rotation,
        rotation_axis=rotation_axis,
        scale_fraction=scale_fraction,
        control_points=control_points.tolist(),
        distractor=distractor,
        distractor_type=distractor_type,
        distractor_scale_fraction=distractor_scale_fraction,
        distractor_angle=distractor_angle,
        distractor_axis=distractor_axis,
    )


def make_plan(seed: int, n_sequences: int, pool: BackgroundPool,
              width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT,
              n_frames: int = DEFAULT_N_FRAMES, spp: int = DEFAULT_SPP,
              distractor_prob: float = DISTRACTOR_PROB) -> DatasetPlan:
    sequences = [
        draw_sequence(seed, i, pool, width, height, n_frames, spp,
                      distractor_prob)
        for i in range(n_sequences)
    ]
    return DatasetPlan(seed=seed, width=width, height=height,
                       n_frames=n_frames, spp=spp, kind="random",
                       sequences=sequences)


def make_study_plan(seed: int, pool: BackgroundPool,
                    width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT,
                    n_frames: int = DEFAULT_N_FRAMES,
                    spp: int = DEFAULT_SPP) -> DatasetPlan:
    """Controlled difficulty grid: for each attribute, sweep its four levels
    with the other three pinned at neutral values, five variations per cell
    (4 x 4 x 5 = 80 sequences). Variations differ in object, path and
    background; the distractor is disabled so cells stay single-factor."""
    sequences = []
    ordinal = 0
    for attr in STUDY_ATTRIBUTES:
        for li, level in enumerate(ATTRIBUTE_LEVELS[attr]):
            for var in range(STUDY_VARIATIONS):
                base = draw_sequence(
                    seed, ordinal, pool, width, height, n_frames, spp,
                    seq_id=f"study_{attr}_l{li}_v{var}")
                values = dict(STUDY_NEUTRAL)
                values[attr] = level
                sequences.append(replace(
                    base,
                    transparency=int(values["transparency"]),
                    occlusion=int(values["occlusion"]),
                    rotation=float(values["rotation"]),
                    blur=int(values["blur"]),
                    distractor=False,
                    study_attribute=attr,
                    study_level=li,
                ))
                ordinal += 1
    return DatasetPlan(seed=seed, width=width, height=height,
                       n_frames=n_frames, spp=spp, kind="study",
                       sequences=sequences)


# ---------------------------------------------------------------------------
# plan serialization

def plan_to_json(plan: DatasetPlan) -> str:
    return json.dumps(asdict(plan), indent=2, sort_keys=True) + "\n"


def plan_from_dict(data: dict) -> DatasetPlan:
    seqs = [SequenceConfig(**s) for s in data["sequences"]]
    rest = {k: v for k, v in data.items() if k != "sequences"}
    return DatasetPlan(sequences=seqs, **rest)


def save_plan(plan: DatasetPlan, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(plan_to_json(plan))


def load_plan(path) -> DatasetPlan:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return plan_from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise GlasstrackError(f"bad plan file {path}: {exc}")


# ---------------------------------------------------------------------------
# training-batch mixing

@dataclass(frozen=True)
class MixEntry:
    source: str   # "transparent" | "opaque"
    item: str


def mix_batches(transparent_ids, opaque_ids, total: int,
                fraction: float = MIX_TRANSPARENT_FRACTION,
                seed: int = 0) -> list:
    """A deterministic shuffled schedule of `total` entries with the given
    fraction drawn from the transparent pool (cycled in order when the pool
    is shorter than its share)."""
    transparent_ids = list(transparent_ids)
    opaque_ids = list(opaque_ids)
    if not 0.0 <= fraction <= 1.0:
        raise GlasstrackError("mix fraction must be in [0, 1]")
    n_t = int(round(total * fraction))
    n_o = total - n_t
    if n_t > 0 and not transparent_ids:
        raise GlasstrackError("mix needs transparent items")
    if n_o > 0 and not opaque_ids:
        raise GlasstrackError("mix needs opaque items")
    entries = [
        MixEntry("transparent", transparent_ids[i % len(transparent_ids)])
        for i in range(n_t)
    ] + [
        MixEntry("opaque", opaque_ids[i % len(opaque_ids)])
        for i in range(n_o)
    ]
    order = generator(seed, "mix").permutation(len(entries))
    return [entries[i] for i in order]


def transparent_fraction(entries) -> float:
    if not entries:
        return 0.0
    return sum(1 for e in entries if e.source == "transparent") / len(entries)
