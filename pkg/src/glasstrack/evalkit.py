"""One-pass evaluation of tracker results against rendered ground truth.

Conventions: frame 0 is the initialization frame and is never scored;
frames whose ground-truth box is nan (object fully hidden) are skipped;
a nan prediction on a scored frame counts as overlap 0 at infinite center
distance. Success thresholds are the 21 values k/20 with the tie counting
as a success (overlap >= threshold); precision thresholds are 0..50 pixels.
Dataset curves weight every sequence equally regardless of length.

Results layout: <results_dir>/<tracker>/<seq_id>.txt, one "x,y,w,h" line
per frame, same line count as the sequence's groundtruth.txt.
"""

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .annotate import bbox_iou, center_distance, read_boxes
from .errors import CoverageError, ResultFormatError
from .seqplan import ATTRIBUTE_LEVELS, STUDY_ATTRIBUTES

SUCCESS_THRESHOLDS = np.arange(21) / 20
PRECISION_THRESHOLDS = np.arange(51, dtype=np.float64)
PRECISION_REF_PX = 20


@dataclass
class CorpusSequence:
    seq_id: str
    gt_boxes: list
    attributes: dict


@dataclass
class SequenceScore:
    seq_id: str
    ious: np.ndarray
    dists: np.ndarray
    success_curve: np.ndarray
    precision_curve: np.ndarray

    @property
    def auc(self) -> float:
        return float(self.success_curve.mean())

    @property
    def precision_at_20(self) -> float:
        return float(self.precision_curve[PRECISION_REF_PX])


@dataclass
class TrackerReport:
    name: str
    success_curve: np.ndarray
    precision_curve: np.ndarray
    per_sequence: dict = field(default_factory=dict)

    @property
    def auc(self) -> float:
        return float(self.success_curve.mean())

    @property
    def precision_at_20(self) -> float:
        return float(self.precision_curve[PRECISION_REF_PX])


def load_corpus(dataset_dir) -> dict:
    """All sequences under dataset_dir keyed by id (any directory holding a
    groundtruth.txt)."""
    corpus = {}
    for name in sorted(os.listdir(dataset_dir)):
        seq_dir = os.path.join(dataset_dir, name)
        gt_path = os.path.join(seq_dir, "groundtruth.txt")
        if not os.path.isfile(gt_path):
            continue
        try:
            boxes = read_boxes(gt_path)
        except ValueError as exc:
            raise ResultFormatError(f"{gt_path}: {exc}")
        attrs = {}
        attr_path = os.path.join(seq_dir, "attributes.json")
        if os.path.isfile(attr_path):
            with open(attr_path, "r", encoding="utf-8") as fh:
                attrs = json.load(fh)
        corpus[name] = CorpusSequence(name, boxes, attrs)
    if not corpus:
        raise CoverageError(f"no sequences with ground truth under {dataset_dir}")
    return corpus


def load_results(results_dir) -> dict:
    """tracker name -> {seq_id -> box list}."""
    out = {}
    for tracker in sorted(os.listdir(results_dir)):
        tdir = os.path.join(results_dir, tracker)
        if not os.path.isdir(tdir):
            continue
        runs = {}
        for fname in sorted(os.listdir(tdir)):
            if not fname.endswith(".txt"):
                continue
            path = os.path.join(tdir, fname)
            try:
                runs[fname[:-4]] = read_boxes(path)
            except ValueError as exc:
                raise ResultFormatError(f"{path}: {exc}")
        if runs:
            out[tracker] = runs
    if not out:
        raise CoverageError(f"no tracker results under {results_dir}")
    return out


def frame_scores(gt_boxes, pred_boxes, seq_id="?"):
    """Per-frame overlap and center distance on the scored frames."""
    if len(pred_boxes) != len(gt_boxes):
        raise ResultFormatError(
            f"{seq_id}: {len(pred_boxes)} result lines for "
            f"{len(gt_boxes)} ground-truth frames")
    ious = []
    dists = []
    for k in range(1, len(gt_boxes)):
        gt = gt_boxes[k]
        if gt is None:
            continue
        pred = pred_boxes[k]
        if pred is None:
            ious.append(0.0)
            dists.append(np.inf)
        else:
            ious.append(bbox_iou(gt, pred))
            dists.append(center_distance(gt, pred))
    return np.asarray(ious), np.asarray(dists)


def success_curve(ious) -> np.ndarray:
    ious = np.asarray(ious, dtype=np.float64)
    if ious.size == 0:
        return np.zeros(len(SUCCESS_THRESHOLDS))
    return (ious[:, None] >= SUCCESS_THRESHOLDS[None, :]).mean(axis=0)


def precision_curve(dists) -> np.ndarray:
    dists = np.asarray(dists, dtype=np.float64)
    if dists.size == 0:
        return np.zeros(len(PRECISION_THRESHOLDS))
    return (dists[:, None] <= PRECISION_THRESHOLDS[None, :]).mean(axis=0)


def evaluate_sequence(seq: CorpusSequence, pred_boxes) -> SequenceScore:
    ious, dists = frame_scores(seq.gt_boxes, pred_boxes, seq.seq_id)
    return SequenceScore(seq.seq_id, ious, dists,
                         success_curve(ious), precision_curve(dists))


def evaluate_tracker(name, corpus: dict, runs: dict) -> TrackerReport:
    """Average the per-sequence curves with equal weight. Every corpus
    sequence must have a result file."""
    missing = sorted(set(corpus) - set(runs))
    if missing:
        raise CoverageError(
            f"tracker {name!r} is missing {len(missing)} sequences "
            f"(first: {missing[0]})")
    per_sequence = {}
    succ = np.zeros(len(SUCCESS_THRESHOLDS))
    prec = np.zeros(len(PRECISION_THRESHOLDS))
    for seq_id in sorted(corpus):
        score = evaluate_sequence(corpus[seq_id], runs[seq_id])
        per_sequence[seq_id] = score
        succ += score.success_curve
        prec += score.precision_curve
    n = len(corpus)
    return TrackerReport(name, succ / n, prec / n, per_sequence)


def groundtruth_as_results(corpus: dict) -> dict:
    """An oracle run that echoes the ground truth (useful as a sanity upper
    bound: overlap 1 on every scored frame)."""
    return {seq_id: list(seq.gt_boxes) for seq_id, seq in corpus.items()}


# ---------------------------------------------------------------------------
# attribute difficulty study

@dataclass
class DifficultyCell:
    attribute: str
    level: float
    n_sequences: int
    n_frames: int
    mean_iou: float


def difficulty_table(corpus: dict, results_by_tracker: dict) -> list:
    """Pooled per-frame overlap for every (attribute, level) cell, across
    all trackers and all sequences carrying that attribute value."""
    buckets = {}
    for attr in STUDY_ATTRIBUTES:
        for level in ATTRIBUTE_LEVELS[attr]:
            buckets[(attr, float(level))] = {"ious": [], "seqs": set()}
    for tracker, runs in sorted(results_by_tracker.items()):
        for seq_id in sorted(corpus):
            seq = corpus[seq_id]
            if seq_id not in runs or not seq.attributes:
                continue
            ious, _ = frame_scores(seq.gt_boxes, runs[seq_id], seq_id)
            for attr in STUDY_ATTRIBUTES:
                if attr not in seq.attributes:
                    continue
                key = (attr, float(seq.attributes[attr]))
                if key in buckets:
                    buckets[key]["ious"].append(ious)
                    buckets[key]["seqs"].add(seq_id)
    table = []
    for attr in STUDY_ATTRIBUTES:
        for level in ATTRIBUTE_LEVELS[attr]:
            b = buckets[(attr, float(level))]
            if b["ious"]:
                pooled = np.concatenate(b["ious"])
                mean_iou = float(pooled.mean()) if pooled.size else float("nan")
                n_frames = int(pooled.size)
            else:
                mean_iou = float("nan")
                n_frames = 0
            table.append(DifficultyCell(attr, float(level), len(b["seqs"]),
                                        n_frames, mean_iou))
    return table


# ---------------------------------------------------------------------------
# reports

def report_payload(reports, difficulty) -> dict:
    return {
        "thresholds": {
            "success": SUCCESS_THRESHOLDS.tolist(),
            "precision": PRECISION_THRESHOLDS.tolist(),
        },
        "trackers": {
            r.name: {
                "auc": r.auc,
                "precision_at_20": r.precision_at_20,
                "success_curve": r.success_curve.tolist(),
                "precision_curve": r.precision_curve.tolist(),
                "per_sequence": {
                    s.seq_id: {
                        "auc": s.auc,
                        "precision_at_20": s.precision_at_20,
                        "n_scored_frames": int(s.ious.size),
                    }
                    for s in r.per_sequence.values()
                },
            }
            for r in reports
        },
        "difficulty": [
            {
                "attribute": c.attribute,
                "level": c.level,
                "n_sequences": c.n_sequences,
                "n_frames": c.n_frames,
                "mean_iou": None if np.isnan(c.mean_iou) else c.mean_iou,
            }
            for c in difficulty
        ],
    }


def write_report(out_dir, reports, difficulty):
    """report.json plus a flat report.csv next to it."""
    os.makedirs(out_dir, exist_ok=True)
    payload = report_payload(reports, difficulty)
    json_path = os.path.join(out_dir, "report.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    csv_path = os.path.join(out_dir, "report.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record", "tracker", "seq_id", "attribute", "level",
                         "metric", "value"])
        for r in reports:
            writer.writerow(["tracker", r.name, "", "", "", "auc", r.auc])
            writer.writerow(["tracker", r.name, "", "", "",
                             "precision_at_20", r.precision_at_20])
            for s in r.per_sequence.values():
                writer.writerow(["sequence", r.name, s.seq_id, "", "",
                                 "auc", s.auc])
        for c in difficulty:
            writer.writerow(["difficulty", "", "", c.attribute, c.level,
                             "mean_iou", "" if np.isnan(c.mean_iou) else c.mean_iou])
    return json_path, csv_path
