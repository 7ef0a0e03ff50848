"""Ground-truth plumbing: segmentation masks to axis-aligned boxes, box
overlap, and the one-line-per-frame annotation files.

Boxes are (x, y, w, h): column and row of the top-left pixel and the
inclusive pixel extents. A frame with no visible pixels is recorded as
"nan,nan,nan,nan".
"""

import numpy as np


def mask_to_bbox(mask):
    """Tight box around the nonzero pixels, or None for an empty mask."""
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return None
    x0 = int(xs.min())
    y0 = int(ys.min())
    return (x0, y0, int(xs.max()) - x0 + 1, int(ys.max()) - y0 + 1)


def bbox_iou(a, b) -> float:
    """Intersection over union of two (x, y, w, h) boxes."""
    ax, ay, aw, ah = float(a[0]), float(a[1]), float(a[2]), float(a[3])
    bx, by, bw, bh = float(b[0]), float(b[1]), float(b[2]), float(b[3])
    if aw <= 0.0 or ah <= 0.0 or bw <= 0.0 or bh <= 0.0:
        return 0.0
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def bbox_center(box):
    return (float(box[0]) + 0.5 * float(box[2]), float(box[1]) + 0.5 * float(box[3]))


def center_distance(a, b) -> float:
    ax, ay = bbox_center(a)
    bx, by = bbox_center(b)
    return float(np.hypot(ax - bx, ay - by))


def format_bbox_line(box) -> str:
    if box is None:
        return "nan,nan,nan,nan"
    return "{:g},{:g},{:g},{:g}".format(*(float(v) for v in box))


def parse_bbox_line(line: str):
    """Four comma-separated numbers, or None when any field is nan."""
    parts = line.strip().split(",")
    if len(parts) != 4:
        raise ValueError(f"expected 4 fields, got {len(parts)}: {line!r}")
    vals = [float(p) for p in parts]
    if any(np.isnan(v) for v in vals):
        return None
    return tuple(vals)


def write_boxes(path, boxes):
    with open(path, "w", encoding="utf-8") as fh:
        for box in boxes:
            fh.write(format_bbox_line(box) + "\n")


def read_boxes(path):
    boxes = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                boxes.append(parse_bbox_line(line))
    return boxes
