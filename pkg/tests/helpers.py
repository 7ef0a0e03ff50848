"""Shared builders for synthetic corpora and tracker result trees."""

import json
import os

from glasstrack.annotate import write_boxes


def write_fake_sequence(root, seq_id, gt_boxes, attributes=None):
    seq_dir = os.path.join(root, seq_id)
    os.makedirs(seq_dir, exist_ok=True)
    write_boxes(os.path.join(seq_dir, "groundtruth.txt"), gt_boxes)
    if attributes is not None:
        with open(os.path.join(seq_dir, "attributes.json"), "w") as fh:
            json.dump(attributes, fh)
    return seq_dir


def write_tracker_results(root, tracker, boxes_by_seq):
    tdir = os.path.join(root, tracker)
    os.makedirs(tdir, exist_ok=True)
    for seq_id, boxes in boxes_by_seq.items():
        write_boxes(os.path.join(tdir, seq_id + ".txt"), boxes)
    return tdir


def shifted(box, dx, dy):
    if box is None:
        return None
    return (box[0] + dx, box[1] + dy, box[2], box[3])
