"""Frame- and segment-level scores for predicted action timelines."""
from __future__ import annotations

import json

import numpy as np

from ..labels import ACTION_NAMES
from ..timeline import ActionTimeline, Segment, run_length_encode


def _labels(t) -> np.ndarray:
    return t.labels if isinstance(t, ActionTimeline) else np.asarray(t)


def _check_lengths(pred, gt):
    if len(pred) != len(gt):
        raise ValueError(f"timeline lengths differ: {len(pred)} vs {len(gt)}")


def frame_accuracy(pred, gt) -> float:
    p, g = _labels(pred), _labels(gt)
    _check_lengths(p, g)
    if p.size == 0:
        raise ValueError("empty timelines")
    return float(np.mean(p == g))


def segment_iou(a: Segment, b: Segment) -> float:
    inter = min(a.end_frame, b.end_frame) - max(a.start_frame, b.start_frame) + 1
    if inter <= 0:
        return 0.0
    union = a.length + b.length - inter
    return inter / union


def match_segments(pred_segs, gt_segs, iou_threshold: float = 0.5) -> list[tuple[int, int]]:
    """Greedy same-class matching by descending IoU; returns ``(pred_idx, gt_idx)`` pairs."""
    pairs = []
    for i, p in enumerate(pred_segs):
        for j, g in enumerate(gt_segs):
            if p.class_id != g.class_id:
                continue
            iou = segment_iou(p, g)
            if iou >= iou_threshold:
                pairs.append((-iou, i, j))
    pairs.sort()
    used_p, used_g, matches = set(), set(), []
    for _, i, j in pairs:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        matches.append((i, j))
    return matches


def _prf(tp, n_pred, n_gt):
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gt if n_gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def segment_metrics(pred, gt, iou_threshold: float = 0.5, num_classes: int = len(ACTION_NAMES),
                    segmental_jaccard: bool = False) -> dict:
    """Segment precision/recall/F1 and Jaccard, overall and per class.

    A predicted run counts as a true positive when it is matched to an
    unmatched ground-truth run of the same class with IoU >= ``iou_threshold``.
    Jaccard is the per-class frame-level IoU (mean over classes present in
    either timeline), or TP/(TP+FP+FN) over segments with ``segmental_jaccard``.
    Classes absent from both timelines are left out of the per-class table.
    """
    p, g = _labels(pred), _labels(gt)
    _check_lengths(p, g)
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError("iou_threshold must lie in (0, 1]")
    ps, gs = run_length_encode(p), run_length_encode(g)
    matches = match_segments(ps, gs, iou_threshold)
    matched_cls = [ps[i].class_id for i, _ in matches]

    per_class = {}
    tot_tp = tot_pred = tot_gt = 0
    jaccards = []
    for c in range(num_classes):
        n_pred = sum(s.class_id == c for s in ps)
        n_gt = sum(s.class_id == c for s in gs)
        if n_pred == 0 and n_gt == 0:
            continue
        tp = matched_cls.count(c)
        precision, recall, f1 = _prf(tp, n_pred, n_gt)
        if segmental_jaccard:
            jac = tp / (n_pred + n_gt - tp)
        else:
            inter = int(np.sum((p == c) & (g == c)))
            union = int(np.sum((p == c) | (g == c)))
            jac = inter / union
        jaccards.append(jac)
        per_class[ACTION_NAMES[c] if c < len(ACTION_NAMES) else str(c)] = {
            "precision": precision, "recall": recall, "jaccard": jac, "f1": f1,
            "tp": tp, "n_pred": n_pred, "n_gt": n_gt,
        }
        tot_tp, tot_pred, tot_gt = tot_tp + tp, tot_pred + n_pred, tot_gt + n_gt

    precision, recall, f1 = _prf(tot_tp, tot_pred, tot_gt)
    overall = {
        "accuracy": frame_accuracy(p, g) if p.size else 0.0,
        "precision": precision,
        "recall": recall,
        "jaccard": float(np.mean(jaccards)) if jaccards else 0.0,
        "f1": f1,
    }
    return {"iou_threshold": iou_threshold, "overall": overall, "per_class": per_class}


def metrics_report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
