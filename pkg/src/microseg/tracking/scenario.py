"""Scripted instrument scenarios with known ground truth, and how to score a tracker on them."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..labels import INSTRUMENT_NAMES
from .tracker import Detection, TrackOutput, iou


@dataclass
class ObjectScript:
    object_id: int
    class_id: int
    size: tuple  # (w, h)
    center: tuple  # mean centre (cx, cy)
    amplitude: tuple = (60.0, 30.0)
    period: float = 240.0  # frames per sway cycle
    phase: float = 0.0
    gaps: list = field(default_factory=list)  # [start, stop) frame ranges with no detections

    def box(self, frame: int) -> tuple:
        t = 2 * np.pi * frame / self.period + self.phase
        cx = self.center[0] + self.amplitude[0] * np.sin(t)
        cy = self.center[1] + self.amplitude[1] * np.sin(2 * t)
        w, h = self.size
        return (float(cx - w / 2), float(cy - h / 2), float(w), float(h))

    def hidden(self, frame: int) -> bool:
        return any(a <= frame < b for a, b in self.gaps)


@dataclass
class NoiseModel:
    dropout: float = 0.0
    label_flip: float = 0.0
    bbox_jitter: float = 0.0
    confidence: tuple = (0.8, 0.99)


@dataclass
class TrackingScenario:
    objects: list
    n_frames: int
    noise: NoiseModel = field(default_factory=NoiseModel)
    num_classes: int = len(INSTRUMENT_NAMES)
    seed: int = 0
    frame_size: tuple = (640, 480)

    def ground_truth(self, frame: int) -> dict:
        return {o.object_id: (o.class_id, o.box(frame)) for o in self.objects}

    def detections(self) -> list[Detection]:
        rng = np.random.default_rng(self.seed)
        out = []
        lo, hi = self.noise.confidence
        for f in range(self.n_frames):
            for o in self.objects:
                # draw every random number each frame so the stream does not depend on gaps
                drop = rng.random() < self.noise.dropout
                flip = rng.random() < self.noise.label_flip
                other = int(rng.integers(1, self.num_classes))
                jitter = rng.normal(0.0, self.noise.bbox_jitter, 2) if self.noise.bbox_jitter else (0, 0)
                conf = float(rng.uniform(lo, hi))
                if drop or o.hidden(f):
                    continue
                x, y, w, h = o.box(f)
                cls = (o.class_id + other) % self.num_classes if flip else o.class_id
                out.append(Detection(f, (x + float(jitter[0]), y + float(jitter[1]), w, h), cls,
                                     round(conf, 4), o.object_id))
        return out


def two_instrument_scenario(n_frames: int = 1000, seed: int = 0, noise: NoiseModel | None = None,
                            gaps=((), ())) -> TrackingScenario:
    """A straight needle driver and straight scissors swaying on either side of the frame."""
    objects = [
        ObjectScript(0, 0, (90.0, 40.0), (200.0, 240.0), phase=0.0, gaps=list(gaps[0])),
        ObjectScript(1, 2, (70.0, 50.0), (440.0, 240.0), phase=1.3, period=300.0, gaps=list(gaps[1])),
    ]
    return TrackingScenario(objects, n_frames, noise or NoiseModel(), seed=seed)


@dataclass
class TrackingScore:
    label_errors: int
    matched_outputs: int
    fragmentation: dict  # object_id -> number of distinct track IDs
    id_switches: int
    missed: int

    @property
    def label_error_rate(self) -> float:
        return self.label_errors / self.matched_outputs if self.matched_outputs else 0.0


def score_tracks(outputs, scenario: TrackingScenario, min_iou: float = 0.5) -> TrackingScore:
    """Match every ground-truth box to the output box overlapping it most and tally errors."""
    gt = [scenario.ground_truth(f) for f in range(scenario.n_frames)]
    hidden = [{o.object_id for o in scenario.objects if o.hidden(f)} for f in range(scenario.n_frames)]
    return score_against(outputs, gt, hidden, min_iou)


def score_against(outputs, gt_by_frame, hidden_by_frame, min_iou: float = 0.5) -> TrackingScore:
    """``gt_by_frame[f]``: ``{object_id: (class_id, bbox)}``; hidden objects do not count as missed."""
    by_frame: dict[int, list[TrackOutput]] = {}
    for o in outputs:
        by_frame.setdefault(o.frame, []).append(o)
    ids: dict[int, list[int]] = {}
    errors = matched = missed = 0
    for f, gt in enumerate(gt_by_frame):
        outs = by_frame.get(f, [])
        for obj_id, (cls, box) in gt.items():
            ids.setdefault(obj_id, [])
            best = max(outs, key=lambda o: iou(o.bbox, box), default=None)
            if best is None or iou(best.bbox, box) < min_iou:
                if obj_id not in hidden_by_frame[f]:
                    missed += 1
                continue
            matched += 1
            errors += best.class_id != cls
            ids[obj_id].append(best.track_id)
    switches = sum(sum(a != b for a, b in zip(seq, seq[1:])) for seq in ids.values())
    frag = {k: len(set(v)) for k, v in ids.items()}
    return TrackingScore(errors, matched, frag, switches, missed)


def write_ground_truth(path, scenario: TrackingScenario) -> None:
    """One JSON line per (frame, object) with its box and visibility."""
    with open(path, "w") as fh:
        for f in range(scenario.n_frames):
            for o in scenario.objects:
                fh.write(json.dumps({"frame": f, "object_id": o.object_id, "class": o.class_id,
                                     "bbox": list(o.box(f)), "visible": not o.hidden(f)}) + "\n")


def read_ground_truth(path) -> tuple[list[dict], list[set]]:
    """Inverse of :func:`write_ground_truth`: per-frame boxes and hidden object sets."""
    gt: list[dict] = []
    hidden: list[set] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            r = json.loads(line)
            f = int(r["frame"])
            while len(gt) <= f:
                gt.append({})
                hidden.append(set())
            gt[f][int(r["object_id"])] = (int(r["class"]), tuple(float(v) for v in r["bbox"]))
            if not r["visible"]:
                hidden[f].add(int(r["object_id"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad ground-truth record ({exc})") from exc
    return gt, hidden


def write_detections(path, detections) -> None:
    with open(path, "w") as fh:
        for d in detections:
            rec = {"frame": d.frame, "bbox": list(d.bbox), "class": d.class_id,
                   "confidence": d.confidence}
            if d.object_id is not None:
                rec["object_id"] = d.object_id
            fh.write(json.dumps(rec) + "\n")


def read_detections(path) -> list[Detection]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            r = json.loads(line)
            out.append(Detection(int(r["frame"]), tuple(float(v) for v in r["bbox"]), int(r["class"]),
                                 float(r["confidence"]), r.get("object_id")))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad detection record ({exc})") from exc
    return out


def write_tracks(path, outputs) -> None:
    with open(path, "w") as fh:
        for o in outputs:
            fh.write(json.dumps({"frame": o.frame, "track_id": o.track_id, "class": o.class_id,
                                 "bbox": list(o.bbox), "source": o.source}) + "\n")


def read_tracks(path) -> list[TrackOutput]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            r = json.loads(line)
            out.append(TrackOutput(int(r["frame"]), int(r["track_id"]), int(r["class"]),
                                   tuple(float(v) for v in r["bbox"]), str(r["source"])))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad track record ({exc})") from exc
    return out
