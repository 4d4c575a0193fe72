"""Per-frame action labels and their run-length segment view."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .labels import ACTION_NAMES, NUM_ACTIONS


@dataclass(frozen=True)
class Segment:
    class_id: int
    start_frame: int
    end_frame: int  # inclusive

    def __post_init__(self):
        if self.start_frame > self.end_frame:
            raise ValueError(f"segment start {self.start_frame} after end {self.end_frame}")

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1


def run_length_encode(labels) -> list[Segment]:
    labels = np.asarray(labels)
    if labels.size == 0:
        return []
    change = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change - 1, [labels.size - 1]))
    return [Segment(int(labels[s]), int(s), int(e)) for s, e in zip(starts, ends)]


def run_length_decode(segments) -> np.ndarray:
    if not segments:
        return np.zeros(0, dtype=np.int64)
    out = np.empty(segments[-1].end_frame + 1, dtype=np.int64)
    expected = 0
    for seg in segments:
        if seg.start_frame != expected:
            raise ValueError("segments are not contiguous")
        out[seg.start_frame : seg.end_frame + 1] = seg.class_id
        expected = seg.end_frame + 1
    return out


class ActionTimeline:
    """Frame-level class IDs sampled at ``fps``."""

    def __init__(self, labels, fps: float = 10.0, num_classes: int = NUM_ACTIONS):
        arr = np.asarray(labels, dtype=np.int64).reshape(-1)
        if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
            raise ValueError(f"labels must lie in 0..{num_classes - 1}")
        if fps <= 0:
            raise ValueError("fps must be positive")
        arr.setflags(write=False)
        self.labels = arr
        self.fps = float(fps)
        self.num_classes = num_classes

    @classmethod
    def from_segments(cls, segments, fps: float = 10.0) -> "ActionTimeline":
        return cls(run_length_decode(list(segments)), fps)

    def __len__(self) -> int:
        return int(self.labels.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ActionTimeline)
            and self.fps == other.fps
            and np.array_equal(self.labels, other.labels)
        )

    def __repr__(self):
        return f"ActionTimeline(n={len(self)}, fps={self.fps}, segments={len(self.segments())})"

    def segments(self) -> list[Segment]:
        return run_length_encode(self.labels)

    @property
    def duration_s(self) -> float:
        return len(self) / self.fps

    def with_labels(self, labels) -> "ActionTimeline":
        return ActionTimeline(labels, self.fps, self.num_classes)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frame_index", "class_id", "class_name"])
            for i, c in enumerate(self.labels):
                w.writerow([i, int(c), ACTION_NAMES[c]])

    @classmethod
    def from_csv(cls, path, fps: float = 10.0) -> "ActionTimeline":
        rows = list(csv.DictReader(Path(path).open(newline="")))
        for i, row in enumerate(rows):
            if int(row["frame_index"]) != i:
                raise ValueError(f"{path}: frame_index {row['frame_index']} out of order at row {i + 2}")
        return cls([int(r["class_id"]) for r in rows], fps)
