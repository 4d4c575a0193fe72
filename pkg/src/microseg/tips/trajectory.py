from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


class TipTrajectory:
    """Tip positions keyed by ``(frame, track_id)``; at most one point per key."""

    def __init__(self, frame_size: tuple | None = None):
        self.frame_size = frame_size
        self._points: dict[tuple[int, int], tuple[float, float, int]] = {}

    def add(self, frame: int, track_id: int, point, class_id: int = -1) -> None:
        key = (int(frame), int(track_id))
        if key in self._points:
            raise ValueError(f"duplicate tip for frame {frame}, track {track_id}")
        x, y = float(point[0]), float(point[1])
        if self.frame_size is not None:
            w, h = self.frame_size
            if not (0 <= x <= w and 0 <= y <= h):
                raise ValueError(f"tip ({x}, {y}) outside the {w}x{h} frame")
        self._points[key] = (x, y, int(class_id))

    def __len__(self) -> int:
        return len(self._points)

    def track_ids(self) -> list[int]:
        return sorted({t for _, t in self._points})

    def track(self, track_id: int) -> tuple[np.ndarray, np.ndarray]:
        """``(frames, xy)`` for one track, sorted by frame."""
        items = sorted((f, p) for (f, t), p in self._points.items() if t == track_id)
        frames = np.array([f for f, _ in items], dtype=np.int64)
        xy = np.array([p[:2] for _, p in items], dtype=np.float64).reshape(-1, 2)
        return frames, xy

    def track_class(self, track_id: int) -> int:
        classes = [p[2] for (f, t), p in self._points.items() if t == track_id]
        return max(set(classes), key=classes.count) if classes else -1

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frame", "track_id", "class", "x", "y"])
            for (f, t), (x, y, c) in sorted(self._points.items()):
                w.writerow([f, t, c, repr(x), repr(y)])

    @classmethod
    def from_csv(cls, path, frame_size=None) -> "TipTrajectory":
        traj = cls(frame_size)
        with Path(path).open(newline="") as fh:
            for row in csv.DictReader(fh):
                traj.add(int(row["frame"]), int(row["track_id"]), (float(row["x"]), float(row["y"])),
                         int(row["class"]))
        return traj

    @classmethod
    def from_arrays(cls, track_id: int, frames, xy, class_id: int = -1) -> "TipTrajectory":
        traj = cls()
        for f, p in zip(frames, xy):
            traj.add(int(f), track_id, p, class_id)
        return traj

    def merge(self, other: "TipTrajectory") -> "TipTrajectory":
        out = TipTrajectory(self.frame_size)
        for src in (self, other):
            for (f, t), (x, y, c) in src._points.items():
                out.add(f, t, (x, y), c)
        return out
