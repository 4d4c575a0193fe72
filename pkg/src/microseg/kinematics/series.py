"""Tip derivatives, inter-instrument relations and action-level timing."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..timeline import ActionTimeline


def split_runs(frames) -> list[np.ndarray]:
    """Index arrays of maximal runs of consecutive frame numbers."""
    frames = np.asarray(frames, dtype=np.int64)
    if frames.size == 0:
        return []
    if np.any(np.diff(frames) <= 0):
        raise ValueError("frames must be strictly increasing")
    cuts = np.flatnonzero(np.diff(frames) != 1) + 1
    return np.split(np.arange(frames.size), cuts)


def moving_average(x, window: int = 3) -> np.ndarray:
    """Centred moving average along axis 0; the window shrinks symmetrically at the ends.

    Linear sequences pass through unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    if window < 1 or window % 2 == 0:
        raise ValueError("smoothing window must be a positive odd integer")
    if window == 1 or len(x) < 3:
        return x.copy()
    half = window // 2
    n = len(x)
    csum = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)])
    idx = np.arange(n)
    r = np.minimum(np.minimum(idx, n - 1 - idx), half)
    out = (csum[idx + r + 1] - csum[idx - r]) / (2 * r + 1).reshape((-1,) + (1,) * (x.ndim - 1))
    return out


def _derivative(x: np.ndarray, dt: float) -> np.ndarray:
    # central differences inside, second-order one-sided at the ends
    return np.gradient(x, dt, axis=0, edge_order=2 if len(x) >= 3 else 1)


@dataclass
class KinematicSeries:
    """Derivatives of one tip track.

    Each derivative order keeps its own frame index: a run shorter than
    ``order + 1`` points contributes nothing to that order.
    """

    fps: float
    velocity_frames: np.ndarray
    velocity: np.ndarray  # (n, 2) px/s
    accel_frames: np.ndarray
    acceleration: np.ndarray  # (m, 2) px/s^2
    jerk_frames: np.ndarray
    jerk_vector: np.ndarray  # (k, 2) px/s^3

    @property
    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.velocity, axis=1)

    @property
    def accel(self) -> np.ndarray:
        return np.linalg.norm(self.acceleration, axis=1)

    @property
    def jerk(self) -> np.ndarray:
        return np.linalg.norm(self.jerk_vector, axis=1)

    def magnitude(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """``(frames, values)`` for ``speed``, ``accel`` or ``jerk``."""
        if name == "speed":
            return self.velocity_frames, self.speed
        if name == "accel":
            return self.accel_frames, self.accel
        if name == "jerk":
            return self.jerk_frames, self.jerk
        raise KeyError(name)


def differentiate(frames, xy, fps: float, smooth_window: int = 3) -> KinematicSeries:
    """Velocity, acceleration and jerk of a tip path, never across frame gaps."""
    if fps <= 0:
        raise ValueError("fps must be positive")
    frames = np.asarray(frames, dtype=np.int64).reshape(-1)
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    if len(frames) != len(xy):
        raise ValueError("frames and positions differ in length")
    if not np.all(np.isfinite(xy)):
        raise ValueError("positions must be finite")
    dt = 1.0 / fps
    parts: dict[int, tuple[list, list]] = {1: ([], []), 2: ([], []), 3: ([], [])}
    for run in split_runs(frames):
        if len(run) < 2:
            continue
        d = moving_average(xy[run], smooth_window)
        for order in (1, 2, 3):
            if len(run) < order + 1:
                break
            d = _derivative(d, dt)
            parts[order][0].append(frames[run])
            parts[order][1].append(d)

    def cat(order):
        f, v = parts[order]
        if not f:
            return np.zeros(0, dtype=np.int64), np.zeros((0, 2))
        return np.concatenate(f), np.concatenate(v)

    return KinematicSeries(fps, *cat(1), *cat(2), *cat(3))


def wrap_angle(a):
    """Map angles onto (-pi, pi]."""
    a = np.asarray(a, dtype=np.float64)
    return np.pi - np.mod(np.pi - a, 2 * np.pi)


@dataclass
class RelativeSeries:
    fps: float
    frames: np.ndarray
    distance: np.ndarray  # px
    relative_speed: np.ndarray  # signed d(distance)/dt, px/s
    angle_frames: np.ndarray  # later frame of each consecutive pair
    angular_displacement: np.ndarray  # rad/frame, in (-pi, pi]


def relative_features(frames_a, xy_a, frames_b, xy_b, fps: float) -> RelativeSeries:
    """Distance, its rate of change, and rotation of the A-B vector on common frames."""
    if fps <= 0:
        raise ValueError("fps must be positive")
    fa = np.asarray(frames_a, dtype=np.int64)
    fb = np.asarray(frames_b, dtype=np.int64)
    common, ia, ib = np.intersect1d(fa, fb, assume_unique=True, return_indices=True)
    diff = np.asarray(xy_a, dtype=np.float64)[ia] - np.asarray(xy_b, dtype=np.float64)[ib]
    dist = np.hypot(diff[:, 0], diff[:, 1])
    rel = np.zeros_like(dist)
    ang_f, ang = [], []
    theta = np.arctan2(diff[:, 1], diff[:, 0])
    for run in split_runs(common):
        if len(run) >= 2:
            rel[run] = _derivative(dist[run], 1.0 / fps)
            ang_f.append(common[run[1:]])
            ang.append(wrap_angle(np.diff(theta[run])))
    cat = (lambda xs, dt: np.concatenate(xs) if xs else np.zeros(0, dtype=dt))
    return RelativeSeries(fps, common, dist, rel, cat(ang_f, np.int64), cat(ang, np.float64))


@dataclass
class ActionStats:
    fps: float
    instance_frames: dict = field(default_factory=dict)  # class -> [run lengths]

    def count(self, c: int) -> int:
        return len(self.instance_frames.get(c, []))

    def durations(self, c: int) -> list[float]:
        return [n / self.fps for n in self.instance_frames.get(c, [])]

    def cumulative_frames(self, c: int) -> int:
        return sum(self.instance_frames.get(c, []))

    def cumulative_time(self, c: int) -> float:
        return self.cumulative_frames(c) / self.fps

    def cumulative_time_exact(self, c: int) -> Fraction:
        return Fraction(self.cumulative_frames(c)) / Fraction(self.fps)


def action_stats(t: ActionTimeline) -> ActionStats:
    stats = ActionStats(t.fps, {c: [] for c in range(t.num_classes)})
    for seg in t.segments():
        stats.instance_frames[seg.class_id].append(seg.length)
    return stats


def summary(values) -> np.ndarray:
    """``[mean, std, max, p95]`` of ``values``; zeros when empty."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return np.zeros(4)
    return np.array([v.mean(), v.std(), v.max(), np.percentile(v, 95)])
