"""Fixed-order skill feature vectors, one schema per graded aspect.

Schema ``microseg-features/1``:

* motion aspects (``instrument_handling``, ``needle_driving_motion``,
  ``knot_tying_motion``): presence flag, then mean/std/max/p95 of speed,
  acceleration and jerk for the driver and the scissors, then of distance,
  absolute relative speed and absolute angular displacement between them.
  Handling uses every frame, the other two only frames whose action lies in
  the aspect's classes.
* action aspects (``needle_driving_action``, ``knot_tying_action``): presence
  flag, fraction of procedure time in the aspect's classes, then per class the
  repetition count, cumulative seconds and mean/std/max instance duration.

Missing data is encoded as zeros with the presence flag at 0.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..labels import ACTION_NAMES, ASPECTS, Action
from ..timeline import ActionTimeline
from .series import ActionStats, KinematicSeries, RelativeSeries, summary

SCHEMA_VERSION = "microseg-features/1"
ROLES = ("driver", "scissors")
ROLE_OF_CLASS = {0: "driver", 1: "driver", 2: "scissors", 3: "scissors"}
STATS = ("mean", "std", "max", "p95")

NEEDLE_CLASSES = (Action.NEEDLE_HANDLING, Action.NEEDLE_TOUCH_VESSEL, Action.NEEDLE_WITHDRAWING)
KNOT_CLASSES = (Action.KNOT_TYING,)
ASPECT_CLASSES = {
    "instrument_handling": None,
    "needle_driving_motion": NEEDLE_CLASSES,
    "knot_tying_motion": KNOT_CLASSES,
    "needle_driving_action": NEEDLE_CLASSES,
    "knot_tying_action": KNOT_CLASSES,
}
MOTION_ASPECTS = ("instrument_handling", "needle_driving_motion", "knot_tying_motion")


def feature_names(aspect: str) -> list[str]:
    if aspect not in ASPECT_CLASSES:
        raise KeyError(f"unknown aspect {aspect!r}")
    names = ["present"]
    if aspect in MOTION_ASPECTS:
        for role in ROLES:
            for q in ("speed", "accel", "jerk"):
                names += [f"{role}_{q}_{s}" for s in STATS]
        for q in ("distance", "rel_speed", "angular"):
            names += [f"pair_{q}_{s}" for s in STATS]
    else:
        names.append("time_fraction")
        for c in ASPECT_CLASSES[aspect]:
            a = ACTION_NAMES[c]
            names += [f"{a}_count", f"{a}_cumulative_s", f"{a}_duration_mean",
                      f"{a}_duration_std", f"{a}_duration_max"]
    return names


@dataclass(frozen=True)
class SkillFeatureVector:
    aspect: str
    values: np.ndarray
    schema: str = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema != SCHEMA_VERSION:
            raise ValueError(f"schema {self.schema!r} does not match {SCHEMA_VERSION!r}")
        names = feature_names(self.aspect)
        if len(self.values) != len(names):
            raise ValueError(f"{self.aspect}: expected {len(names)} values, got {len(self.values)}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    @property
    def names(self) -> list[str]:
        return feature_names(self.aspect)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.values)))


def _frame_mask(frames, timeline: ActionTimeline, classes) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.int64)
    if classes is None:
        return np.ones(len(frames), dtype=bool)
    inside = (frames >= 0) & (frames < len(timeline))
    mask = np.zeros(len(frames), dtype=bool)
    mask[inside] = np.isin(timeline.labels[frames[inside]], np.asarray(classes))
    return mask


def _motion_features(kin: dict, rel: RelativeSeries | None, timeline: ActionTimeline,
                     classes) -> np.ndarray:
    parts = []
    seen = False
    for role in ROLES:
        series = kin.get(role)
        for q in ("speed", "accel", "jerk"):
            if series is None:
                parts.append(np.zeros(4))
                continue
            f, v = series.magnitude(q)
            sel = v[_frame_mask(f, timeline, classes)]
            seen |= sel.size > 0
            parts.append(summary(sel))
    if rel is None:
        parts += [np.zeros(4)] * 3
    else:
        m = _frame_mask(rel.frames, timeline, classes)
        ma = _frame_mask(rel.angle_frames, timeline, classes)
        seen |= bool(m.any())
        parts += [summary(rel.distance[m]), summary(np.abs(rel.relative_speed[m])),
                  summary(np.abs(rel.angular_displacement[ma]))]
    if not seen:
        return np.zeros(1 + 4 * 9)
    return np.concatenate([[1.0]] + parts)


def _action_features(stats: ActionStats, timeline: ActionTimeline, classes) -> np.ndarray:
    total = sum(stats.cumulative_frames(c) for c in classes)
    if total == 0:
        return np.zeros(2 + 5 * len(classes))
    out = [1.0, total / len(timeline)]
    for c in classes:
        d = np.asarray(stats.durations(c))
        if d.size:
            out += [float(d.size), stats.cumulative_time(c), d.mean(), d.std(), d.max()]
        else:
            out += [0.0] * 5
    return np.asarray(out)


def build_feature_vector(kin: dict[str, KinematicSeries], rel: RelativeSeries | None,
                         stats: ActionStats, timeline: ActionTimeline, aspect: str) -> SkillFeatureVector:
    """Feature vector for one aspect; ``kin`` maps instrument role to its series."""
    unknown = set(kin) - set(ROLES)
    if unknown:
        raise ValueError(f"unknown instrument roles {sorted(unknown)}")
    if stats.fps != timeline.fps:
        raise ValueError("action stats and timeline disagree on fps")
    classes = ASPECT_CLASSES[aspect]
    if aspect in MOTION_ASPECTS:
        values = _motion_features(kin, rel, timeline, classes)
    else:
        values = _action_features(stats, timeline, classes)
    return SkillFeatureVector(aspect, values)


def csv_header() -> list[str]:
    cols = ["procedure_id", "aspect", "schema"]
    for aspect in ASPECTS:
        for n in feature_names(aspect):
            if n not in cols:
                cols.append(n)
    return cols


def write_feature_csv(path, rows) -> None:
    """``rows``: iterable of ``(procedure_id, SkillFeatureVector)``; absent columns stay empty."""
    header = csv_header()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for pid, vec in rows:
            rec = dict.fromkeys(header, "")
            rec.update(procedure_id=pid, aspect=vec.aspect, schema=vec.schema)
            for n, v in vec.as_dict().items():
                rec[n] = repr(v)
            w.writerow([rec[c] for c in header])


def read_feature_csv(path) -> list[tuple[str, SkillFeatureVector]]:
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != csv_header():
            raise ValueError(f"{path}: header does not match schema {SCHEMA_VERSION}")
        for lineno, row in enumerate(reader, 2):
            try:
                names = feature_names(row["aspect"])
                vals = np.array([float(row[n]) for n in names])
                out.append((row["procedure_id"], SkillFeatureVector(row["aspect"], vals, row["schema"])))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out
