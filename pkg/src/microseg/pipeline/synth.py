"""Synthetic procedures with known ground truth.

A procedure is an action script (grammar-valid), two instrument tips moving
with skill-dependent smoothness, and five aspect scores on a 1-5 scale. The
demo procedure additionally gets rendered frames, noisy detections and
instrument silhouettes so every stage can run on it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..labels import ASPECTS, Action
from ..segmenter.synthetic import render_action_video
from ..timeline import ActionTimeline
from ..tips import TEMPLATES, TipTrajectory, instrument_silhouette, rotate, wedge_polygon
from ..tracking import NoiseModel, ObjectScript, TrackingScenario

SUTURE_CYCLE = (Action.NEEDLE_HANDLING, Action.NEEDLE_TOUCH_VESSEL, Action.NEEDLE_WITHDRAWING,
                Action.KNOT_TYING, Action.KNOT_CUTTING)
INSTRUMENTS = {"driver": 0, "scissors": 2}  # role -> instrument class
POINTING = {"driver": 0.35, "scissors": np.pi - 0.35}  # tip heading, radians


def action_script(skill: float, rng: np.random.Generator, sutures: int = 2) -> np.ndarray:
    """Frame labels for one procedure; lower skill means longer and repeated needle phases."""
    slow = 1.0 + 1.5 * (1.0 - skill)

    def dur(base):
        return max(6, int(round(base * slow * rng.uniform(0.8, 1.2))))

    runs = [(Action.NO, dur(10)), (Action.VESSEL_CUTTING, dur(15))]
    for _ in range(sutures):
        retries = int(rng.binomial(3, 1.0 - skill))
        for _ in range(retries):
            runs += [(Action.NEEDLE_HANDLING, dur(10)), (Action.NEEDLE_TOUCH_VESSEL, dur(8)),
                     (Action.NEEDLE_WITHDRAWING, dur(8)), (Action.NO, dur(6))]
        runs += [(a, dur(b)) for a, b in zip(SUTURE_CYCLE, (12, 10, 10, 25, 8))]
        runs.append((Action.NO, dur(8)))
    return np.concatenate([np.full(n, int(a), dtype=np.int64) for a, n in runs])


def tip_paths(labels, skill: float, rng: np.random.Generator, frame_size=(640, 480)):
    """Smooth drifts plus tremor; tremor and its roughness grow as skill drops.

    Returns ``{role: (n, 2) positions}``.
    """
    n = len(labels)
    t = np.arange(n)
    w, h = frame_size
    out = {}
    for k, role in enumerate(("driver", "scissors")):
        busy = np.isin(labels, (2, 3, 4, 5)) if role == "driver" else np.isin(labels, (1, 6))
        gain = np.where(busy, 1.0, 0.3)
        phase = rng.uniform(0, 2 * np.pi, 2)
        base = np.c_[
            (0.3 + 0.4 * k) * w + 40 * np.sin(2 * np.pi * t / 90 + phase[0]),
            0.5 * h + 30 * np.sin(2 * np.pi * t / 70 + phase[1]),
        ]
        tremor_amp = 0.3 + 3.0 * (1.0 - skill)
        tremor = np.cumsum(rng.normal(0.0, tremor_amp, (n, 2)), axis=0)
        tremor -= np.linspace(0, 1, n)[:, None] * tremor[-1]  # pin the walk's end back to zero
        out[role] = base + gain[:, None] * tremor + rng.normal(0.0, tremor_amp * 0.5, (n, 2))
    return out


def aspect_scores(skill: float, rng: np.random.Generator, spread: float = 0.25) -> dict[str, float]:
    """Likert scores per aspect: the latent skill plus per-aspect noise, clipped to [1, 5]."""
    return {a: float(np.clip(1.0 + 4.0 * (skill + rng.normal(0.0, spread * 0.4)), 1.0, 5.0))
            for a in ASPECTS}


@dataclass
class Procedure:
    procedure_id: str
    skill: float
    timeline: ActionTimeline
    tips: dict  # role -> (n, 2)
    scores: dict

    def tip_trajectory(self) -> TipTrajectory:
        traj = TipTrajectory()
        for tid, (role, xy) in enumerate(sorted(self.tips.items()), start=1):
            for f, p in enumerate(xy):
                traj.add(f, tid, p, INSTRUMENTS[role])
        return traj


def make_procedure(pid: str, skill: float, rng: np.random.Generator, fps: float = 10.0) -> Procedure:
    labels = action_script(skill, rng)
    return Procedure(pid, skill, ActionTimeline(labels, fps), tip_paths(labels, skill, rng),
                     aspect_scores(skill, rng))


def make_cohort(n: int, rng: np.random.Generator, fps: float = 10.0) -> list[Procedure]:
    """``n`` procedures with skills spread evenly over [0, 1] then shuffled."""
    skills = rng.permutation(np.linspace(0.0, 1.0, n))
    return [make_procedure(f"P{i:03d}", float(s), rng, fps) for i, s in enumerate(skills)]


def _template_box(role: str) -> tuple[tuple, np.ndarray]:
    """Size of the rotated template's bounding box and its centre relative to the apex."""
    poly = rotate(wedge_polygon(*TEMPLATES[INSTRUMENTS[role]]), POINTING[role])
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    return (float(hi[0] - lo[0]), float(hi[1] - lo[1])), (lo + hi) / 2.0


class ScriptedPath(ObjectScript):
    """Object whose box centre follows a sampled path."""

    def __init__(self, object_id: int, class_id: int, size: tuple, centres: np.ndarray, gaps=()):
        super().__init__(object_id, class_id, size, tuple(centres[0]), gaps=list(gaps))
        self.centres = centres

    def box(self, frame: int) -> tuple:
        cx, cy = self.centres[frame]
        w, h = self.size
        return (float(cx - w / 2), float(cy - h / 2), float(w), float(h))


@dataclass
class DemoData:
    procedure: Procedure
    frames: np.ndarray  # (n, H, W, 1)
    scenario: TrackingScenario
    apex_offsets: dict  # object_id -> box-centre minus apex

    def silhouettes(self):
        """``(frame, object_id, Silhouette)`` for every visible instrument."""
        out = []
        for f in range(self.scenario.n_frames):
            for obj in self.scenario.objects:
                if obj.hidden(f):
                    continue
                role = "driver" if obj.class_id == INSTRUMENTS["driver"] else "scissors"
                out.append((f, obj.object_id,
                            instrument_silhouette(obj.class_id, self.procedure.tips[role][f], POINTING[role])))
        return out


def make_demo(rng: np.random.Generator, skill: float = 0.6, frame_hw=(8, 8), fps: float = 10.0,
              noise: NoiseModel | None = None, gaps=((), ())) -> DemoData:
    proc = make_procedure("demo", skill, rng, fps)
    frames = render_action_video(proc.timeline.labels, *frame_hw, seed=int(rng.integers(2**31)))
    objects, offsets = [], {}
    for oid, role in enumerate(("driver", "scissors")):
        size, off = _template_box(role)
        objects.append(ScriptedPath(oid, INSTRUMENTS[role], size, proc.tips[role] + off, gaps[oid]))
        offsets[oid] = off
    scen = TrackingScenario(objects, len(proc.timeline), noise or NoiseModel(), seed=int(rng.integers(2**31)))
    return DemoData(proc, frames, scen, offsets)
