"""Detection/track fusion for surgical instruments.

A constant-velocity track is predicted forward each frame and matched to the
frame's detections by IoU. Three corrections run on top of plain tracking:

* confident detections overwrite the predicted box (drift correction),
* a track's class label only changes after ``anchor_k`` consecutive
  detections agree on a new class,
* a freshly spawned track takes over the ID of a recently lost track of the
  same class when time gap and box geometry agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class Detection:
    frame: int
    bbox: tuple  # (x, y, w, h), top-left origin, pixels
    class_id: int
    confidence: float
    object_id: int | None = None  # ground truth, synthetic scenarios only

    def __post_init__(self):
        x, y, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise ValueError(f"detection box needs positive size, got {self.bbox}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass
class FusionConfig:
    iou_gate: float = 0.3
    confidence_gate: float = 0.5
    max_age: int = 30
    reassign_max_gap: int = 60
    appearance_weight: float = 0.5
    anchor_k: int = 5
    class_bonus: float = 0.1
    velocity_gain: float = 0.5
    optimal_assignment: bool = False

    def __post_init__(self):
        for name in ("iou_gate", "confidence_gate"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.max_age < 1:
            raise ValueError("max_age must be >= 1")
        if self.anchor_k < 1:
            raise ValueError("anchor_k must be >= 1")


@dataclass(eq=False)
class Track:
    track_id: int
    anchored_class: int
    bbox: np.ndarray  # (x, y, w, h)
    velocity: np.ndarray  # (vx, vy) px/frame
    last_seen_frame: int
    state_frame: int
    first_frame: int
    history: list = field(default_factory=list)  # (frame, bbox tuple, source)
    pending_class: int | None = None
    pending_count: int = 0
    has_velocity: bool = False
    source: str = "detection"
    votes: list = field(default_factory=list)  # detected classes while provisional
    provisional: bool = False  # young spawned track still eligible for reassignment

    @property
    def age(self) -> int:
        return self.state_frame - self.first_frame + 1

    @property
    def last_box(self) -> tuple:
        """Box at the most recent detection-backed update."""
        for _, box, source in reversed(self.history):
            if source == "detection":
                return box
        return tuple(self.bbox)


@dataclass(frozen=True)
class TrackOutput:
    frame: int
    track_id: int
    class_id: int
    bbox: tuple
    source: str


@dataclass
class TrackerState:
    active: list = field(default_factory=list)
    retired: list = field(default_factory=list)
    next_id: int = 1
    last_frame: int | None = None
    # provisional ID -> (inherited ID, inherited class) for retrospective relabelling
    aliases: dict = field(default_factory=dict)


def iou(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return min(1.0, inter / (aw * ah + bw * bh - inter))  # rounding can push equal boxes past 1


def _center(b) -> np.ndarray:
    return np.array([b[0] + b[2] / 2.0, b[1] + b[3] / 2.0])


def predict(track: Track, frame: int) -> None:
    dt = frame - track.state_frame
    if dt > 0:
        track.bbox = track.bbox.copy()
        track.bbox[:2] += track.velocity * dt
        track.state_frame = frame
    track.source = "prediction"


def refine_with_detection(track: Track, det: Detection, cfg: FusionConfig) -> bool:
    """Snap the track box to a confident overlapping detection; returns whether it applied."""
    if det.confidence < cfg.confidence_gate or iou(track.bbox, det.bbox) < cfg.iou_gate:
        return False
    new_box = np.asarray(det.bbox, dtype=np.float64)
    prev = next((h for h in reversed(track.history) if h[2] == "detection"), None)
    if prev is not None and det.frame > prev[0]:
        measured = (_center(new_box) - _center(prev[1])) / (det.frame - prev[0])
        if track.has_velocity:
            track.velocity = track.velocity + cfg.velocity_gain * (measured - track.velocity)
        else:
            track.velocity = measured
            track.has_velocity = True
    track.bbox = new_box
    track.state_frame = det.frame
    track.last_seen_frame = det.frame
    track.source = "detection"
    return True


def anchor_class_label(track: Track, det: Detection, k: int = 5) -> int:
    """Keep the anchored class unless ``k`` consecutive detections agree on another one."""
    if det.class_id == track.anchored_class:
        track.pending_class, track.pending_count = None, 0
    elif det.class_id == track.pending_class:
        track.pending_count += 1
    else:
        track.pending_class, track.pending_count = det.class_id, 1
    if track.pending_count >= k:
        track.anchored_class = track.pending_class
        track.pending_class, track.pending_count = None, 0
    return track.anchored_class


def appearance_similarity(a, b) -> float:
    """Box-geometry proxy for appearance: shape cosine and area ratio, averaged."""
    wa, ha = a[2], a[3]
    wb, hb = b[2], b[3]
    cos = (wa * wb + ha * hb) / (math.hypot(wa, ha) * math.hypot(wb, hb))
    area = min(wa * ha, wb * hb) / max(wa * ha, wb * hb)
    return 0.5 * (cos + area)


def reassignment_score(new: Track, old: Track, cfg: FusionConfig, class_id: int | None = None) -> float | None:
    """Score for handing ``old``'s ID to ``new``; ``None`` when class or gap rule it out.

    ``class_id`` overrides ``new``'s anchored class (used for the vote of a young track).
    """
    cls = new.anchored_class if class_id is None else class_id
    gap = new.first_frame - old.last_seen_frame - 1  # frames without a detection
    if old.anchored_class != cls or gap < 0 or gap > cfg.reassign_max_gap:
        return None
    proximity = 1.0 - gap / (cfg.reassign_max_gap + 1)
    return proximity + cfg.appearance_weight * appearance_similarity(new.bbox, old.last_box)


def reassign_identity(new: Track, candidates: list, cfg: FusionConfig,
                      class_id: int | None = None) -> Track | None:
    """Best candidate whose ID ``new`` should inherit (ties go to the lowest ID)."""
    best, best_score = None, -math.inf
    for old in sorted(candidates, key=lambda t: t.track_id):
        if old is new:
            continue
        s = reassignment_score(new, old, cfg, class_id)
        if s is not None and s > best_score:
            best, best_score = old, s
    return best


def _associate(tracks, dets, cfg: FusionConfig) -> list[tuple[int, int]]:
    scores = np.full((len(tracks), len(dets)), -np.inf)
    for i, t in enumerate(tracks):
        for j, d in enumerate(dets):
            o = iou(t.bbox, d.bbox)
            if o >= cfg.iou_gate:
                scores[i, j] = o + (cfg.class_bonus if d.class_id == t.anchored_class else 0.0)
    if cfg.optimal_assignment and scores.size:
        finite = np.isfinite(scores)
        cost = np.where(finite, -scores, 1e6)
        rows, cols = linear_sum_assignment(cost)
        return [(int(i), int(j)) for i, j in zip(rows, cols) if finite[i, j]]
    pairs = sorted(
        ((-scores[i, j], i, j) for i in range(len(tracks)) for j in range(len(dets))
         if np.isfinite(scores[i, j])),
    )
    used_t, used_d, out = set(), set(), []
    for _, i, j in pairs:
        if i in used_t or j in used_d:
            continue
        used_t.add(i)
        used_d.add(j)
        out.append((i, j))
    return out


def step(frame: int, detections, state: TrackerState, cfg: FusionConfig) -> list[TrackOutput]:
    """Advance the tracker by one frame and return the state of every active track."""
    if state.last_frame is not None and frame <= state.last_frame:
        raise ValueError(f"frame {frame} does not follow {state.last_frame}")
    state.last_frame = frame
    dets = [d for d in detections if d.frame == frame]
    if len(dets) != len(detections):
        raise ValueError(f"detections for other frames passed to step({frame})")

    for t in state.active:
        predict(t, frame)

    matches = _associate(state.active, dets, cfg)
    matched_tracks = set()
    matched_dets = set()
    for i, j in matches:
        track, det = state.active[i], dets[j]
        matched_tracks.add(i)
        matched_dets.add(j)
        anchor_class_label(track, det, cfg.anchor_k)
        if track.provisional:
            track.votes.append(det.class_id)
        if not refine_with_detection(track, det, cfg):
            track.last_seen_frame = frame

    spawned = []
    for j, det in enumerate(dets):
        if j in matched_dets or det.confidence < cfg.confidence_gate:
            continue
        spawned.append(Track(
            track_id=-1, anchored_class=det.class_id, bbox=np.asarray(det.bbox, dtype=np.float64),
            velocity=np.zeros(2), last_seen_frame=frame, state_frame=frame, first_frame=frame,
            votes=[det.class_id], provisional=True,
        ))

    still_active = []
    for t in state.active:
        if frame - t.last_seen_frame > cfg.max_age:
            state.retired.append(t)
        else:
            still_active.append(t)
    state.active = still_active
    # keep retired tracks while a provisional track could still claim them
    keep = cfg.reassign_max_gap + cfg.anchor_k
    state.retired = [t for t in state.retired if frame - t.last_seen_frame - 1 <= keep]

    for new in spawned:
        new.track_id = state.next_id
        state.next_id += 1
        state.active.append(new)

    # young tracks may still inherit an ID once one class holds a majority of the anchoring
    # window, so a single flipped detection neither blocks nor misdirects the match
    for new in sorted((t for t in state.active if t.provisional), key=lambda t: t.track_id):
        if new.age > cfg.anchor_k or new not in state.active:
            new.provisional = False
            continue
        top = max(map(new.votes.count, new.votes))
        if top < cfg.anchor_k // 2 + 1 and new.age < cfg.anchor_k:
            continue  # wait for a majority of the anchoring window
        lost = [t for t in state.active if t.last_seen_frame < frame]
        old = None
        for vote in dict.fromkeys(c for c in new.votes if new.votes.count(c) == top):
            old = reassign_identity(new, state.retired + lost, cfg, vote)
            if old is not None:
                break
        if old is None:
            continue
        if new.first_frame < frame:
            state.aliases[new.track_id] = (old.track_id, old.anchored_class)
        new.track_id = old.track_id
        new.anchored_class = old.anchored_class
        new.pending_class, new.pending_count = None, 0
        new.history = list(old.history) + new.history
        new.provisional = False
        if old in state.retired:
            state.retired.remove(old)
        else:
            state.active.remove(old)

    outputs = []
    for t in sorted(state.active, key=lambda t: t.track_id):
        box = tuple(float(v) for v in t.bbox)
        t.history.append((frame, box, t.source))
        outputs.append(TrackOutput(frame, t.track_id, t.anchored_class, box, t.source))
    return outputs


def run_tracker(detections, cfg: FusionConfig = FusionConfig(), frames=None) -> list[TrackOutput]:
    """Track a whole detection stream; ``frames`` defaults to every frame that has detections."""
    by_frame: dict[int, list] = {}
    for d in detections:
        by_frame.setdefault(d.frame, []).append(d)
    if frames is None:
        frames = sorted(by_frame)
    state = TrackerState()
    out = []
    for f in frames:
        out.extend(step(f, by_frame.get(f, []), state, cfg))
    return relabel_aliases(out, state.aliases)


def relabel_aliases(outputs, aliases: dict) -> list[TrackOutput]:
    """Rewrite outputs of provisional IDs that later inherited an older identity."""
    if not aliases:
        return list(outputs)

    def resolve(tid):
        cls = None
        while tid in aliases:
            tid, cls = aliases[tid]
        return tid, cls

    out = []
    for o in outputs:
        if o.track_id in aliases:
            tid, cls = resolve(o.track_id)
            o = TrackOutput(o.frame, tid, cls, o.bbox, o.source)
        out.append(o)
    return out
