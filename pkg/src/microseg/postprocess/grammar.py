"""Transition grammar over action classes and timeline repair."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..labels import Action, NUM_ACTIONS
from ..timeline import ActionTimeline, run_length_encode

GRAMMAR_FORMAT = "microseg-grammar/1"

SUTURE_CYCLE = (
    Action.NEEDLE_HANDLING,
    Action.NEEDLE_TOUCH_VESSEL,
    Action.NEEDLE_WITHDRAWING,
    Action.KNOT_TYING,
    Action.KNOT_CUTTING,
)


@dataclass
class ActionGrammar:
    """Allowed ``(from, to)`` transitions between adjacent runs, plus repair overrides.

    ``repairs`` maps ``(prev, self)`` to the class an invalid run should take.
    Class 0 must be reachable from and lead to every class so any timeline can
    be repaired by falling back to it.
    """

    allowed: frozenset
    repairs: dict = field(default_factory=dict)
    num_classes: int = NUM_ACTIONS
    fallback: int = 0

    def __post_init__(self):
        self.allowed = frozenset((int(a), int(b)) for a, b in self.allowed)
        for c in range(self.num_classes):
            if c == self.fallback:
                continue
            if (c, self.fallback) not in self.allowed or (self.fallback, c) not in self.allowed:
                raise ValueError(f"fallback class {self.fallback} must connect both ways with {c}")

    def valid(self, a: int, b: int) -> bool:
        return a == b or (a, b) in self.allowed

    def violations(self, t: ActionTimeline) -> list[tuple[int, int]]:
        segs = run_length_encode(t.labels)
        return [(a.class_id, b.class_id) for a, b in zip(segs, segs[1:])
                if not self.valid(a.class_id, b.class_id)]

    def successors(self, a: int) -> list[int]:
        return sorted(b for (x, b) in self.allowed if x == a and b != self.fallback)

    def to_json(self) -> dict:
        return {
            "format": GRAMMAR_FORMAT,
            "num_classes": self.num_classes,
            "fallback": self.fallback,
            "allowed": sorted([a, b] for a, b in self.allowed),
            "repairs": [{"prev": p, "self": s, "to": c} for (p, s), c in sorted(self.repairs.items())],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ActionGrammar":
        if doc.get("format") != GRAMMAR_FORMAT:
            raise ValueError(f"unsupported grammar format {doc.get('format')!r}")
        repairs = {(int(r["prev"]), int(r["self"])): int(r["to"]) for r in doc.get("repairs", [])}
        return cls(frozenset(map(tuple, doc["allowed"])), repairs, doc.get("num_classes", NUM_ACTIONS),
                   doc.get("fallback", 0))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ActionGrammar":
        return cls.from_json(json.loads(Path(path).read_text()))


def default_grammar() -> ActionGrammar:
    """Procedure order: vessel cutting, then repeated suture cycles; "No" anywhere."""
    allowed = set()
    for c in range(1, NUM_ACTIONS):
        allowed |= {(0, c), (c, 0)}
    allowed.add((int(Action.VESSEL_CUTTING), int(Action.NEEDLE_HANDLING)))
    cycle = [int(a) for a in SUTURE_CYCLE]
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        allowed.add((a, b))
    return ActionGrammar(frozenset(allowed))


def _repair_class(g: ActionGrammar, prev: int, cur: int, nxt: int | None) -> int:
    def fits(c):
        return g.valid(prev, c) and (nxt is None or g.valid(c, nxt))

    candidates = []
    if (prev, cur) in g.repairs:
        candidates.append(g.repairs[(prev, cur)])
    candidates += g.successors(prev)
    candidates += [prev] + ([nxt] if nxt is not None else [])
    for c in candidates:
        if fits(c):
            return c
    return g.fallback


def apply_grammar(t: ActionTimeline, g: ActionGrammar) -> ActionTimeline:
    """Relabel every run that follows its predecessor illegally.

    Scans left to right; the offending (later) run takes the first class that
    is legal on both sides, trying the repair table, the predecessor's
    successors, merging into either neighbour, then the fallback class.
    """
    runs = [[s.class_id, s.length] for s in run_length_encode(t.labels)]
    i = 1
    while i < len(runs):
        prev, cur = runs[i - 1][0], runs[i][0]
        if g.valid(prev, cur):
            i += 1
            continue
        nxt = runs[i + 1][0] if i + 1 < len(runs) else None
        runs[i][0] = _repair_class(g, prev, cur, nxt)
        merged: list[list[int]] = []
        for c, n in runs:
            if merged and merged[-1][0] == c:
                merged[-1][1] += n
            else:
                merged.append([c, n])
        runs = merged
        i = max(1, i - 1)
    if not runs:
        return t
    labels = np.repeat([c for c, _ in runs], [n for _, n in runs])
    return t.with_labels(labels)
