from __future__ import annotations

import numpy as np

from ..timeline import ActionTimeline, run_length_encode


def _coalesce(runs: list[list[int]]) -> list[list[int]]:
    out: list[list[int]] = []
    for cls, n in runs:
        if out and out[-1][0] == cls:
            out[-1][1] += n
        else:
            out.append([cls, n])
    return out


def remove_short_segments(t: ActionTimeline, min_len: int = 5) -> ActionTimeline:
    """Absorb runs shorter than ``min_len`` frames into a neighbouring run.

    The shortest offending run (earliest on ties) is relabelled to its longer
    neighbour, preferring the preceding neighbour on equal length. Repeats
    until every run is long enough or one run is left.
    """
    if len(t) == 0:
        raise ValueError("empty timeline")
    runs = [[s.class_id, s.length] for s in run_length_encode(t.labels)]
    while len(runs) > 1:
        short = [(n, i) for i, (_, n) in enumerate(runs) if n < min_len]
        if not short:
            break
        _, i = min(short)
        left = runs[i - 1][1] if i > 0 else -1
        right = runs[i + 1][1] if i + 1 < len(runs) else -1
        target = i - 1 if left >= right else i + 1
        runs[i][0] = runs[target][0]
        runs = _coalesce(runs)
    labels = np.repeat([c for c, _ in runs], [n for _, n in runs])
    return t.with_labels(labels)


def flip_isolated_frames(labels, rate: float, rng: np.random.Generator,
                         num_classes: int = 7) -> np.ndarray:
    """Relabel about ``rate`` of the frames, never two adjacent ones, to a different class."""
    labels = np.array(labels, dtype=np.int64)
    n = labels.size
    target = int(round(rate * n))
    chosen: list[int] = []
    taken = np.zeros(n + 2, dtype=bool)
    for i in rng.permutation(n):
        if len(chosen) == target:
            break
        if taken[i] or taken[i + 2]:  # neighbours i-1 and i+1, shifted by one
            continue
        chosen.append(int(i))
        taken[i + 1] = True
    for i in chosen:
        labels[i] = (labels[i] + rng.integers(1, num_classes)) % num_classes
    return labels
