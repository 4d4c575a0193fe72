"""Toy videos: a small blurred square drifting one pixel per frame.

The drift direction encodes the class. Action class 0 ("No") renders an
empty, noisy frame; action ``c >= 1`` drifts along ``DIRECTIONS[c - 1]``.
"""
from __future__ import annotations

import numpy as np

# (row, col) steps
DIRECTIONS = ((0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (-1, -1))


def render_frame(pos, step, H: int, W: int, rng: np.random.Generator, noise: float = 0.05,
                 size: int = 4) -> np.ndarray:
    """One ``(H, W, 1)`` frame; ``step=None`` draws no object."""
    frame = np.zeros((H, W), dtype=np.float64)
    if step is not None:
        r, c = pos
        dr, dc = step
        rows = (r + np.arange(size)) % H
        cols = (c + np.arange(size)) % W
        # fading motion-blur trail behind the head
        for k, level in ((2, 0.3), (1, 0.6)):
            frame[np.ix_((rows - k * dr) % H, (cols - k * dc) % W)] = level
        frame[np.ix_(rows, cols)] = 1.0
    if noise:
        frame += rng.normal(0.0, noise, frame.shape)
    return frame[..., None]


def render_clip(direction: int, T: int, H: int, W: int, rng: np.random.Generator,
                noise: float = 0.05) -> np.ndarray:
    step = DIRECTIONS[direction]
    pos = np.array([rng.integers(H), rng.integers(W)])
    frames = []
    for _ in range(T):
        pos = (pos + step) % (H, W)
        frames.append(render_frame(pos, step, H, W, rng, noise))
    return np.stack(frames)


def moving_patch_dataset(n: int, num_classes: int = 3, T: int = 8, H: int = 8, W: int = 8,
                         seed: int = 0, noise: float = 0.05):
    """``n`` clips with balanced direction labels ``0..num_classes-1``."""
    if not 1 <= num_classes <= len(DIRECTIONS):
        raise ValueError(f"num_classes must be in 1..{len(DIRECTIONS)}")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % num_classes
    rng.shuffle(labels)
    clips = np.stack([render_clip(int(y), T, H, W, rng, noise) for y in labels])
    return clips, labels.astype(np.int64)


def render_action_video(labels, H: int = 8, W: int = 8, seed: int = 0,
                        noise: float = 0.05) -> np.ndarray:
    """Frames ``(N, H, W, 1)`` whose motion follows a per-frame action script."""
    rng = np.random.default_rng(seed)
    pos = np.array([rng.integers(H), rng.integers(W)])
    frames = []
    for a in np.asarray(labels):
        if a == 0:
            frames.append(render_frame(pos, None, H, W, rng, noise))
            continue
        step = DIRECTIONS[int(a) - 1]
        pos = (pos + step) % (H, W)
        frames.append(render_frame(pos, step, H, W, rng, noise))
    return np.stack(frames)


def action_clip_dataset(n: int, T: int = 8, H: int = 8, W: int = 8, num_classes: int = 7,
                        seed: int = 0, noise: float = 0.05):
    """Training clips for the 7-action toy video: the window ends in the labelled action.

    Earlier frames of a window may carry a different action so the model sees
    transitions; the target label is always the last frame's action.
    """
    rng = np.random.default_rng(seed)
    clips, labels = [], []
    for i in range(n):
        target = i % num_classes
        switch = int(rng.integers(0, T))  # frames before `switch` show another action
        other = int(rng.integers(num_classes))
        script = [other] * switch + [target] * (T - switch)
        clips.append(render_action_video(script, H, W, int(rng.integers(2**31)), noise))
        labels.append(target)
    order = rng.permutation(n)
    return np.stack(clips)[order], np.asarray(labels, dtype=np.int64)[order]
