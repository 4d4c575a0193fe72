"""Training loop, sliding-window inference and checkpoint files."""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from ..core import AdamWHyper, Parameter, adamw_step, cross_entropy, zero_grad
from ..timeline import ActionTimeline
from .config import SegmenterConfig, TrainHistory, TrainSchedule
from .model import SegmenterWeights, forward, init_weights

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "microseg-segmenter/1"


def predict_logits(clips, cfg: SegmenterConfig, W, batch_size: int = 64) -> np.ndarray:
    clips = np.asarray(clips, dtype=np.float64)
    out = [forward(clips[i : i + batch_size], cfg, W).data for i in range(0, len(clips), batch_size)]
    return np.concatenate(out) if out else np.zeros((0, cfg.num_classes))


def evaluate_clips(clips, labels, cfg, W, batch_size: int = 64) -> tuple[float, float]:
    """Mean cross-entropy and accuracy of target-frame predictions."""
    logits = predict_logits(clips, cfg, W, batch_size)
    labels = np.asarray(labels)
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-logp[np.arange(len(labels)), labels].mean())
    acc = float((logits.argmax(axis=1) == labels).mean())
    return loss, acc


def _scheduled_lr(schedule: TrainSchedule, step: int, total: int) -> float:
    warm = schedule.warmup_steps
    if step < warm:
        return schedule.lr * (step + 1) / warm
    if schedule.lr_schedule == "constant":
        return schedule.lr
    if schedule.lr_schedule == "cosine":
        frac = (step - warm) / max(total - warm, 1)
        return 0.5 * schedule.lr * (1.0 + np.cos(np.pi * frac))
    raise ValueError(f"unknown lr_schedule {schedule.lr_schedule!r}")


def _random_roll(batch: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = np.empty_like(batch)
    h, w = batch.shape[2:4]
    for i, clip in enumerate(batch):
        out[i] = np.roll(clip, (int(rng.integers(h)), int(rng.integers(w))), axis=(1, 2))
    return out


def train(clips, labels, cfg: SegmenterConfig, schedule: TrainSchedule = TrainSchedule(),
          val=None, weights: SegmenterWeights | None = None):
    """Minimise target-frame cross-entropy with layer-decayed AdamW.

    Returns ``(weights, history)``. ``val`` is an optional ``(clips, labels)`` pair
    scored after every epoch.
    """
    clips = np.asarray(clips, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(clips) == 0:
        raise ValueError("training set is empty")
    if len(clips) != len(labels):
        raise ValueError("clips and labels differ in length")
    if labels.min() < 0 or labels.max() >= cfg.num_classes:
        raise ValueError(f"labels must lie in 0..{cfg.num_classes - 1}")

    rng = np.random.default_rng(schedule.seed)
    W = weights if weights is not None else init_weights(cfg, seed=int(rng.integers(2**31)))
    params = W.parameters()
    hyper = AdamWHyper(schedule.beta1, schedule.beta2, 1e-8, schedule.weight_decay)
    history = TrainHistory()
    steps_per_epoch = -(-len(clips) // schedule.batch_size)
    total_steps = schedule.epochs * steps_per_epoch
    step = 0

    for epoch in range(schedule.epochs):
        order = rng.permutation(len(clips))
        losses, correct = [], 0
        for start in range(0, len(order), schedule.batch_size):
            idx = order[start : start + schedule.batch_size]
            batch = clips[idx]
            if schedule.augment_roll:
                batch = _random_roll(batch, rng)
            zero_grad(params)
            logits = forward(batch, cfg, W, training=True, rng=rng)
            loss = cross_entropy(logits, labels[idx])
            loss.backward()
            adamw_step(params, _scheduled_lr(schedule, step, total_steps), schedule.layer_decay, hyper)
            step += 1
            losses.append(float(loss.data) * len(idx))
            history.step_loss.append(float(loss.data))
            correct += int((logits.data.argmax(axis=1) == labels[idx]).sum())
        history.train_loss.append(sum(losses) / len(order))
        history.train_acc.append(correct / len(order))
        if val is not None:
            vl, va = evaluate_clips(val[0], val[1], cfg, W)
            history.val_loss.append(vl)
            history.val_acc.append(va)
        if schedule.log_every and (epoch + 1) % schedule.log_every == 0:
            log.info("epoch %d loss %.4f acc %.3f", epoch + 1, history.train_loss[-1],
                     history.train_acc[-1])
    return W, history


def trailing_windows(n_frames: int, T: int) -> np.ndarray:
    """Index array ``(n, T)``; row j ends at frame j, left-padded with frame 0."""
    j = np.arange(n_frames)[:, None]
    return np.clip(j - (T - 1) + np.arange(T)[None, :], 0, None)


def segment_video(frames, cfg: SegmenterConfig, W, batch_size: int = 64) -> ActionTimeline:
    """Label every frame by classifying the trailing T-frame window that ends on it."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 3:
        frames = frames[..., None]
    if len(frames) == 0:
        raise ValueError("empty frame stream")
    idx = trailing_windows(len(frames), cfg.frames_T)
    labels = []
    for start in range(0, len(idx), batch_size):
        clips = frames[idx[start : start + batch_size]]
        labels.append(forward(clips, cfg, W).data.argmax(axis=1))
    return ActionTimeline(np.concatenate(labels), cfg.fps, cfg.num_classes)


def save_checkpoint(path, cfg: SegmenterConfig, W: SegmenterWeights) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": cfg.to_dict(),
        "params": {
            name: {"shape": list(p.shape), "layer": p.layer_index,
                   "values": p.data.reshape(-1).tolist()}
            for name, p in sorted(W.items())
        },
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[SegmenterConfig, SegmenterWeights]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: unsupported checkpoint format {doc.get('format')!r}")
    cfg = SegmenterConfig.from_dict(doc["config"])
    W = SegmenterWeights()
    for name, entry in doc["params"].items():
        arr = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        W[name] = Parameter(arr, entry["layer"], name=name)
    expected = set(init_weights(cfg))
    if set(W) != expected:
        raise ValueError(f"{path}: parameter set does not match config")
    return cfg, W
