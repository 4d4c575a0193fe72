"""Video transformer for frame-level action recognition.

Each block runs temporal attention at several scales (the full window plus
trailing sub-windows that end at the target frame), averages the branches,
normalizes, then runs per-frame spatial attention on tokens rescaled by
softmax-normalized temporal variance. The CLS token is a pseudo-location of
its own for temporal attention and joins every frame's spatial attention.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import (
    Parameter,
    Tensor,
    as_tensor,
    broadcast_to,
    concat,
    dropout,
    gelu,
    layer_norm,
    scaled_dot_attention,
    softmax,
)
from .config import SegmenterConfig


@dataclass
class TokenSequence:
    """Clip tokens kept as a CLS part ``(B, d)`` and a patch grid ``(B, T, K, d)``.

    :attr:`tokens` gives the flat ``(B, 1 + T*K, d)`` layout with CLS first and
    patches in frame-major order.
    """

    cls: Tensor
    patches: Tensor

    @property
    def T(self) -> int:
        return self.patches.shape[1]

    @property
    def K(self) -> int:
        return self.patches.shape[2]

    @property
    def d(self) -> int:
        return self.patches.shape[3]

    @property
    def tokens(self) -> Tensor:
        b = self.patches.shape[0]
        flat = self.patches.reshape(b, self.T * self.K, self.d)
        return concat([self.cls.reshape(b, 1, self.d), flat], axis=1)

    @classmethod
    def from_tokens(cls, tokens, T: int, K: int) -> "TokenSequence":
        tokens = as_tensor(tokens)
        if tokens.ndim == 2:
            tokens = tokens.reshape(1, *tokens.shape)
        b, n, d = tokens.shape
        if n != 1 + T * K:
            raise ValueError(f"expected {1 + T * K} tokens, got {n}")
        return cls(tokens[:, 0, :], tokens[:, 1:, :].reshape(b, T, K, d))


@dataclass
class VarianceWeights:
    weights: Tensor  # (B, K)
    variances: Tensor  # (B, K)


class SegmenterWeights(dict):
    """Named parameters of one model, keyed like ``blocks.0.spatial.wq``."""

    def parameters(self) -> list[Parameter]:
        return list(self.values())

    def copy(self) -> "SegmenterWeights":
        out = SegmenterWeights()
        for k, p in self.items():
            out[k] = Parameter(p.data.copy(), p.layer_index, name=k)
        return out


def _temporal_scopes(cfg: SegmenterConfig) -> tuple[str, list[str]]:
    if cfg.share_temporal_weights:
        return "temporal", ["temporal"] * len(cfg.local_windows)
    return "temporal_global", [f"temporal_local{j}" for j in range(len(cfg.local_windows))]


def init_weights(cfg: SegmenterConfig, seed: int = 0) -> SegmenterWeights:
    rng = np.random.default_rng(seed)
    d, K, T = cfg.embed_d, cfg.num_patches, cfg.frames_T
    w = SegmenterWeights()

    def add(name, arr, layer):
        w[name] = Parameter(arr, layer, name=name)

    def dense(name, fan_in, fan_out, layer):
        std = np.sqrt(2.0 / (fan_in + fan_out))
        add(f"{name}.w", rng.normal(0.0, std, (fan_in, fan_out)), layer)
        add(f"{name}.b", np.zeros(fan_out), layer)

    def attention(prefix, layer):
        for p in ("q", "k", "v", "o"):
            dense(f"{prefix}.{p}", d, d, layer)

    def norm(prefix, layer):
        add(f"{prefix}.gain", np.ones(d), layer)
        add(f"{prefix}.bias", np.zeros(d), layer)

    dense("embed", cfg.patch_dim, d, 0)
    add("cls", rng.normal(0.0, 0.02, d), 0)
    add("pos.cls", rng.normal(0.0, 0.02, d), 0)
    if cfg.pos_encoding == "factorized":
        add("pos.spatial", rng.normal(0.0, 0.02, (K, d)), 0)
        add("pos.temporal", rng.normal(0.0, 0.02, (T, d)), 0)
    else:
        add("pos.joint", rng.normal(0.0, 0.02, (T, K, d)), 0)

    global_scope, local_scopes = _temporal_scopes(cfg)
    for b in range(cfg.num_blocks):
        layer = b + 1
        for scope in dict.fromkeys([global_scope, *local_scopes]):
            attention(f"blocks.{b}.{scope}", layer)
        norm(f"blocks.{b}.norm1", layer)
        attention(f"blocks.{b}.spatial", layer)
        norm(f"blocks.{b}.norm2", layer)
        dense(f"blocks.{b}.mlp1", d, cfg.mlp_ratio * d, layer)
        dense(f"blocks.{b}.mlp2", cfg.mlp_ratio * d, d, layer)

    head = cfg.num_blocks + 1
    norm("head.norm", head)
    dense("head.fc1", d, 2 * d, head)
    dense("head.fc2", 2 * d, cfg.num_classes, head)
    return w


def _linear(x, W, prefix):
    return x @ W[f"{prefix}.w"] + W[f"{prefix}.b"]


def multi_head_attention(x: Tensor, W, prefix: str, num_heads: int) -> Tensor:
    """Self-attention over axis -2 of ``x`` (``(..., n, d)``), independently per leading index."""
    lead, (n, d) = x.shape[:-2], x.shape[-2:]
    m = int(np.prod(lead)) if lead else 1
    dh = d // num_heads
    x = x.reshape(m, n, d)

    def split(t):
        return t.reshape(m, n, num_heads, dh).transpose(0, 2, 1, 3)

    q = split(_linear(x, W, f"{prefix}.q"))
    k = split(_linear(x, W, f"{prefix}.k"))
    v = split(_linear(x, W, f"{prefix}.v"))
    out = scaled_dot_attention(q, k, v).transpose(0, 2, 1, 3).reshape(m, n, d)
    out = _linear(out, W, f"{prefix}.o")
    return out.reshape(*lead, n, d)


def _as_batch(frames: np.ndarray, cfg: SegmenterConfig) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 3 and cfg.channels_C == 1:
        frames = frames[..., None]
    if frames.ndim == 4:
        frames = frames[None]
    expected = (cfg.frames_T, cfg.frame_H, cfg.frame_W, cfg.channels_C)
    if frames.ndim != 5 or frames.shape[1:] != expected:
        raise ValueError(f"clip shape {frames.shape} does not match (B,) + {expected}")
    if not np.isfinite(frames).all():
        raise ValueError("clip contains non-finite pixel values")
    return frames


def extract_patches(frames: np.ndarray, P: int) -> np.ndarray:
    """``(B, T, H, W, C)`` -> ``(B, T, K, P*P*C)``, patches in row-major grid order."""
    b, t, h, w, c = frames.shape
    x = frames.reshape(b, t, h // P, P, w // P, P, c).transpose(0, 1, 2, 4, 3, 5, 6)
    return x.reshape(b, t, (h // P) * (w // P), P * P * c)


def tokenize_clip(frames, cfg: SegmenterConfig, W) -> TokenSequence:
    """Patch-embed a clip and add learned positional encodings (once)."""
    clip = _as_batch(frames, cfg)
    b, d = clip.shape[0], cfg.embed_d
    patches = _linear(Tensor(extract_patches(clip, cfg.patch_P)), W, "embed")
    if cfg.pos_encoding == "factorized":
        K, T = cfg.num_patches, cfg.frames_T
        patches = patches + W["pos.spatial"].reshape(1, 1, K, d) + W["pos.temporal"].reshape(1, T, 1, d)
    else:
        patches = patches + W["pos.joint"].reshape(1, cfg.frames_T, cfg.num_patches, d)
    cls = broadcast_to((W["cls"] + W["pos.cls"]).reshape(1, d), (b, d))
    return TokenSequence(cls, patches)


def _cls_pseudo_location(cls: Tensor, W, scope: str, heads: int) -> Tensor:
    b, d = cls.shape
    return cls + multi_head_attention(cls.reshape(b, 1, d), W, scope, heads).reshape(b, d)


def global_temporal_attention(seq: TokenSequence, cfg: SegmenterConfig, W, block: int = 0,
                              scope: str | None = None) -> TokenSequence:
    """Attention across all T frames, run separately for each spatial location."""
    scope = f"blocks.{block}.{scope or _temporal_scopes(cfg)[0]}"
    by_loc = seq.patches.transpose(0, 2, 1, 3)  # (B, K, T, d)
    out = (by_loc + multi_head_attention(by_loc, W, scope, cfg.num_heads)).transpose(0, 2, 1, 3)
    return TokenSequence(_cls_pseudo_location(seq.cls, W, scope, cfg.num_heads), out)


def local_temporal_attention(seq: TokenSequence, window: int, target_frame: int | None,
                             cfg: SegmenterConfig, W, block: int = 0,
                             scope: str | None = None) -> TokenSequence:
    """Temporal attention restricted to the ``window`` frames ending at ``target_frame``.

    Frames outside the window pass through unchanged.
    """
    T = seq.T
    if target_frame is None:
        target_frame = T - 1
    if not 1 <= window <= T:
        raise ValueError(f"window {window} outside [1, {T}]")
    if not 0 <= target_frame < T or target_frame - window + 1 < 0:
        raise ValueError(f"window {window} ending at frame {target_frame} leaves the clip")
    if scope is None:
        scope = _temporal_scopes(cfg)[1][0] if cfg.local_windows else _temporal_scopes(cfg)[0]
    scope = f"blocks.{block}.{scope}"
    start, stop = target_frame - window + 1, target_frame + 1
    inside = seq.patches[:, start:stop].transpose(0, 2, 1, 3)
    inside = (inside + multi_head_attention(inside, W, scope, cfg.num_heads)).transpose(0, 2, 1, 3)
    parts = [p for p in (seq.patches[:, :start] if start else None, inside,
                         seq.patches[:, stop:] if stop < T else None) if p is not None]
    patches = concat(parts, axis=1) if len(parts) > 1 else inside
    return TokenSequence(_cls_pseudo_location(seq.cls, W, scope, cfg.num_heads), patches)


def aggregate_temporal(outputs: list[TokenSequence]) -> TokenSequence:
    """Equal-weight average of temporal branch outputs."""
    if not outputs:
        raise ValueError("nothing to aggregate")
    shape = outputs[0].patches.shape
    for o in outputs[1:]:
        if o.patches.shape != shape or o.cls.shape != outputs[0].cls.shape:
            raise ValueError("temporal branch outputs differ in shape")
    if len(outputs) == 1:
        return outputs[0]
    scale = 1.0 / len(outputs)
    cls, patches = outputs[0].cls, outputs[0].patches
    for o in outputs[1:]:
        cls, patches = cls + o.cls, patches + o.patches
    return TokenSequence(cls * scale, patches * scale)


def variance_weights(seq: TokenSequence) -> VarianceWeights:
    """Per-location temporal variance (squared norm about the time mean), softmaxed over locations."""
    x = seq.patches
    centered = x - x.mean(axis=1, keepdims=True)
    variances = (centered * centered).sum(axis=3).mean(axis=1)  # (B, K)
    return VarianceWeights(softmax(variances, axis=-1), variances)


def weighted_spatial_attention(seq: TokenSequence, vw: VarianceWeights, cfg: SegmenterConfig,
                               W, block: int = 0) -> TokenSequence:
    """Rescale each patch token by its location weight, then attend within every frame.

    The CLS token (unscaled) joins each frame; its update is averaged over frames.
    Residuals add back the unscaled input tokens.
    """
    b, T, K, d = seq.patches.shape
    scaled = seq.patches * vw.weights.reshape(b, 1, K, 1)
    cls = broadcast_to(seq.cls.reshape(b, 1, 1, d), (b, T, 1, d))
    out = multi_head_attention(concat([cls, scaled], axis=2), W, f"blocks.{block}.spatial",
                               cfg.num_heads)
    patches = seq.patches + out[:, :, 1:, :]
    new_cls = seq.cls + out[:, :, 0, :].mean(axis=1)
    return TokenSequence(new_cls, patches)


def _norm(seq: TokenSequence, W, prefix, eps) -> TokenSequence:
    g, bias = W[f"{prefix}.gain"], W[f"{prefix}.bias"]
    return TokenSequence(layer_norm(seq.cls, g, bias, eps), layer_norm(seq.patches, g, bias, eps))


def transformer_block(seq: TokenSequence, cfg: SegmenterConfig, W, block: int,
                      training: bool = False, rng=None) -> TokenSequence:
    global_scope, local_scopes = _temporal_scopes(cfg)
    branches = []
    if cfg.use_global:
        branches.append(global_temporal_attention(seq, cfg, W, block, global_scope))
    for window, scope in zip(cfg.local_windows, local_scopes):
        branches.append(local_temporal_attention(seq, window, None, cfg, W, block, scope))
    h = _norm(aggregate_temporal(branches), W, f"blocks.{block}.norm1", cfg.ln_eps)
    h = weighted_spatial_attention(h, variance_weights(h), cfg, W, block)

    def mlp(x):
        x = layer_norm(x, W[f"blocks.{block}.norm2.gain"], W[f"blocks.{block}.norm2.bias"], cfg.ln_eps)
        x = _linear(gelu(_linear(x, W, f"blocks.{block}.mlp1")), W, f"blocks.{block}.mlp2")
        return dropout(x, cfg.dropout, rng, training)

    return TokenSequence(h.cls + mlp(h.cls), h.patches + mlp(h.patches))


def classification_head(cls: Tensor, cfg: SegmenterConfig, W, training=False, rng=None) -> Tensor:
    x = layer_norm(cls, W["head.norm.gain"], W["head.norm.bias"], cfg.ln_eps)
    x = dropout(x, cfg.dropout, rng, training)
    return _linear(gelu(_linear(x, W, "head.fc1")), W, "head.fc2")


def forward(clip, cfg: SegmenterConfig, W, training: bool = False, rng=None) -> Tensor:
    """Logits for the target (last) frame of each clip.

    A single ``(T, H, W, C)`` clip yields shape ``(num_classes,)``; a batch
    ``(B, T, H, W, C)`` yields ``(B, num_classes)``.
    """
    single = np.ndim(clip) in (3, 4)
    seq = tokenize_clip(clip, cfg, W)
    for b in range(cfg.num_blocks):
        seq = transformer_block(seq, cfg, W, b, training, rng)
    logits = classification_head(seq.cls, cfg, W, training, rng)
    return logits.reshape(cfg.num_classes) if single else logits
