from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from ..labels import NUM_ACTIONS


@dataclass
class SegmenterConfig:
    """Shape and architecture settings for the video transformer.

    ``local_windows`` defaults to ``[T // 2, T // 4]`` (clamped to at least 1).
    """

    frames_T: int = 16
    patch_P: int = 16
    frame_H: int = 32
    frame_W: int = 32
    channels_C: int = 1
    embed_d: int = 64
    num_blocks: int = 2
    num_heads: int = 4
    num_classes: int = NUM_ACTIONS
    local_windows: list[int] | None = None
    fps: float = 10.0
    dropout: float = 0.1
    mlp_ratio: int = 2
    ln_eps: float = 1e-5
    share_temporal_weights: bool = True
    use_global: bool = True
    pos_encoding: str = "factorized"

    def __post_init__(self):
        if self.local_windows is None:
            self.local_windows = [max(1, self.frames_T // 2), max(1, self.frames_T // 4)]
        self.local_windows = [int(w) for w in self.local_windows]
        for name in ("frames_T", "patch_P", "frame_H", "frame_W", "channels_C", "embed_d",
                     "num_heads", "num_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.num_blocks < 0:
            raise ValueError("num_blocks must be >= 0")
        if self.frame_H % self.patch_P or self.frame_W % self.patch_P:
            raise ValueError(
                f"frame {self.frame_H}x{self.frame_W} not divisible by patch size {self.patch_P}"
            )
        if self.embed_d % self.num_heads:
            raise ValueError("embed_d must be divisible by num_heads")
        for w in self.local_windows:
            if not 1 <= w <= self.frames_T:
                raise ValueError(f"local window {w} outside [1, {self.frames_T}]")
        if not self.use_global and not self.local_windows:
            raise ValueError("at least one temporal branch is required")
        if self.pos_encoding not in ("factorized", "joint"):
            raise ValueError("pos_encoding must be 'factorized' or 'joint'")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @property
    def num_patches(self) -> int:
        return (self.frame_H * self.frame_W) // (self.patch_P**2)

    @property
    def num_tokens(self) -> int:
        return 1 + self.frames_T * self.num_patches

    @property
    def patch_dim(self) -> int:
        return self.patch_P * self.patch_P * self.channels_C

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SegmenterConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown segmenter config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainSchedule:
    """Optimisation settings; defaults follow the reported training setup."""

    epochs: int = 50
    batch_size: int = 16
    lr: float = 9e-5
    layer_decay: float = 0.75
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    seed: int = 0
    log_every: int = 0
    # random circular spatial shift per clip and epoch; exact for wrap-around toy videos
    augment_roll: bool = False
    lr_schedule: str = "constant"  # or "cosine": decay to zero over all steps
    warmup_steps: int = 0  # linear ramp from zero before the schedule starts

    @classmethod
    def from_dict(cls, d: dict) -> "TrainSchedule":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown schedule keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    step_loss: list[float] = field(default_factory=list)
