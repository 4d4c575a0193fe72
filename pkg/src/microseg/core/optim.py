"""Parameters and AdamW with layer-wise learning-rate decay."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import NonFiniteError, Tensor


class Parameter(Tensor):
    """A trainable leaf tensor tagged with the depth used for lr decay."""

    __slots__ = ("_layer_index", "exp_avg", "exp_avg_sq", "step_count")

    def __init__(self, data, layer_index: int = 0, name: str | None = None):
        super().__init__(np.array(data, dtype=np.float64), requires_grad=True, name=name)
        if layer_index < 0:
            raise ValueError("layer_index must be >= 0")
        self._layer_index = int(layer_index)
        self.exp_avg = np.zeros_like(self.data)
        self.exp_avg_sq = np.zeros_like(self.data)
        self.step_count = 0

    @property
    def layer_index(self) -> int:
        return self._layer_index

    @property
    def value(self) -> np.ndarray:
        return self.data

    @property
    def gradient(self) -> np.ndarray:
        return np.zeros_like(self.data) if self.grad is None else self.grad


@dataclass(frozen=True)
class AdamWHyper:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01


def layer_lr(base_lr: float, decay_factor: float, max_layer: int, layer_index: int) -> float:
    """Learning rate for one layer: ``base_lr * decay_factor ** (max_layer - layer_index)``."""
    return base_lr * decay_factor ** (max_layer - layer_index)


def adamw_step(params, base_lr: float, decay_factor: float = 1.0, hyper: AdamWHyper = AdamWHyper()):
    """One decoupled-weight-decay Adam update, applied in place.

    The deepest layer (highest ``layer_index``) trains at ``base_lr``; each
    level closer to the input is scaled by another factor of ``decay_factor``.
    """
    if not 0.0 < decay_factor <= 1.0:
        raise ValueError("decay_factor must lie in (0, 1]")
    params = list(params)
    if not params:
        return
    max_layer = max(p.layer_index for p in params)
    b1, b2 = hyper.beta1, hyper.beta2
    for p in params:
        g = p.gradient
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient for {p.name or 'parameter'}")
        lr = layer_lr(base_lr, decay_factor, max_layer, p.layer_index)
        p.step_count += 1
        p.exp_avg *= b1
        p.exp_avg += (1 - b1) * g
        p.exp_avg_sq *= b2
        p.exp_avg_sq += (1 - b2) * g * g
        m_hat = p.exp_avg / (1 - b1**p.step_count)
        v_hat = p.exp_avg_sq / (1 - b2**p.step_count)
        if hyper.weight_decay:
            p.data *= 1.0 - lr * hyper.weight_decay
        p.data -= lr * m_hat / (np.sqrt(v_hat) + hyper.eps)


def zero_grad(params):
    for p in params:
        p.grad = None
