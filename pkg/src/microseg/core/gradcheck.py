"""Central finite differences, used as the independent check on backprop."""
from __future__ import annotations

import math

import numpy as np

from .tensor import NonFiniteError


def finite_diff_gradient(f, x, h: float = 1e-5) -> np.ndarray:
    """Estimate df/dx by ``(f(x + h e_i) - f(x - h e_i)) / 2h`` for every coordinate.

    ``x`` is perturbed in place and restored, so ``f`` may close over it.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = x.data if hasattr(x, "data") and not isinstance(x, np.ndarray) else x
    x = np.asarray(x)
    if x.dtype != np.float64:
        raise TypeError("finite_diff_gradient needs a float64 array it can perturb in place")
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NonFiniteError(f"objective not finite at coordinate {i}")
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def max_relative_error(analytic, numeric, floor: float = 1e-8) -> float:
    """Largest elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0
