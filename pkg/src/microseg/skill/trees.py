"""Regression trees grown by exhaustive variance-reduction splitting."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_TIE = 1e-12


@dataclass
class SplitCandidate:
    feature: int
    threshold: float
    gain: float


def best_split(X: np.ndarray, r: np.ndarray, min_leaf: int = 1) -> SplitCandidate | None:
    """Split maximising the squared-error reduction of ``r``.

    Thresholds are midpoints between consecutive distinct sorted values; rows
    with ``x <= threshold`` go left. Ties keep the lowest feature, then the
    lowest threshold. ``None`` when no split reduces the error.
    """
    n, p = X.shape
    total = r.sum()
    base = total * total / n
    best: SplitCandidate | None = None
    for j in range(p):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        cs = np.cumsum(r[order])[:-1]
        nl = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (n - nl >= min_leaf)
        if not valid.any():
            continue
        gain = cs**2 / nl + (total - cs) ** 2 / (n - nl) - base
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))  # first maximum -> lowest threshold
        g = float(gain[k])
        if best is None or g > best.gain + _TIE * max(1.0, abs(best.gain)):
            best = SplitCandidate(j, float((xs[k] + xs[k + 1]) / 2.0), g)
    if best is None or best.gain <= _TIE * max(1.0, base):
        return None
    return best


@dataclass
class Node:
    value: float
    feature: int = -1
    threshold: float = 0.0
    gain: float = 0.0
    n_samples: int = 0
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value, "n": self.n_samples}
        return {"feature": self.feature, "threshold": self.threshold, "gain": self.gain,
                "value": self.value, "n": self.n_samples,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Node":
        if "left" not in d:
            return cls(float(d["value"]), n_samples=int(d["n"]))
        return cls(float(d["value"]), int(d["feature"]), float(d["threshold"]), float(d["gain"]),
                   int(d["n"]), cls.from_dict(d["left"]), cls.from_dict(d["right"]))


@dataclass
class RegressionTree:
    root: Node
    max_depth: int
    n_features: int
    feature_gain: np.ndarray = field(default=None)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"tree expects {self.n_features} features, got {X.shape[1]}")
        out = np.empty(len(X))
        stack = [(self.root, np.arange(len(X)))]
        while stack:
            node, idx = stack.pop()
            if node.is_leaf:
                out[idx] = node.value
                continue
            go_left = X[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
        return out

    def leaves(self) -> list[Node]:
        out, stack = [], [self.root]
        while stack:
            n = stack.pop()
            if n.is_leaf:
                out.append(n)
            else:
                stack += [n.right, n.left]
        return out

    def depth(self) -> int:
        def d(n):
            return 0 if n.is_leaf else 1 + max(d(n.left), d(n.right))
        return d(self.root)

    def to_dict(self) -> dict:
        return {"max_depth": self.max_depth, "n_features": self.n_features, "root": self.root.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(Node.from_dict(d["root"]), int(d["max_depth"]), int(d["n_features"]))


def fit_tree(X, residuals, hessians=None, max_depth: int = 3, min_samples: int = 2,
             leaf_scale: float = 1.0) -> RegressionTree:
    """Greedy regression tree on ``residuals``.

    Splits use squared-error reduction of the residuals. Leaves hold the
    residual mean, or the Newton step ``sum(r) / sum(h)`` when ``hessians`` is
    given, multiplied by ``leaf_scale``. Nodes with fewer than ``min_samples``
    rows are not split.
    """
    X = np.asarray(X, dtype=np.float64)
    r = np.asarray(residuals, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or len(X) != len(r):
        raise ValueError("X must be (n, p) with one residual per row")
    if len(r) == 0 or len(r) < min_samples:
        raise ValueError(f"need at least max(1, min_samples={min_samples}) rows, got {len(r)}")
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    h = None if hessians is None else np.asarray(hessians, dtype=np.float64).reshape(-1)
    gains = np.zeros(X.shape[1])

    def leaf_value(idx):
        if h is None:
            return leaf_scale * float(r[idx].mean())
        den = float(h[idx].sum())
        return leaf_scale * float(r[idx].sum()) / den if den > 1e-12 else 0.0

    def grow(idx, depth):
        node = Node(leaf_value(idx), n_samples=len(idx))
        if depth >= max_depth or len(idx) < max(2, min_samples):
            return node
        split = best_split(X[idx], r[idx])
        if split is None:
            return node
        go_left = X[idx, split.feature] <= split.threshold
        node.feature, node.threshold, node.gain = split.feature, split.threshold, split.gain
        gains[split.feature] += split.gain
        node.left = grow(idx[go_left], depth + 1)
        node.right = grow(idx[~go_left], depth + 1)
        return node

    root = grow(np.arange(len(r)), 0)
    return RegressionTree(root, max_depth, X.shape[1], gains)
