"""Multiclass softmax gradient boosting over regression trees."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..labels import SKILL_NAMES, SkillLevel
from .trees import RegressionTree, fit_tree

MODEL_FORMAT = "microseg-gbc/1"


def discretize(score: float) -> SkillLevel:
    """Likert score in [1, 5] to a level; boundaries fall into the upper level."""
    if not (isinstance(score, (int, float, np.floating, np.integer)) and 1.0 <= score <= 5.0):
        raise ValueError(f"score {score!r} outside [1, 5]")
    if score < 2.5:
        return SkillLevel.POOR
    if score < 3.5:
        return SkillLevel.MODERATE
    return SkillLevel.GOOD


def softmax_rows(F: np.ndarray) -> np.ndarray:
    z = F - F.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class GBCModel:
    num_classes: int
    n_features: int
    learning_rate: float
    max_depth: int
    prior: np.ndarray  # training class frequencies, used to break ties
    trees: list = field(default_factory=list)  # per round: list of one tree per class
    train_loss: list = field(default_factory=list)
    schema: str | None = None

    @property
    def rounds(self) -> int:
        return len(self.trees)

    def decision(self, X, rounds: int | None = None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"model expects {self.n_features} features, got {X.shape[1]}")
        F = np.zeros((len(X), self.num_classes))
        for per_class in self.trees[:rounds]:
            for k, tree in enumerate(per_class):
                F[:, k] += self.learning_rate * tree.predict(X)
        return F

    def staged_decision(self, X):
        """Yield the raw scores after 0, 1, 2, ... rounds."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        F = np.zeros((len(X), self.num_classes))
        yield F.copy()
        for per_class in self.trees:
            for k, tree in enumerate(per_class):
                F[:, k] += self.learning_rate * tree.predict(X)
            yield F.copy()

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT, "schema": self.schema, "num_classes": self.num_classes,
            "n_features": self.n_features, "learning_rate": self.learning_rate,
            "max_depth": self.max_depth, "prior": self.prior.tolist(),
            "train_loss": self.train_loss,
            "trees": [[t.to_dict() for t in per_class] for per_class in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GBCModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a {MODEL_FORMAT} model")
        return cls(int(d["num_classes"]), int(d["n_features"]), float(d["learning_rate"]),
                   int(d["max_depth"]), np.asarray(d["prior"], dtype=np.float64),
                   [[RegressionTree.from_dict(t) for t in pc] for pc in d["trees"]],
                   list(d["train_loss"]), d.get("schema"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "GBCModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def log_loss(P: np.ndarray, y: np.ndarray) -> float:
    return float(-np.mean(np.log(np.clip(P[np.arange(len(y)), y], 1e-300, None))))


def gbc_fit(X, y, rounds: int = 100, learning_rate: float = 0.1, max_depth: int = 3,
            min_samples: int = 2, seed: int = 0, num_classes: int = len(SKILL_NAMES),
            subsample: float = 1.0, schema: str | None = None) -> GBCModel:
    """Softmax boosting: each round fits one tree per class to ``onehot - p``.

    Scores start at zero (uniform probabilities). Leaves take the Newton step
    scaled by ``(K - 1) / K``. ``subsample < 1`` draws rows per round from ``seed``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise ValueError("X must be (n, p) with one label per row, n > 0")
    if y.min() < 0 or y.max() >= num_classes:
        raise ValueError(f"labels must lie in 0..{num_classes - 1}")
    if len(np.unique(y)) < 2:
        raise ValueError("at least two classes are required")
    if not 0.0 < subsample <= 1.0:
        raise ValueError("subsample must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    K = num_classes
    Y = np.eye(K)[y]
    prior = Y.mean(axis=0)
    model = GBCModel(K, X.shape[1], learning_rate, max_depth, prior, schema=schema)
    F = np.zeros((len(y), K))
    P = softmax_rows(F)
    model.train_loss.append(log_loss(P, y))
    scale = (K - 1) / K
    for _ in range(rounds):
        rows = np.arange(len(y))
        if subsample < 1.0:
            rows = np.sort(rng.choice(len(y), max(1, int(round(subsample * len(y)))), replace=False))
        R = Y - P
        H = P * (1.0 - P)
        per_class = []
        for k in range(K):
            tree = fit_tree(X[rows], R[rows, k], H[rows, k], max_depth, min_samples, leaf_scale=scale)
            per_class.append(tree)
            F[:, k] += learning_rate * tree.predict(X)
        model.trees.append(per_class)
        P = softmax_rows(F)
        model.train_loss.append(log_loss(P, y))
    return model


def argmax_with_prior(P: np.ndarray, prior: np.ndarray) -> np.ndarray:
    """Row argmax; exact ties go to the larger training prior, then the lower index."""
    P = np.atleast_2d(P)
    out = np.empty(len(P), dtype=np.int64)
    for i, row in enumerate(P):
        top = np.flatnonzero(row == row.max())
        out[i] = top[np.argmax(prior[top])]  # argmax picks the first among equal priors
    return out


def gbc_predict(model: GBCModel, x, schema: str | None = None) -> tuple[np.ndarray, int]:
    """Class probabilities and label for one feature vector."""
    if schema is not None and model.schema is not None and schema != model.schema:
        raise ValueError(f"feature schema {schema!r} does not match model schema {model.schema!r}")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    P = softmax_rows(model.decision(x))
    return P[0], int(argmax_with_prior(P, model.prior)[0])


def predict_labels(model: GBCModel, X, rounds: int | None = None) -> np.ndarray:
    return argmax_with_prior(softmax_rows(model.decision(X, rounds)), model.prior)


def predict_proba(model: GBCModel, X) -> np.ndarray:
    return softmax_rows(model.decision(X))


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    return float(np.mean(y_true == np.asarray(y_pred))) if len(y_true) else math.nan
