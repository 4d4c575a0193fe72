"""Hold-out evaluation with cross-validated hyperparameter selection."""
from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.model_selection import KFold, StratifiedKFold, train_test_split

from ..labels import SKILL_NAMES
from .boosting import argmax_with_prior, gbc_fit, softmax_rows


def confusion_matrix(y_true, y_pred, num_classes: int = 3) -> np.ndarray:
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return cm


def per_class_metrics(cm) -> dict[str, np.ndarray]:
    """Precision, recall and F1 per class from a confusion matrix (rows = truth); 0 where undefined."""
    cm = np.asarray(cm, dtype=np.float64)
    tp = np.diag(cm)
    pred = cm.sum(axis=0)
    true = cm.sum(axis=1)
    precision = np.divide(tp, pred, out=np.zeros_like(tp), where=pred > 0)
    recall = np.divide(tp, true, out=np.zeros_like(tp), where=true > 0)
    s = precision + recall
    f1 = np.divide(2 * precision * recall, s, out=np.zeros_like(tp), where=s > 0)
    return {"precision": precision, "recall": recall, "f1": f1, "support": true}


@dataclass
class Protocol:
    test_size: float = 0.2
    folds: int = 5
    seed: int = 0
    select: bool = True  # False: CV only estimates accuracy of the default setting
    rounds_grid: tuple = (50, 100, 200)
    depth_grid: tuple = (2, 3, 4)
    default_rounds: int = 100
    default_depth: int = 3
    learning_rate: float = 0.1
    min_samples: int = 2


@dataclass
class EvaluationReport:
    aspect: str
    accuracy: float
    confusion: np.ndarray
    metrics: dict
    selected: dict
    cv_scores: dict = field(default_factory=dict)
    n_train: int = 0
    n_test: int = 0

    def to_dict(self) -> dict:
        levels = {
            SKILL_NAMES[k]: {m: float(self.metrics[m][k]) for m in ("precision", "recall", "f1")}
            | {"support": int(self.metrics["support"][k])}
            for k in range(len(SKILL_NAMES))
        }
        return {
            "aspect": self.aspect, "accuracy": self.accuracy, "levels": levels,
            "confusion": self.confusion.tolist(), "selected": self.selected,
            "cv_accuracy": {f"rounds={r},depth={d}": v for (r, d), v in sorted(self.cv_scores.items())},
            "n_train": self.n_train, "n_test": self.n_test,
        }


def _folds(y, folds: int, seed: int):
    counts = np.bincount(y)
    smallest = counts[counts > 0].min()
    if smallest >= folds:
        return StratifiedKFold(folds, shuffle=True, random_state=seed).split(np.zeros(len(y)), y)
    warnings.warn(f"smallest class has {smallest} samples < {folds} folds; stratification relaxed",
                  stacklevel=3)
    return KFold(min(folds, len(y)), shuffle=True, random_state=seed).split(np.zeros(len(y)))


def cross_validate(X, y, protocol: Protocol) -> dict[tuple[int, int], float]:
    """Mean fold accuracy for every (rounds, depth) grid point; one fit per depth and fold."""
    grid = (list(itertools.product(protocol.rounds_grid, protocol.depth_grid)) if protocol.select
            else [(protocol.default_rounds, protocol.default_depth)])
    depths = sorted({d for _, d in grid})
    max_rounds = max(r for r, _ in grid)
    scores: dict[tuple[int, int], list[float]] = {g: [] for g in grid}
    for fold, (tr, va) in enumerate(_folds(y, protocol.folds, protocol.seed)):
        if len(np.unique(y[tr])) < 2:
            continue
        for depth in depths:
            model = gbc_fit(X[tr], y[tr], max_rounds, protocol.learning_rate, depth,
                            protocol.min_samples, seed=protocol.seed + fold)
            wanted = {r for r, d in grid if d == depth}
            for r, F in enumerate(model.staged_decision(X[va])):
                if r in wanted:
                    pred = argmax_with_prior(softmax_rows(F), model.prior)
                    scores[(r, depth)].append(float(np.mean(pred == y[va])))
    return {g: float(np.mean(v)) if v else float("nan") for g, v in scores.items()}


def evaluate(X, y, protocol: Protocol | None = None, aspect: str = "") -> EvaluationReport:
    """Stratified hold-out split, CV on the training part, refit, score on the test part."""
    protocol = protocol or Protocol()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("empty dataset")
    counts = np.bincount(y)
    stratify = y if counts[counts > 0].min() >= 2 else None
    if stratify is None:
        warnings.warn("a class has a single sample; hold-out split is not stratified", stacklevel=2)
    Xtr, Xte, ytr, yte = train_test_split(X, y, test_size=protocol.test_size,
                                          random_state=protocol.seed, stratify=stratify)
    cv = cross_validate(Xtr, ytr, protocol)
    if protocol.select:
        # best mean accuracy; ties go to the earliest grid point (fewer rounds, then shallower)
        rounds, depth = max(cv, key=lambda g: (np.nan_to_num(cv[g], nan=-1.0), -g[0], -g[1]))
    else:
        rounds, depth = protocol.default_rounds, protocol.default_depth
    model = gbc_fit(Xtr, ytr, rounds, protocol.learning_rate, depth, protocol.min_samples,
                    seed=protocol.seed)
    pred = argmax_with_prior(softmax_rows(model.decision(Xte)), model.prior)
    cm = confusion_matrix(yte, pred, len(SKILL_NAMES))
    return EvaluationReport(aspect, float(np.mean(pred == yte)), cm, per_class_metrics(cm),
                            {"rounds": rounds, "depth": depth}, cv, len(ytr), len(yte))


def summary_report(reports: list[EvaluationReport]) -> dict:
    return {
        "aspects": [r.to_dict() for r in reports],
        "mean_accuracy": float(np.mean([r.accuracy for r in reports])) if reports else float("nan"),
    }


def write_report(path, reports) -> None:
    with open(path, "w") as fh:
        json.dump(summary_report(reports), fh, indent=2, sort_keys=True)
        fh.write("\n")
