"""Gradient-boosted skill grading."""
from .boosting import (
    GBCModel,
    accuracy,
    argmax_with_prior,
    discretize,
    gbc_fit,
    gbc_predict,
    log_loss,
    predict_labels,
    predict_proba,
    softmax_rows,
)
from .evaluation import (
    EvaluationReport,
    Protocol,
    confusion_matrix,
    cross_validate,
    evaluate,
    per_class_metrics,
    summary_report,
    write_report,
)
from .trees import Node, RegressionTree, SplitCandidate, best_split, fit_tree
