from .grammar import ActionGrammar, apply_grammar, default_grammar
from .metrics import (
    frame_accuracy,
    match_segments,
    metrics_report_json,
    segment_iou,
    segment_metrics,
)
from .smoothing import flip_isolated_frames, remove_short_segments


def postprocess(t, grammar=None, min_len: int = 5):
    """Short-run removal followed by grammar repair."""
    return apply_grammar(remove_short_segments(t, min_len), grammar or default_grammar())
