from .config import SegmenterConfig, TrainHistory, TrainSchedule
from .model import (
    SegmenterWeights,
    TokenSequence,
    VarianceWeights,
    aggregate_temporal,
    forward,
    global_temporal_attention,
    init_weights,
    local_temporal_attention,
    multi_head_attention,
    tokenize_clip,
    transformer_block,
    variance_weights,
    weighted_spatial_attention,
)
from .train import (
    evaluate_clips,
    load_checkpoint,
    predict_logits,
    save_checkpoint,
    segment_video,
    train,
    trailing_windows,
)
