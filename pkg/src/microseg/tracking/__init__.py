from .scenario import (
    NoiseModel,
    ObjectScript,
    TrackingScenario,
    TrackingScore,
    read_detections,
    read_ground_truth,
    read_tracks,
    score_against,
    score_tracks,
    two_instrument_scenario,
    write_detections,
    write_ground_truth,
    write_tracks,
)
from .tracker import (
    Detection,
    FusionConfig,
    Track,
    TrackerState,
    TrackOutput,
    anchor_class_label,
    appearance_similarity,
    iou,
    predict,
    reassign_identity,
    reassignment_score,
    refine_with_detection,
    run_tracker,
    step,
)
