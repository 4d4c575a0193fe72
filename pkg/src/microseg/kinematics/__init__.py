"""Tip kinematics, inter-instrument relations and per-aspect skill features."""
from .features import (
    ASPECT_CLASSES,
    MOTION_ASPECTS,
    ROLE_OF_CLASS,
    ROLES,
    SCHEMA_VERSION,
    SkillFeatureVector,
    build_feature_vector,
    csv_header,
    feature_names,
    read_feature_csv,
    write_feature_csv,
)
from .series import (
    ActionStats,
    KinematicSeries,
    RelativeSeries,
    action_stats,
    differentiate,
    moving_average,
    relative_features,
    split_runs,
    summary,
    wrap_angle,
)
