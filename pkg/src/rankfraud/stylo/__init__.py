from .features import (
    CANDIDATE,
    MIN_REVIEWS,
    FeatureSpace,
    ReviewInstance,
    build_feature_space,
    extract_features,
    feature_matrix,
    group_instances,
    write_feature_csv,
)

__all__ = [
    "CANDIDATE",
    "MIN_REVIEWS",
    "FeatureSpace",
    "ReviewInstance",
    "build_feature_space",
    "extract_features",
    "feature_matrix",
    "group_instances",
    "write_feature_csv",
]
