"""Point-cloud sampling, viewport ground truth and metrics for volumetric video."""

from ._core import (
    CorruptFileError,
    InsufficientPointsError,
    IoError,
    OutOfBoundsError,
    ParseError,
    ShapeError,
    UnsupportedFormatError,
    generate_scene,
    ground_truth,
    ifmi,
    knn,
    load_config,
    load_ply,
    point_metrics,
    sample,
    save_ply,
    temporal_intensity,
)

__all__ = [
    "CorruptFileError",
    "InsufficientPointsError",
    "IoError",
    "OutOfBoundsError",
    "ParseError",
    "ShapeError",
    "UnsupportedFormatError",
    "generate_scene",
    "ground_truth",
    "ifmi",
    "knn",
    "load_config",
    "load_ply",
    "point_metrics",
    "sample",
    "save_ply",
    "temporal_intensity",
]
