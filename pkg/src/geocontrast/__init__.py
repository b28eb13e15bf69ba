"""Distance-weighted contrastive learning for street-level geo-localization.

The package trains a pair of small encoders (precomputed image features
vs location-as-text captions) with spatially soft contrastive targets,
and evaluates geo-localization as cross-modal retrieval with
spatial-coherence diagnostics. A seeded synthetic geo-world makes the
whole pipeline verifiable end to end.
"""
from .data import Sample, WorldConfig, generate_world, load_dataset, save_dataset, split
from .errors import (
    ConfigError,
    ContractViolationError,
    DatasetFormatError,
    GeoContrastError,
    InvalidInputError,
    NonFiniteGradientError,
)
from .evalsuite import EvalReport, evaluate
from .geodesy import EARTH_RADIUS_M, DistanceMatrix, GeoPoint, distance_matrix, haversine
from .locfeat import LocationCaption, LocationFeature, featurize, render_caption
from .model import (
    EmbeddingBatch,
    EncoderParams,
    backward,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
    similarity,
)
from .objective import LossBreakdown, clip_loss, fair_loss, sw_loss, total_loss
from .supervision import (
    KernelConfig,
    SpatialWeightMatrix,
    identity_labels,
    soft_labels,
)
from .trainer import TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ContractViolationError",
    "DatasetFormatError",
    "DistanceMatrix",
    "EARTH_RADIUS_M",
    "EmbeddingBatch",
    "EncoderParams",
    "EvalReport",
    "GeoContrastError",
    "GeoPoint",
    "InvalidInputError",
    "KernelConfig",
    "LocationCaption",
    "LocationFeature",
    "LossBreakdown",
    "NonFiniteGradientError",
    "Sample",
    "SpatialWeightMatrix",
    "TrainConfig",
    "TrainResult",
    "WorldConfig",
    "backward",
    "clip_loss",
    "distance_matrix",
    "evaluate",
    "fair_loss",
    "featurize",
    "forward",
    "generate_world",
    "haversine",
    "identity_labels",
    "init_params",
    "load_checkpoint",
    "load_dataset",
    "render_caption",
    "save_checkpoint",
    "save_dataset",
    "similarity",
    "soft_labels",
    "split",
    "sw_loss",
    "total_loss",
    "train",
    "__version__",
]
