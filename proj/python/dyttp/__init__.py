"""Trajectory prediction with dynamic-tanh transformers and snapshot ensembles."""

from ._core import (
    MISS_THRESHOLD,
    CheckpointMismatch,
    CorruptionError,
    DomainError,
    Error,
    FormatError,
    Model,
    Predictor,
    Scenario,
    ShapeError,
    TruncationError,
    checkpoint_info,
    default_model_config,
    evaluate_constant_velocity,
    generate_synthetic,
    load_argoverse_csv,
    load_scenarios,
    lr_at,
    min_ade,
    min_fde,
    save_scenarios,
)

__all__ = [
    "MISS_THRESHOLD",
    "CheckpointMismatch",
    "CorruptionError",
    "DomainError",
    "Error",
    "FormatError",
    "Model",
    "Predictor",
    "Scenario",
    "ShapeError",
    "TruncationError",
    "checkpoint_info",
    "default_model_config",
    "evaluate_constant_velocity",
    "generate_synthetic",
    "load_argoverse_csv",
    "load_scenarios",
    "lr_at",
    "min_ade",
    "min_fde",
    "save_scenarios",
]
