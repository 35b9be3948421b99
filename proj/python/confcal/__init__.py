"""Calibration metrics, calibration-aware losses, multi-agent debate and temperature scaling."""

from ._core import (
    Error,
    InputError,
    InvariantError,
    PredictionRecord,
    TransportError,
    ace,
    aligncal_grad,
    aligncal_loss,
    apply_temperature,
    compute_metrics,
    debate,
    ece,
    fit_temperature,
    focal_loss,
    label_smoothing_loss,
    load_predictions,
    mce,
    normalize_answer,
    save_predictions,
    scale_confidence,
    softmax,
    total_grad,
    total_loss,
    train_demo,
    ubce,
)

__all__ = [name for name in dir() if not name.startswith("_")]
