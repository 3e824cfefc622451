"""Training loop, evaluation and gradient verification."""

from .calibration import CalibrationResult, calibrate_gates
from .trainer import EvalResult, Trainer, build_network, evaluate, train_from_config

__all__ = [
    "CalibrationResult",
    "EvalResult",
    "Trainer",
    "build_network",
    "calibrate_gates",
    "evaluate",
    "train_from_config"
]
