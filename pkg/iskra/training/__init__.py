"""
Training module for iskra.

This module contains the optimisation loop:
- OptimizerConfig, AdamW, cosine_lr: the training recipe
- Trainer, train, evaluate: fitting and accuracy with progress callbacks
- logistic_baseline: separability oracle on pooled image statistics
"""

from iskra.training.baseline import logistic_baseline, pooled_features
from iskra.training.optim import (
    AdamW,
    OptimizerConfig,
    cosine_lr,
    grad_norm,
    learning_rate,
)
from iskra.training.trainer import (
    EpochProgress,
    ProgressCallback,
    Trainer,
    TrainResult,
    evaluate,
    ratio_loss,
    train,
)

__all__ = [
    "logistic_baseline",
    "pooled_features",
    "AdamW",
    "OptimizerConfig",
    "cosine_lr",
    "grad_norm",
    "learning_rate",
    "EpochProgress",
    "ProgressCallback",
    "Trainer",
    "TrainResult",
    "evaluate",
    "ratio_loss",
    "train",
]
