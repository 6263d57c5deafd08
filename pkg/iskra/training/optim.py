"""
Optimizer and learning-rate schedule.

AdamW keeps decoupled weight decay and bias-corrected moments; masked
weights receive no gradient and are re-zeroed after every update, so a
pruned weight stays exactly zero for the whole run.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from iskra.core.layers import PrunableParam
from iskra.exceptions import ConfigurationError

SUPPORTED_OPTIMIZERS = ["adamw"]
SUPPORTED_SCHEDULES = ["cosine", "constant"]


@dataclass
class OptimizerConfig:
    """
    Training recipe.

    Attributes
    ----------
    kind : str
        Optimizer name; only "adamw" is implemented.
    learning_rate : float
        Peak learning rate.
    weight_decay : float
        Decoupled weight decay, applied to weight matrices and kernels only.
    epochs : int
        Epochs per training run (per round in a lottery search).
    batch_size : int
        Images per update.
    schedule : str
        "cosine" decays to 0 over ``epochs``; "constant" keeps the peak.
    beta1, beta2, eps : float
        Adam moment constants.
    """

    kind: str = "adamw"
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    epochs: int = 30
    batch_size: int = 64
    schedule: str = "cosine"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in SUPPORTED_OPTIMIZERS:
            raise ConfigurationError(
                f"Unknown optimizer: '{self.kind}'. Supported: {SUPPORTED_OPTIMIZERS}",
                field="kind",
            )
        if self.schedule not in SUPPORTED_SCHEDULES:
            raise ConfigurationError(
                f"Unknown schedule: '{self.schedule}'. "
                f"Supported: {SUPPORTED_SCHEDULES}",
                field="schedule",
            )
        if not self.learning_rate > 0:
            raise ConfigurationError(
                f"learning_rate must be > 0, got {self.learning_rate}", "learning_rate"
            )
        if self.weight_decay < 0:
            raise ConfigurationError(
                f"weight_decay must be >= 0, got {self.weight_decay}", "weight_decay"
            )
        if self.epochs < 0:
            raise ConfigurationError(
                f"epochs must be >= 0, got {self.epochs}", "epochs"
            )
        if self.batch_size < 1:
            raise ConfigurationError(
                f"batch_size must be >= 1, got {self.batch_size}", "batch_size"
            )
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ConfigurationError("Adam constants out of range", field="beta1")

    def to_dict(self) -> dict:
        return asdict(self)


def cosine_lr(base: float, epoch: int, epochs: int, minimum: float = 0.0) -> float:
    """
    Return the cosine-decayed learning rate of a 0-based epoch.

    Examples
    --------
    >>> cosine_lr(1e-3, 0, 10)
    0.001
    """
    if epochs <= 1:
        return base
    progress = min(max(epoch / epochs, 0.0), 1.0)
    return minimum + 0.5 * (base - minimum) * (1.0 + math.cos(math.pi * progress))


def learning_rate(cfg: OptimizerConfig, epoch: int) -> float:
    """Return the learning rate of ``epoch`` under the configured schedule."""
    if cfg.schedule == "constant":
        return cfg.learning_rate
    return cosine_lr(cfg.learning_rate, epoch, cfg.epochs)


def grad_norm(params: list[PrunableParam]) -> float:
    """Return the global L2 norm of the gradients present."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(np.square(p.grad, dtype=np.float64)))
    return math.sqrt(total)


class AdamW:
    """
    Adam with decoupled weight decay.

    Parameters
    ----------
    params : list[PrunableParam]
        Parameters to update.
    cfg : OptimizerConfig
        Moment constants and weight decay.
    """

    def __init__(self, params: list[PrunableParam], cfg: OptimizerConfig):
        self.params = list(params)
        self.cfg = cfg
        self.steps = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr: float) -> None:
        """Apply one update with learning rate ``lr`` and keep masks enforced."""
        cfg = self.cfg
        self.steps += 1
        correction1 = 1.0 - cfg.beta1**self.steps
        correction2 = 1.0 - cfg.beta2**self.steps
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            p.mask_grad()
            g = p.grad.astype(p.data.dtype, copy=False)
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            if cfg.weight_decay and p.data.ndim >= 2:
                p.data -= lr * cfg.weight_decay * p.data
            update = (m / correction1) / (np.sqrt(v / correction2) + cfg.eps)
            p.data -= (lr * update).astype(p.data.dtype, copy=False)
            p.apply_mask()

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
