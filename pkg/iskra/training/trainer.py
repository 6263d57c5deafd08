"""
Training and evaluation loops.

This module provides the Trainer class, which fits a Spikformer with
AdamW, cross-entropy and the keep-ratio regulariser, and evaluates it,
optionally on a pool of threads that each own a copy of the model.
"""

import copy
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from iskra.core.autograd import Tensor, cross_entropy, no_grad
from iskra.data.dataset import Dataset
from iskra.exceptions import DivergenceError
from iskra.model.spikformer import Spikformer
from iskra.selection.selector import gumbel_temperature
from iskra.training.optim import AdamW, OptimizerConfig, grad_norm, learning_rate

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 128


@dataclass
class EpochProgress:
    """
    Progress information after one training epoch.

    Attributes
    ----------
    epoch : int
        0-based epoch that just finished
    epochs : int
        Total number of epochs of the run
    train_loss : float
        Mean objective over the epoch's batches
    eval_acc : float or None
        Accuracy on the evaluation split, if one was given
    learning_rate : float
        Learning rate used in this epoch
    temperature : float
        Gumbel-Softmax temperature used in this epoch
    keep_means : list[float]
        Mean soft keep per selector over the epoch
    """

    epoch: int
    epochs: int
    train_loss: float
    eval_acc: float | None
    learning_rate: float
    temperature: float
    keep_means: list[float] = field(default_factory=list)

    @property
    def progress_percent(self) -> float:
        """Return progress as percentage (0-100)."""
        if self.epochs == 0:
            return 100.0
        return (self.epoch + 1) / self.epochs * 100


# Type alias for progress callback
ProgressCallback = Callable[[EpochProgress], None]


@dataclass
class TrainResult:
    """Trained model with its per-epoch history."""

    model: Spikformer
    history: list[EpochProgress]

    @property
    def final_loss(self) -> float | None:
        """Return the last epoch's training loss, None if no epoch ran."""
        return self.history[-1].train_loss if self.history else None


def ratio_loss(soft_keep_means: list[Tensor], rho: float) -> Tensor | None:
    """
    Squared error between each selector's mean soft keep and its target.

    The selector applied s-th (1-based) targets ``rho ** s``.
    """
    loss = None
    for s, mean in enumerate(soft_keep_means, start=1):
        diff = mean - rho**s
        term = diff * diff
        loss = term if loss is None else loss + term
    return loss


def _correct(model: Spikformer, batch, execution: str, seed: int) -> int:
    with no_grad():
        result = model.forward(
            batch.images,
            mode="eval",
            rng=np.random.default_rng([seed, int(batch.indices[0])]),
            execution=execution,
        )
    predicted = np.argmax(result.logits.data, axis=1)
    return int(np.sum(predicted == batch.labels))


def evaluate(
    model: Spikformer,
    dataset: Dataset,
    threads: int = 1,
    batch_size: int = EVAL_BATCH_SIZE,
    execution: str = "mask",
    seed: int = 0,
) -> float:
    """
    Return the accuracy of ``model`` on ``dataset``.

    Parameters
    ----------
    model : Spikformer
        Model to evaluate; switched to inference mode.
    dataset : Dataset
        Evaluation data.
    threads : int, optional
        Worker threads; each uses its own copy of the model (default: 1).
    batch_size : int, optional
        Images per forward pass.
    execution : str, optional
        "mask" (default) or "gather".
    seed : int, optional
        Seeds the per-batch generators used by random selectors.

    Returns
    -------
    float
        Fraction of correctly classified images; independent of ``threads``.
    """
    if len(dataset) == 0:
        return 0.0
    model.eval()
    batches = list(dataset.batches(batch_size, shuffle=False))
    if threads <= 1:
        correct = sum(_correct(model, b, execution, seed) for b in batches)
        return correct / len(dataset)

    workers = min(threads, len(batches))
    chunks = [batches[i::workers] for i in range(workers)]
    replicas = [copy.deepcopy(model) for _ in range(workers)]

    def run(worker: int) -> int:
        replica = replicas[worker]
        return sum(_correct(replica, b, execution, seed) for b in chunks[worker])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        correct = sum(pool.map(run, range(workers)))
    return correct / len(dataset)


class Trainer:
    """
    Fits a Spikformer on a dataset.

    Parameters
    ----------
    model : Spikformer
        Model to train in place.
    train_set : Dataset
        Training data.
    optim : OptimizerConfig
        Training recipe.
    eval_set : Dataset, optional
        Data for per-epoch and final accuracy (default: ``train_set``).
    seed : int, optional
        Seeds shuffling and Gumbel noise; each training run draws from
        ``(seed, run index)``.
    threads : int, optional
        Evaluation threads.

    Examples
    --------
    >>> trainer = Trainer(model, train_set, OptimizerConfig(epochs=5), test_set)
    >>> loss = trainer.train_round()
    >>> trainer.evaluate()
    0.93
    """

    def __init__(
        self,
        model: Spikformer,
        train_set: Dataset,
        optim: OptimizerConfig,
        eval_set: Dataset | None = None,
        seed: int = 0,
        threads: int = 1,
    ):
        self.model = model
        self.train_set = train_set
        self.eval_set = eval_set if eval_set is not None else train_set
        self.optim = optim
        self.seed = seed
        self.threads = threads
        self.runs = 0
        self.history: list[EpochProgress] = []

    def _objective(
        self, batch, rng: np.random.Generator
    ) -> tuple[Tensor, list[float]]:
        model = self.model
        result = model.forward(batch.images, mode="train", rng=rng)
        loss = cross_entropy(result.logits, batch.labels)
        weight = model.selector_cfg.ratio_weight
        regulariser = ratio_loss(result.soft_keep_means, model.selector_cfg.rho)
        if regulariser is not None and weight:
            loss = loss + regulariser * weight
        return loss, [float(m.data) for m in result.soft_keep_means]

    def fit(self, on_epoch: ProgressCallback | None = None) -> TrainResult:
        """
        Run ``optim.epochs`` epochs with a fresh optimizer.

        Raises
        ------
        DivergenceError
            If a batch produces a non-finite loss.
        """
        model = self.model
        cfg = self.optim
        rng = np.random.default_rng([self.seed, self.runs])
        self.runs += 1
        params = model.parameters()
        optimizer = AdamW(params, cfg)
        history: list[EpochProgress] = []
        last_norm = 0.0

        for epoch in range(cfg.epochs):
            lr = learning_rate(cfg, epoch)
            temperature = gumbel_temperature(model.selector_cfg, epoch, cfg.epochs)
            model.set_temperature(temperature)
            model.train()
            losses, keeps = [], []
            for step, batch in enumerate(
                self.train_set.batches(cfg.batch_size, rng, shuffle=True)
            ):
                loss, keep_means = self._objective(batch, rng)
                value = float(loss.data)
                if not math.isfinite(value):
                    raise DivergenceError(
                        f"loss became {value} in epoch {epoch}, step {step} "
                        f"(learning rate {lr:.3g}, last gradient norm {last_norm:.3g})",
                        epoch=epoch,
                        learning_rate=lr,
                        grad_norm=last_norm,
                    )
                optimizer.zero_grad()
                loss.backward()
                for p in params:
                    p.mask_grad()
                last_norm = grad_norm(params)
                optimizer.step(lr)
                losses.append(value)
                keeps.append(keep_means)
                logger.debug(f"epoch {epoch} step {step}: loss {value:.4f}")

            accuracy = evaluate(model, self.eval_set, self.threads, seed=self.seed)
            keep_means = np.mean(keeps, axis=0).tolist() if keeps and keeps[0] else []
            progress = EpochProgress(
                epoch=epoch,
                epochs=cfg.epochs,
                train_loss=float(np.mean(losses)) if losses else 0.0,
                eval_acc=accuracy,
                learning_rate=lr,
                temperature=temperature,
                keep_means=keep_means,
            )
            history.append(progress)
            logger.info(
                f"Epoch {epoch + 1}/{cfg.epochs}: loss {progress.train_loss:.4f}, "
                f"accuracy {accuracy:.4f}, lr {lr:.2e}"
            )
            if on_epoch:
                on_epoch(progress)

        optimizer.zero_grad()
        self.history.extend(history)
        return TrainResult(model, history)

    def train_round(self, on_epoch: ProgressCallback | None = None) -> float:
        """Train once and return the final loss (0.0 when no epoch ran)."""
        result = self.fit(on_epoch)
        return result.final_loss if result.final_loss is not None else 0.0

    def evaluate(self) -> float:
        """Return the accuracy on the evaluation split."""
        return evaluate(self.model, self.eval_set, self.threads, seed=self.seed)


def train(
    model: Spikformer,
    train_set: Dataset,
    optim: OptimizerConfig,
    eval_set: Dataset | None = None,
    seed: int = 0,
    threads: int = 1,
    on_epoch: ProgressCallback | None = None,
) -> TrainResult:
    """
    Train ``model`` in place and return it with its epoch history.

    With ``optim.epochs == 0`` the model is returned unchanged.
    """
    trainer = Trainer(model, train_set, optim, eval_set, seed, threads)
    return trainer.fit(on_epoch)
