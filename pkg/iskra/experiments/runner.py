"""
Building blocks shared by the experiment commands: datasets, models,
training and pruning runs derived from one ExperimentConfig.
"""

import csv
import logging
from pathlib import Path

import numpy as np

from iskra.core.autograd import no_grad
from iskra.data.cifar import (
    CIFAR100_TEST_FILES,
    CIFAR100_TRAIN_FILES,
    TEST_FILES,
    TRAIN_FILES,
    load_cifar10_binary,
    load_cifar100_binary,
)
from iskra.data.dataset import Dataset
from iskra.data.registry import load_dataset
from iskra.exceptions import ConfigurationError
from iskra.experiments.config import ExperimentConfig
from iskra.model.spikformer import Spikformer
from iskra.pruning.lottery import TicketSnapshot, imp_loop
from iskra.storage.checkpoint import CheckpointStorage
from iskra.training.trainer import (
    EpochProgress,
    ProgressCallback,
    Trainer,
    TrainResult,
)

logger = logging.getLogger(__name__)


def build_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """
    Return the (train, test) split of the configured data source.

    Synthetic splits are generated from independent streams of the seed;
    CIFAR-10 uses the training batches and ``test_batch.bin``, CIFAR-100
    ``train.bin`` and ``test.bin`` with the configured label granularity;
    frame archives are split by ``test_fraction``.
    """
    data = cfg.dataset
    if data.kind == "synthetic_fg_bg":
        train = load_dataset(
            data.kind, data.n_train, synthetic=data.synthetic, rng=[cfg.seed, 0]
        )
        test = load_dataset(
            data.kind, data.n_test, synthetic=data.synthetic, rng=[cfg.seed, 1]
        )
        return train, test
    if data.kind == "cifar10_binary":
        if data.path is None:
            raise ConfigurationError("cifar10_binary needs a data path", field="path")
        return (
            load_cifar10_binary(data.path, TRAIN_FILES),
            load_cifar10_binary(data.path, TEST_FILES),
        )
    if data.kind == "cifar100_binary":
        if data.path is None:
            raise ConfigurationError("cifar100_binary needs a data path", field="path")
        return (
            load_cifar100_binary(
                data.path, CIFAR100_TRAIN_FILES, label=data.cifar100_labels
            ),
            load_cifar100_binary(
                data.path, CIFAR100_TEST_FILES, label=data.cifar100_labels
            ),
        )
    full = load_dataset(data.kind, path=data.path)
    return full.split(1.0 - data.test_fraction)


def build_model(cfg: ExperimentConfig) -> Spikformer:
    """Return a freshly initialised model seeded by ``cfg.seed``."""
    return Spikformer(
        cfg.model,
        rng=np.random.default_rng([cfg.seed, 2]),
        selector_cfg=cfg.selector,
        selector_kind=cfg.selector_kind,
    )


def build_trainer(
    cfg: ExperimentConfig, datasets: tuple[Dataset, Dataset] | None = None
) -> Trainer:
    train_set, test_set = datasets or build_datasets(cfg)
    return Trainer(
        build_model(cfg),
        train_set,
        cfg.optimizer,
        eval_set=test_set,
        seed=cfg.seed,
        threads=cfg.threads,
    )


def run_training(
    cfg: ExperimentConfig,
    on_epoch: ProgressCallback | None = None,
    datasets: tuple[Dataset, Dataset] | None = None,
) -> TrainResult:
    """
    Train the configured model on the configured data.

    Returns
    -------
    TrainResult
        The trained model with per-epoch loss and accuracy.
    """
    trainer = build_trainer(cfg, datasets)
    logger.info(
        f"Training {trainer.model!r} on {len(trainer.train_set)} images "
        f"for {cfg.optimizer.epochs} epochs"
    )
    return trainer.fit(on_epoch)


def run_pruning(
    cfg: ExperimentConfig,
    storage: CheckpointStorage | None = None,
    datasets: tuple[Dataset, Dataset] | None = None,
) -> TicketSnapshot:
    """Run the configured lottery ticket search."""
    trainer = build_trainer(cfg, datasets)
    return imp_loop(
        trainer, cfg.prune, rng=np.random.default_rng([cfg.seed, 3]), storage=storage
    )


def foreground_keep_rates(
    model: Spikformer, dataset: Dataset, batch_size: int = 128
) -> tuple[float, float]:
    """
    Return the mean final keep rate of foreground and of background tokens.

    Raises
    ------
    ValueError
        If the dataset carries no foreground masks.
    """
    if dataset.foreground is None:
        raise ValueError(f"dataset '{dataset.name}' has no foreground masks")
    model.eval()
    kept = []
    with no_grad():
        for batch in dataset.batches(batch_size, shuffle=False):
            result = model.forward(
                batch.images, mode="eval", rng=np.random.default_rng(0)
            )
            kept.append(result.decision.hard)
    kept = np.concatenate(kept).astype(bool)
    foreground = dataset.foreground
    return float(kept[foreground].mean()), float(kept[~foreground].mean())


TRAIN_LOG_HEADER = ["epoch", "train_loss", "eval_acc", "learning_rate", "temperature"]


def write_train_log(history: list[EpochProgress], path: str | Path) -> Path:
    """Write per-epoch metrics as CSV with six-decimal floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRAIN_LOG_HEADER)
        for p in history:
            acc = "" if p.eval_acc is None else f"{p.eval_acc:.6f}"
            writer.writerow(
                [
                    p.epoch,
                    f"{p.train_loss:.6f}",
                    acc,
                    f"{p.learning_rate:.6f}",
                    f"{p.temperature:.6f}",
                ]
            )
    return path


def save_model(
    model: Spikformer, storage: CheckpointStorage, name: str = "model"
) -> Path:
    """Store the model's parameters as a weights checkpoint."""
    path = storage.save_arrays(
        name, model.state_dict(), metadata={"model": model.cfg.name}
    )
    logger.info(f"Saved {name} to {path}")
    return path


def load_model(
    cfg: ExperimentConfig, storage: CheckpointStorage, name: str = "model"
) -> Spikformer:
    """
    Build the configured model and load a stored weights checkpoint into it.

    Raises
    ------
    CheckpointError
        If the checkpoint is missing or does not fit the configured model.
    """
    model = build_model(cfg)
    model.load_state_dict(storage.load_arrays(name))
    return model
