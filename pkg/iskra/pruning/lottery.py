"""
Lottery ticket search: iterative magnitude pruning with rewinding, the
random re-initialisation baseline and early-bird mask detection.

Each round trains the current (masked) network, removes a fraction of the
alive weights by magnitude and resets the survivors, either to the
recorded rewind point or to a fresh random draw. The early-bird variant
instead reads its masks off a single dense training run at the epoch
where they stop changing.
"""

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Protocol

import numpy as np

from iskra.core.layers import Module, PrunableParam
from iskra.exceptions import (
    CheckpointError,
    ConfigurationError,
    DivergenceError,
    UsageError,
)
from iskra.pruning.masks import (
    PRUNE_SCOPES,
    WeightMask,
    global_magnitude_mask,
    magnitude_prune,
    random_reinit,
    simulate_alive_counts,
)
from iskra.storage.checkpoint import CheckpointStorage

logger = logging.getLogger(__name__)

ROUND_CSV_HEADER = ["round", "sparsity", "train_loss", "eval_acc", "alive_params"]


class PruneMethod(str, Enum):
    """How survivors are reset between rounds."""

    IMP_REWIND = "IMP_rewind"
    RANDOM_REINIT = "random_reinit"
    EARLY_BIRD = "early_bird"


class RewindPoint(str, Enum):
    INIT = "init"
    EPOCH_K = "epoch_k"


@dataclass
class PruneConfig:
    """
    Lottery ticket search settings.

    Attributes
    ----------
    p : float
        Fraction of alive weights removed per round, 0 < p < 1.
    K : int
        Number of pruning rounds after the dense round 0.
    method : PruneMethod
        IMP_rewind, random_reinit or early_bird.
    rewind_point : RewindPoint
        Weights restored after pruning: the initialisation or the weights
        after ``rewind_epoch`` epochs of dense training.
    rewind_epoch : int
        Completed dense epochs at the epoch_k rewind point.
    eb_distance_threshold : float
        Early-bird detection fires when every pairwise normalised Hamming
        distance inside the window is below this value.
    eb_window : int
        Number of consecutive epoch masks compared by early-bird detection.
    scope : str
        "global" or "per_layer" magnitude ranking.
    """

    p: float = 0.25
    K: int = 15
    method: PruneMethod = PruneMethod.IMP_REWIND
    rewind_point: RewindPoint = RewindPoint.INIT
    rewind_epoch: int = 1
    eb_distance_threshold: float = 0.1
    eb_window: int = 5
    scope: str = "global"

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ConfigurationError(f"p must be in (0, 1), got {self.p}", "p")
        if self.K < 1:
            raise ConfigurationError(f"K must be >= 1, got {self.K}", "K")
        try:
            self.method = PruneMethod(self.method)
        except ValueError:
            raise ConfigurationError(
                f"Unknown prune method: '{self.method}'. "
                f"Supported: {[m.value for m in PruneMethod]}",
                field="method",
            )
        try:
            self.rewind_point = RewindPoint(self.rewind_point)
        except ValueError:
            raise ConfigurationError(
                f"Unknown rewind point: '{self.rewind_point}'. "
                f"Supported: {[r.value for r in RewindPoint]}",
                field="rewind_point",
            )
        if self.rewind_epoch < 1:
            raise ConfigurationError(
                f"rewind_epoch must be >= 1, got {self.rewind_epoch}", "rewind_epoch"
            )
        if not self.eb_distance_threshold > 0:
            raise ConfigurationError(
                f"eb_distance_threshold must be > 0, got {self.eb_distance_threshold}",
                field="eb_distance_threshold",
            )
        if self.eb_window < 1:
            raise ConfigurationError(
                f"eb_window must be >= 1, got {self.eb_window}", "eb_window"
            )
        if self.scope not in PRUNE_SCOPES:
            raise ConfigurationError(
                f"Unknown prune scope: '{self.scope}'. Valid options: {PRUNE_SCOPES}",
                field="scope",
            )

    def to_dict(self) -> dict:
        """Return a JSON-ready dict in field order."""
        return {
            "p": self.p,
            "K": self.K,
            "method": self.method.value,
            "rewind_point": self.rewind_point.value,
            "rewind_epoch": self.rewind_epoch,
            "eb_distance_threshold": self.eb_distance_threshold,
            "eb_window": self.eb_window,
            "scope": self.scope,
        }


@dataclass
class RoundRecord:
    """Metrics of one pruning round (round 0 is the dense network)."""

    round: int
    sparsity: float
    train_loss: float
    eval_acc: float
    alive_params: int


@dataclass
class TicketSnapshot:
    """
    Result of a lottery ticket search.

    Attributes
    ----------
    weights : dict[str, np.ndarray]
        Every parameter at the rewind point.
    round_masks : list[WeightMask]
        Mask after each round, round 0 first.
    metrics : list[RoundRecord]
        Per-round metrics.
    """

    weights: dict[str, np.ndarray]
    round_masks: list[WeightMask] = field(default_factory=list)
    metrics: list[RoundRecord] = field(default_factory=list)

    def save(self, storage: CheckpointStorage, prefix: str = "ticket") -> None:
        """Write weights, masks and metrics below ``<prefix>/``."""
        storage.save_arrays(
            f"{prefix}/weights",
            self.weights,
            metadata={
                "rounds": len(self.round_masks),
                "metrics": [asdict(r) for r in self.metrics],
            },
        )
        for k, mask in enumerate(self.round_masks):
            storage.save_masks(f"{prefix}/round{k}", mask.masks, metadata={"round": k})

    @classmethod
    def load(
        cls, storage: CheckpointStorage, prefix: str = "ticket"
    ) -> "TicketSnapshot":
        """Read a snapshot written by :meth:`save`."""
        _, weights, metadata = storage.load(f"{prefix}/weights")
        rounds = int(metadata.get("rounds", 0))
        masks = [
            WeightMask(storage.load_masks(f"{prefix}/round{k}")) for k in range(rounds)
        ]
        metrics = [RoundRecord(**r) for r in metadata.get("metrics", [])]
        return cls(weights, masks, metrics)


class RoundTrainer(Protocol):
    """
    What the search loop needs from a trainer.

    ``train_round`` trains ``model`` from its current weights for the
    configured number of epochs with fresh optimizer state, calling
    ``on_epoch`` with an object carrying the 0-based ``epoch`` after
    every epoch, and returns the final training loss.
    """

    model: Module

    def train_round(self, on_epoch: Callable | None = None) -> float: ...

    def evaluate(self) -> float: ...


def rewind(
    params: Module | Iterable[PrunableParam], snapshot: TicketSnapshot
) -> None:
    """
    Reset every parameter to its snapshot value, keeping masked weights at zero.

    Raises
    ------
    CheckpointError
        If a parameter is missing from the snapshot or its shape drifted.
    """
    if isinstance(params, Module):
        params.assign_names()
        tensors = params.parameters()
    else:
        tensors = list(params)
    for param in tensors:
        if param.name not in snapshot.weights:
            raise CheckpointError(f"snapshot has no weights for '{param.name}'")
        values = np.asarray(snapshot.weights[param.name])
        if values.shape != param.shape:
            raise CheckpointError(
                f"shape drift for '{param.name}': snapshot {values.shape}, "
                f"model {param.shape}"
            )
        param.data = values.astype(np.float32, copy=True)
        param.apply_mask()


def eb_detect(mask_history: list[WeightMask], cfg: PruneConfig) -> int | None:
    """
    Find the first epoch at which the pruning mask has stabilised.

    Parameters
    ----------
    mask_history : list[WeightMask]
        One mask per epoch, all at the same target sparsity.
    cfg : PruneConfig
        Supplies ``eb_window`` and ``eb_distance_threshold``.

    Returns
    -------
    int or None
        Index of the last mask of the first window whose maximum pairwise
        normalised Hamming distance is below the threshold, or None.

    Raises
    ------
    UsageError
        If the history is empty.
    """
    if not mask_history:
        raise UsageError("early-bird detection needs at least one recorded mask")
    window = cfg.eb_window
    for end in range(window - 1, len(mask_history)):
        recent = mask_history[end - window + 1 : end + 1]
        distance = max(
            (
                recent[i].hamming_distance(recent[j])
                for i in range(len(recent))
                for j in range(i + 1, len(recent))
            ),
            default=0.0,
        )
        if distance < cfg.eb_distance_threshold:
            logger.debug(
                f"Early-bird mask stable at epoch {end} (distance {distance:.4f})"
            )
            return end
    return None


def write_round_csv(records: list[RoundRecord], path: str | Path) -> Path:
    """Write per-round metrics as CSV and return the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(ROUND_CSV_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.round,
                    f"{r.sparsity:.6f}",
                    f"{r.train_loss:.6f}",
                    f"{r.eval_acc:.6f}",
                    r.alive_params,
                ]
            )
    return path


def _train(trainer: RoundTrainer, k: int, records: list, on_epoch=None) -> float:
    try:
        loss = trainer.train_round(on_epoch)
    except DivergenceError as e:
        e.history = list(records)
        logger.error(f"Round {k} diverged: {e}")
        raise
    if not math.isfinite(loss):
        error = DivergenceError(f"round {k} finished with training loss {loss}")
        error.history = list(records)
        raise error
    return loss


def _record(
    trainer: RoundTrainer, k: int, loss: float, mask: WeightMask
) -> RoundRecord:
    record = RoundRecord(
        round=k,
        sparsity=mask.sparsity,
        train_loss=float(loss),
        eval_acc=float(trainer.evaluate()),
        alive_params=mask.alive,
    )
    logger.info(
        f"Round {k}: sparsity {record.sparsity:.2%}, loss {record.train_loss:.4f}, "
        f"accuracy {record.eval_acc:.4f}"
    )
    return record


def _clear_masks(model: Module) -> None:
    for param in model.prunable_parameters():
        param.mask = None


def imp_loop(
    trainer: RoundTrainer,
    cfg: PruneConfig,
    rng: np.random.Generator | None = None,
    storage: CheckpointStorage | None = None,
) -> TicketSnapshot:
    """
    Run a dense round followed by ``cfg.K`` pruning rounds.

    Parameters
    ----------
    trainer : RoundTrainer
        Owns the model, the data and the optimizer recipe.
    cfg : PruneConfig
        Search settings.
    rng : np.random.Generator, optional
        Source of random re-initialisations (default: seeded with 0).
    storage : CheckpointStorage, optional
        When given, masks and the final snapshot are written as checkpoints.

    Returns
    -------
    TicketSnapshot
        Rewind weights, the mask of every round and per-round metrics.

    Raises
    ------
    DivergenceError
        If a round produces a non-finite loss; ``history`` holds the
        records of the completed rounds.
    ConfigurationError
        If the epoch_k rewind point lies beyond the dense training run.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    model = trainer.model
    model.assign_names()
    prunable_names = [p.name for p in model.prunable_parameters()]
    init_weights = model.state_dict()
    rewind_weights = init_weights if cfg.rewind_point is RewindPoint.INIT else None
    epoch_states: list[dict[str, np.ndarray]] = []

    def on_epoch(progress) -> None:
        nonlocal rewind_weights
        if cfg.method is PruneMethod.EARLY_BIRD:
            epoch_states.append(model.state_dict())
        if (
            cfg.rewind_point is RewindPoint.EPOCH_K
            and progress.epoch + 1 == cfg.rewind_epoch
        ):
            rewind_weights = model.state_dict()

    records: list[RoundRecord] = []
    logger.info(f"Lottery search: {cfg.method.value}, p={cfg.p}, K={cfg.K}")
    loss = _train(trainer, 0, records, on_epoch)
    if rewind_weights is None:
        raise ConfigurationError(
            f"rewind_epoch {cfg.rewind_epoch} exceeds the dense training run",
            field="rewind_epoch",
        )

    mask = WeightMask.from_params(model)
    snapshot = TicketSnapshot(weights=rewind_weights, metrics=records)
    snapshot.round_masks.append(mask)
    records.append(_record(trainer, 0, loss, mask))
    targets = simulate_alive_counts(mask.total, cfg.p, cfg.K)

    for k in range(1, cfg.K + 1):
        previous = mask
        if cfg.method is PruneMethod.EARLY_BIRD:
            if not epoch_states:
                raise UsageError("dense training reported no epochs")
            history = [
                global_magnitude_mask(
                    {n: state[n] for n in prunable_names}, targets[k], within=previous
                )
                for state in epoch_states
            ]
            found = eb_detect(history, cfg)
            if found is None:
                found = len(history) - 1
                logger.warning(
                    f"Round {k}: masks never stabilised, using the last epoch"
                )
            _clear_masks(model)
            model.load_state_dict(epoch_states[found])
            mask = history[found]
            mask.apply(model)
            logger.info(f"Round {k}: early-bird mask taken from epoch {found}")
        else:
            mask = magnitude_prune(model, cfg.p, cfg.scope)
            if not mask.is_nested_in(previous):
                logger.warning(f"Round {k}: mask is not nested in round {k - 1}")
            if cfg.method is PruneMethod.IMP_REWIND:
                rewind(model, snapshot)
            else:
                random_reinit(model, mask, rng)

        loss = _train(trainer, k, records)
        snapshot.round_masks.append(mask)
        records.append(_record(trainer, k, loss, mask))
        if storage is not None:
            storage.save_masks(f"ticket/round{k}", mask.masks, metadata={"round": k})

    if storage is not None:
        snapshot.save(storage)
    return snapshot
