"""
Spiking token selection.

A selector looks at the spike sequence entering an encoder block, turns
every token's temporal firing rate into a keep/drop score and decides
which tokens continue. Decisions are cumulative: a dropped token is never
re-activated.

Pipeline of one selector application:
1. temporal_gap: mean over T of the spikes, i.e. per-channel firing rates
2. score_tokens: two-layer scorer MLP followed by a softmax over
   (keep, drop); column 0 is the keep probability
3. sample_keep_decision: Gumbel-Softmax straight-through sample in
   training, deterministic top-ceil(rho * alive) in inference
4. compose_decision: Hadamard product with the previous decision

Example usage::

    selector = SpikingTokenSelector(channels=96, cfg=SelectorConfig(rho=0.7),
                                    rng=np.random.default_rng(0))
    new, score = selector.select(x, alive, SelectionMode.EVAL)
    decision = compose_decision(decision, new)
"""

import csv
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from iskra.core.autograd import Tensor, as_tensor
from iskra.core.neurons import SpikeTensor
from iskra.exceptions import ConfigurationError, DimensionError, UsageError
from iskra.core.layers import Linear, Module

logger = logging.getLogger(__name__)

ANNEAL_START = 5.0
ANNEAL_END = 0.5


class SelectionMode(str, Enum):
    """Stochastic training decisions or deterministic inference decisions."""

    TRAIN = "train"
    EVAL = "eval"


class TemperatureSchedule(str, Enum):
    """Gumbel-Softmax temperature over training."""

    CONSTANT = "constant"
    LINEAR_ANNEAL = "linear_anneal"


@dataclass
class SelectorConfig:
    """
    Token selector settings.

    Attributes
    ----------
    rho : float
        Fraction of alive tokens kept per application, 0 < rho <= 1.
    gumbel_temperature : float
        Gumbel-Softmax temperature for the constant schedule.
    temperature_schedule : TemperatureSchedule
        constant, or linear_anneal from 5.0 down to 0.5 over training.
    hidden_width : int, optional
        Scorer hidden size; defaults to D // 2.
    ratio_weight : float
        Weight of the keep-ratio regulariser in the training loss.
    """

    rho: float = 1.0
    gumbel_temperature: float = 1.0
    temperature_schedule: TemperatureSchedule = TemperatureSchedule.CONSTANT
    hidden_width: int | None = None
    ratio_weight: float = 2.0

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ConfigurationError(f"rho must be in (0, 1], got {self.rho}", "rho")
        if not self.gumbel_temperature > 0:
            raise ConfigurationError(
                f"gumbel_temperature must be > 0, got {self.gumbel_temperature}",
                field="gumbel_temperature",
            )
        try:
            self.temperature_schedule = TemperatureSchedule(self.temperature_schedule)
        except ValueError:
            raise ConfigurationError(
                f"Unknown temperature schedule: '{self.temperature_schedule}'. "
                f"Supported: {[s.value for s in TemperatureSchedule]}",
                field="temperature_schedule",
            )
        if self.hidden_width is not None and self.hidden_width < 1:
            raise ConfigurationError(
                f"hidden_width must be >= 1, got {self.hidden_width}",
                field="hidden_width",
            )
        if self.ratio_weight < 0:
            raise ConfigurationError(
                f"ratio_weight must be >= 0, got {self.ratio_weight}",
                field="ratio_weight",
            )

    def to_dict(self) -> dict:
        """Return a JSON-ready dict in field order."""
        return {
            "rho": self.rho,
            "gumbel_temperature": self.gumbel_temperature,
            "temperature_schedule": self.temperature_schedule.value,
            "hidden_width": self.hidden_width,
            "ratio_weight": self.ratio_weight,
        }


def gumbel_temperature(cfg: SelectorConfig, epoch: int, epochs: int) -> float:
    """
    Return the Gumbel-Softmax temperature for a training epoch.

    Parameters
    ----------
    cfg : SelectorConfig
        Selector settings.
    epoch : int
        0-based epoch index.
    epochs : int
        Total number of epochs.

    Returns
    -------
    float
        ``cfg.gumbel_temperature`` for the constant schedule; for the
        linear anneal, 5.0 at the first epoch falling linearly to 0.5 at
        the last.
    """
    if cfg.temperature_schedule is TemperatureSchedule.CONSTANT:
        return cfg.gumbel_temperature
    if epochs <= 1:
        return ANNEAL_END
    fraction = min(max(epoch / (epochs - 1), 0.0), 1.0)
    return ANNEAL_START + (ANNEAL_END - ANNEAL_START) * fraction


@dataclass
class TokenScore:
    """
    Keep/drop probabilities of every token.

    Attributes
    ----------
    log_probs : Tensor
        Log-probabilities [B, N, 2]; column 0 is keep, column 1 is drop.
    """

    log_probs: Tensor

    def __post_init__(self):
        self.log_probs = as_tensor(self.log_probs)
        if self.log_probs.ndim != 3 or self.log_probs.shape[-1] != 2:
            raise DimensionError(
                f"TokenScore needs shape [B, N, 2], got {self.log_probs.shape}",
                expected=2,
                actual=self.log_probs.shape,
            )

    @classmethod
    def from_probabilities(cls, probs) -> "TokenScore":
        """Build a score from explicit probabilities [B, N, 2] or [N, 2]."""
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim == 2:
            probs = probs[None]
        with np.errstate(divide="ignore"):
            return cls(Tensor(np.log(probs)))

    @property
    def S(self) -> Tensor:
        """Return the probability tensor [B, N, 2]."""
        return self.log_probs.exp()

    @property
    def keep_prob(self) -> np.ndarray:
        """Return keep probabilities [B, N] as a plain array."""
        return np.exp(self.log_probs.data[..., 0])


@dataclass
class TokenDecision:
    """
    Cumulative keep mask over the tokens of every image.

    Attributes
    ----------
    hard : np.ndarray
        Binary float32 array [B, N]; 1 keeps the token.
    soft : Tensor
        Relaxed keep probabilities [B, N] used on the backward path.
    keep : Tensor
        Straight-through mask [B, N]: equals ``hard`` in the forward pass,
        differentiates like ``soft``.
    layer_history : list[np.ndarray]
        Cumulative hard decision after every selector application.
    """

    hard: np.ndarray
    soft: Tensor
    keep: Tensor
    layer_history: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def keep_all(cls, batch: int, tokens: int) -> "TokenDecision":
        """Return the neutral decision that keeps every token."""
        ones = np.ones((batch, tokens), dtype=np.float32)
        return cls(ones, Tensor(ones.copy()), Tensor(ones.copy()))

    @classmethod
    def from_hard(cls, hard) -> "TokenDecision":
        """Wrap a binary mask [B, N] (or [N]) as a constant decision."""
        hard = np.atleast_2d(np.asarray(hard, dtype=np.float32))
        return cls(hard, Tensor(hard.copy()), Tensor(hard.copy()))

    @property
    def shape(self) -> tuple[int, int]:
        """Return (B, N)."""
        return self.hard.shape

    @property
    def kept_counts(self) -> np.ndarray:
        """Return the number of kept tokens per image."""
        return self.hard.sum(axis=1).astype(np.int64)


def straight_through(hard: np.ndarray, soft: Tensor) -> Tensor:
    """Return a tensor valued ``hard`` whose gradient flows to ``soft``."""
    hard = np.asarray(hard, dtype=soft.dtype)
    return Tensor._make(hard, (soft,), lambda g: (g,))


def temporal_gap(x) -> Tensor:
    """
    Average spikes over the time axis.

    Parameters
    ----------
    x : SpikeTensor or Tensor
        Spikes [T, B, N, D] (or [T, N, D] for a single image).

    Returns
    -------
    Tensor
        Firing rates [B, N, D] (or [N, D]) in [0, 1].

    Raises
    ------
    DimensionError
        If there are no timesteps.

    Examples
    --------
    >>> temporal_gap(Tensor(np.ones((4, 2, 3)))).data.max()
    1.0
    """
    if isinstance(x, SpikeTensor):
        x = x.data
    x = as_tensor(x)
    if x.ndim < 1 or x.shape[0] == 0:
        raise DimensionError(
            "temporal_gap needs at least one timestep", expected=">=1", actual=0
        )
    return x.mean(axis=0)


class TokenScorer(Module):
    """Scorer MLP: D -> hidden -> 2 with tanh in between."""

    def __init__(self, channels: int, hidden: int, rng: np.random.Generator):
        self.fc1 = Linear(channels, hidden, rng, prunable=False)
        self.fc2 = Linear(hidden, 2, rng, prunable=False)

    def forward(self, x_gap: Tensor) -> Tensor:
        return self.fc2(self.fc1(x_gap).tanh())


def score_tokens(x_gap, scorer: TokenScorer) -> TokenScore:
    """
    Score tokens from their firing rates.

    Parameters
    ----------
    x_gap : Tensor
        Firing rates [B, N, D] or [N, D].
    scorer : TokenScorer
        Two-layer scorer MLP.

    Returns
    -------
    TokenScore
        Row-stochastic keep/drop probabilities.
    """
    x_gap = as_tensor(x_gap)
    if x_gap.ndim == 2:
        x_gap = x_gap.reshape(1, *x_gap.shape)
    if x_gap.shape[-1] != scorer.fc1.in_features:
        raise DimensionError(
            f"scorer expects {scorer.fc1.in_features} channels, got "
            f"{x_gap.shape[-1]}",
            expected=scorer.fc1.in_features,
            actual=x_gap.shape[-1],
        )
    return TokenScore(scorer(x_gap).log_softmax(axis=-1))


def keep_counts(rho: float, alive: np.ndarray) -> np.ndarray:
    """Return ceil(rho * alive) per image, with ceil robust to rounding."""
    alive = np.asarray(alive, dtype=np.float64)
    return np.ceil(np.round(rho * alive, 9)).astype(np.int64)


def _top_k_mask(
    priority: np.ndarray, alive: np.ndarray, counts: np.ndarray
) -> np.ndarray:
    """Keep the ``counts[b]`` alive tokens of highest priority, lower index first."""
    priority = np.where(alive > 0, priority, -np.inf)
    order = np.argsort(-priority, axis=1, kind="stable")
    ranks = np.empty_like(order)
    rows = np.arange(order.shape[0])[:, None]
    ranks[rows, order] = np.arange(order.shape[1])[None, :]
    return ((ranks < counts[:, None]) & (alive > 0)).astype(np.float32)


def sample_keep_decision(
    score: TokenScore,
    cfg: SelectorConfig,
    mode: SelectionMode,
    rng: np.random.Generator | None = None,
    alive: np.ndarray | None = None,
    temperature: float | None = None,
) -> TokenDecision:
    """
    Turn keep/drop probabilities into a binary keep decision.

    Parameters
    ----------
    score : TokenScore
        Probabilities [B, N, 2].
    cfg : SelectorConfig
        Keep ratio and temperature.
    mode : SelectionMode
        TRAIN samples Gumbel-Softmax per token and emits a hard one-hot
        through the straight-through estimator; EVAL keeps the
        ceil(rho * alive) alive tokens of highest keep probability, ties
        broken by lower token index.
    rng : np.random.Generator, optional
        Gumbel noise source, required in TRAIN mode.
    alive : np.ndarray, optional
        Currently alive tokens [B, N] (default: all).
    temperature : float, optional
        Overrides ``cfg.gumbel_temperature``.

    Returns
    -------
    TokenDecision
        The decision of this application alone; combine it with the
        running decision through :func:`compose_decision`.

    Raises
    ------
    ConfigurationError
        If the temperature is not positive.
    UsageError
        If TRAIN mode is requested without an RNG.
    """
    mode = SelectionMode(mode)
    tau = cfg.gumbel_temperature if temperature is None else temperature
    if not tau > 0:
        raise ConfigurationError(
            f"gumbel temperature must be > 0, got {tau}", field="gumbel_temperature"
        )
    batch, tokens, _ = score.log_probs.shape
    alive = (
        np.ones((batch, tokens), dtype=np.float32)
        if alive is None
        else np.asarray(alive, dtype=np.float32)
    )
    if alive.shape != (batch, tokens):
        raise DimensionError(
            f"alive mask {alive.shape} does not match scores {(batch, tokens)}",
            expected=(batch, tokens),
            actual=alive.shape,
        )

    if mode is SelectionMode.EVAL:
        keep_prob = score.keep_prob
        hard = _top_k_mask(keep_prob, alive, keep_counts(cfg.rho, alive.sum(axis=1)))
        soft = score.log_probs[..., 0].exp()
        return TokenDecision(hard, soft, Tensor(hard.copy()), [hard])

    if rng is None:
        raise UsageError("Gumbel sampling in train mode needs an explicit rng")
    uniform = rng.uniform(np.finfo(np.float64).tiny, 1.0, size=(batch, tokens, 2))
    gumbel = -np.log(-np.log(uniform)).astype(score.log_probs.dtype)
    relaxed = ((score.log_probs + gumbel) * (1.0 / tau)).softmax(axis=-1)
    hard = (relaxed.data.argmax(axis=-1) == 0).astype(np.float32)

    empty = ((hard * alive).sum(axis=1) == 0) & (alive.sum(axis=1) > 0)
    if empty.any():
        ones = np.ones(int(empty.sum()), dtype=np.int64)
        forced = _top_k_mask(score.keep_prob[empty], alive[empty], ones)
        hard[empty] = np.maximum(hard[empty], forced)
        logger.debug(f"Forced one kept token in {int(empty.sum())} image(s)")

    soft = relaxed[..., 0]
    return TokenDecision(hard, soft, straight_through(hard, soft), [hard])


def compose_decision(prev: TokenDecision, new: TokenDecision) -> TokenDecision:
    """
    Combine two decisions by Hadamard product.

    Raises
    ------
    DimensionError
        If the decisions cover different token sets.

    Examples
    --------
    >>> a = TokenDecision.from_hard([1, 1, 0, 1])
    >>> b = TokenDecision.from_hard([1, 0, 1, 1])
    >>> compose_decision(a, b).hard
    array([[1., 0., 0., 1.]], dtype=float32)
    """
    if prev.shape != new.shape:
        raise DimensionError(
            f"cannot compose decisions of shape {prev.shape} and {new.shape}",
            expected=prev.shape,
            actual=new.shape,
        )
    hard = prev.hard * new.hard
    return TokenDecision(
        hard,
        prev.soft * new.soft,
        prev.keep * new.keep,
        prev.layer_history + [hard],
    )


def keep_schedule(rho: float, selector_layers, tokens: int) -> list[int]:
    """
    Expected kept-token count after every selector application.

    Parameters
    ----------
    rho : float
        Keep ratio per application.
    selector_layers : sequence of int
        Blocks carrying a selector; only their count matters.
    tokens : int
        Token count N before the first selector.

    Returns
    -------
    list[int]
        Counts after applications 1..S, each ceil(rho * previous).

    Examples
    --------
    >>> keep_schedule(0.7, [2, 3, 4], 64)
    [45, 32, 23]
    """
    if not 0 < rho <= 1:
        raise ConfigurationError(f"rho must be in (0, 1], got {rho}", field="rho")
    counts = []
    alive = tokens
    for _ in selector_layers:
        alive = int(keep_counts(rho, np.array([alive]))[0])
        counts.append(alive)
    return counts


class BaseSelector(Module, ABC):
    """
    Abstract token selector.

    Subclasses decide which alive tokens survive one application and
    report the scores they used.

    Examples
    --------
    >>> class KeepFirst(BaseSelector):
    ...     def select(self, x, alive, mode, rng=None):
    ...         ...
    """

    def __init__(self, cfg: SelectorConfig):
        self.cfg = cfg
        self.temperature = cfg.gumbel_temperature

    @property
    @abstractmethod
    def name(self) -> str:
        """Return the selector identifier."""
        pass

    @abstractmethod
    def select(
        self,
        x: Tensor,
        alive: np.ndarray,
        mode: SelectionMode,
        rng: np.random.Generator | None = None,
    ) -> tuple[TokenDecision, TokenScore]:
        """
        Decide which of the alive tokens of ``x`` survive.

        Parameters
        ----------
        x : Tensor
            Spikes [T, B, n, D] entering the block.
        alive : np.ndarray
            Currently alive tokens [B, n].
        mode : SelectionMode
            Training or inference behaviour.
        rng : np.random.Generator, optional
            Randomness source for stochastic decisions.

        Returns
        -------
        tuple[TokenDecision, TokenScore]
            The new (not yet composed) decision and the scores behind it.
        """
        pass

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(rho={self.cfg.rho})"


class SpikingTokenSelector(BaseSelector):
    """Firing-rate driven selector with a learned scorer."""

    def __init__(self, channels: int, cfg: SelectorConfig, rng: np.random.Generator):
        super().__init__(cfg)
        hidden = cfg.hidden_width or max(channels // 2, 1)
        self.scorer = TokenScorer(channels, hidden, rng)

    @property
    def name(self) -> str:
        return "spiking"

    def select(self, x, alive, mode, rng=None):
        score = score_tokens(temporal_gap(x), self.scorer)
        decision = sample_keep_decision(
            score, self.cfg, mode, rng, alive, temperature=self.temperature
        )
        return decision, score


class RandomTokenSelector(BaseSelector):
    """Uniformly random keep of ceil(rho * alive) tokens; no parameters."""

    @property
    def name(self) -> str:
        return "random"

    def select(self, x, alive, mode, rng=None):
        if rng is None:
            raise UsageError("RandomTokenSelector needs an explicit rng")
        alive = np.asarray(alive, dtype=np.float32)
        priority = rng.random(alive.shape)
        counts = keep_counts(self.cfg.rho, alive.sum(axis=1))
        hard = _top_k_mask(priority, alive, counts)
        rho = self.cfg.rho
        probs = np.stack([np.full(alive.shape, rho), np.full(alive.shape, 1 - rho)], -1)
        score = TokenScore.from_probabilities(probs)
        constant = Tensor(hard.copy())
        return TokenDecision(hard, constant, constant, [hard]), score


SELECTORS = {
    "spiking": SpikingTokenSelector,
    "random": RandomTokenSelector,
}


def build_selector(
    kind: str, channels: int, cfg: SelectorConfig, rng: np.random.Generator
) -> BaseSelector:
    """
    Create a selector by registry name.

    Raises
    ------
    ConfigurationError
        If ``kind`` is not a registered selector.
    """
    if kind not in SELECTORS:
        raise ConfigurationError(
            f"Unknown selector: '{kind}'. Available selectors: {list(SELECTORS)}",
            field="selector",
        )
    if kind == "random":
        return RandomTokenSelector(cfg)
    return SELECTORS[kind](channels, cfg, rng)


def export_decision_trace(
    decision: TokenDecision,
    scores: list[np.ndarray],
    layers: list[int],
    path: Path | str,
    image: int = 0,
) -> Path:
    """
    Write the per-layer decisions of one image as CSV.

    Parameters
    ----------
    decision : TokenDecision
        Final decision; its ``layer_history`` holds one entry per selector.
    scores : list[np.ndarray]
        Keep probabilities [B, N] per selector application.
    layers : list[int]
        Encoder block index of every selector application.
    path : Path or str
        Output CSV path.
    image : int, optional
        Batch index to export (default: 0).

    Returns
    -------
    Path
        The written file with header ``layer,token_index,kept,score``.
    """
    history = decision.layer_history
    if not len(history) == len(scores) == len(layers):
        raise DimensionError(
            f"history ({len(history)}), scores ({len(scores)}) and layers "
            f"({len(layers)}) differ in length",
            expected=len(history),
            actual=(len(scores), len(layers)),
        )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["layer", "token_index", "kept", "score"])
        for layer, hard, score in zip(layers, history, scores):
            for token in range(hard.shape[1]):
                writer.writerow(
                    [
                        layer,
                        token,
                        int(hard[image, token]),
                        f"{float(score[image, token]):.6f}",
                    ]
                )
    logger.info(f"Wrote decision trace for {len(layers)} selector(s) to {path}")
    return path
