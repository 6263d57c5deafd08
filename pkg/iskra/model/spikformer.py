"""
Spikformer with spiking token selection.

Data flow of one forward pass::

    images -> SpikingPatchSplitting -> [EncoderBlock] x L -> ClassificationHead

Activations between blocks are binary spike tensors [T, B, N, D]. Each
encoder block optionally starts with a token selector, then runs spiking
self-attention and the spiking MLP, both with spike-OR residuals so that
dropped tokens pass through unchanged.

Two execution strategies produce identical logits in inference:
- "mask": every token is computed, dropped tokens are excluded from
  attention and overwritten by their residual (used for training)
- "gather": kept tokens are compacted after every selector and dropped
  ones are never computed again (inference only)
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from iskra.core.autograd import (
    Tensor,
    as_tensor,
    max_pool2x2,
    stack,
    take_along_tokens,
)
from iskra.core.neurons import LIFNode, SpikeTensor
from iskra.exceptions import DimensionError, EmptyTokenSetError, UsageError
from iskra.model.config import ModelConfig
from iskra.core.layers import ChannelAffine, Conv2d, Linear, Module
from iskra.selection.selector import (
    BaseSelector,
    SelectionMode,
    SelectorConfig,
    TokenDecision,
    build_selector,
    compose_decision,
)

logger = logging.getLogger(__name__)

# threshold of the neuron after the attention product
ATTENTION_THRESHOLD = 0.5


class ExecutionMode(str, Enum):
    """How dropped tokens are handled."""

    MASK = "mask"
    GATHER = "gather"


def spike_or(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise OR of two binary tensors, ``a + b - a * b``."""
    return a + b - a * b


def _lif(cfg: ModelConfig, threshold: float | None = None) -> LIFNode:
    return LIFNode(
        threshold=cfg.threshold if threshold is None else threshold,
        decay=cfg.decay,
        reset_mode=cfg.reset_mode,
        surrogate=cfg.surrogate,
    )


def _unwrap(x) -> tuple[Tensor, bool]:
    if isinstance(x, SpikeTensor):
        return x.data, True
    return as_tensor(x), False


def _keep_tensor(keep, batch: int, tokens: int) -> Tensor | None:
    if keep is None:
        return None
    if isinstance(keep, TokenDecision):
        keep = keep.keep
    keep = as_tensor(keep)
    if keep.ndim == 1:
        keep = keep.reshape(1, keep.shape[0])
    if keep.shape != (batch, tokens):
        raise DimensionError(
            f"keep mask {keep.shape} does not match {batch} image(s) x {tokens} tokens",
            expected=(batch, tokens),
            actual=keep.shape,
        )
    return keep


def _masked_residual(x: Tensor, y: Tensor, keep: Tensor | None) -> Tensor:
    if keep is None:
        return spike_or(x, y)
    batch, tokens = keep.shape
    return spike_or(x, y * keep.reshape(1, batch, tokens, 1))


class SpsLayer(Module):
    """Convolution, channel affine, LIF and optional 2x2 max pooling."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        pool: bool,
        cfg: ModelConfig,
        rng: np.random.Generator,
    ):
        self.conv = Conv2d(in_channels, out_channels, kernel, rng)
        self.affine = ChannelAffine(out_channels, rng, axis=1)
        self.lif = _lif(cfg)
        self.pool = pool

    def forward(self, x: Tensor) -> Tensor:
        """Map [T, B, C, H, W] to spikes [T, B, O, H', W']."""
        steps, batch = x.shape[:2]
        y = self.affine(self.conv(x.reshape(steps * batch, *x.shape[2:])))
        y = self.lif(y.reshape(steps, batch, *y.shape[1:]))
        return max_pool2x2(y) if self.pool else y


class SpikingPatchSplitting(Module):
    """
    Convolutional front-end turning images into spike tokens.

    Static images [B, C, H, W] are repeated over T; the first convolution
    is computed once and its output replicated, which is equivalent to
    convolving every repeated frame. Frame sequences [B, T, C, H, W] are
    processed frame by frame.
    """

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        stages = []
        channels = cfg.in_channels
        for stage in cfg.sps_stages:
            out = stage.out_channels
            stages.append(SpsLayer(channels, out, stage.kernel, stage.pool, cfg, rng))
            channels = out
        self.stages = stages
        self.rpe = SpsLayer(cfg.D, cfg.D, 3, False, cfg, rng) if cfg.rpe else None

    def _check(self, shape: tuple[int, ...]) -> None:
        cfg = self.cfg
        expected = (cfg.in_channels, cfg.image_hw, cfg.image_hw)
        if tuple(shape[-3:]) != expected:
            raise DimensionError(
                f"SPS expects images with [C, H, W] = {list(expected)}, got "
                f"{list(shape[-3:])}",
                expected=expected,
                actual=tuple(shape[-3:]),
            )

    def forward(self, images) -> Tensor:
        cfg = self.cfg
        images = as_tensor(images)
        if images.ndim == 3:
            images = images.reshape(1, *images.shape)
        if images.ndim not in (4, 5):
            raise DimensionError(
                f"SPS expects [B, C, H, W] or [B, T, C, H, W], got {images.shape}",
                expected=4,
                actual=images.ndim,
            )
        self._check(images.shape)

        first, rest = self.stages[0], self.stages[1:]
        if images.ndim == 4:
            current = first.affine(first.conv(images))
            current = stack([current] * cfg.T, axis=0)
        else:
            if images.shape[1] != cfg.T:
                raise DimensionError(
                    f"frame sequence has {images.shape[1]} timesteps, expected {cfg.T}",
                    expected=cfg.T,
                    actual=images.shape[1],
                )
            frames = images.swapaxes(0, 1)
            steps, batch = frames.shape[:2]
            current = first.affine(
                first.conv(frames.reshape(steps * batch, *frames.shape[2:]))
            )
            current = current.reshape(steps, batch, *current.shape[1:])
        current = first.lif(current)
        if first.pool:
            current = max_pool2x2(current)
        for stage in rest:
            current = stage(current)
        if self.rpe is not None:
            current = spike_or(current, self.rpe(current))

        steps, batch, channels, rows, cols = current.shape
        return current.reshape(steps, batch, channels, rows * cols).swapaxes(2, 3)


class SpikingSelfAttention(Module):
    """
    Softmax-free self-attention on spike-form Q, K and V.

    ``attn = Q K^T V * s / sqrt(D / heads)`` per head, followed by a LIF,
    the output projection and a second LIF. Tokens with keep = 0 are
    removed from K and V and keep their input through the residual.
    """

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.heads = cfg.heads
        self.scale = cfg.attention_scale / float(np.sqrt(cfg.head_dim))
        self.q = Linear(cfg.D, cfg.D, rng, bias=False)
        self.q_affine = ChannelAffine(cfg.D, rng)
        self.k = Linear(cfg.D, cfg.D, rng, bias=False)
        self.k_affine = ChannelAffine(cfg.D, rng)
        self.v = Linear(cfg.D, cfg.D, rng, bias=False)
        self.v_affine = ChannelAffine(cfg.D, rng)
        self.proj = Linear(cfg.D, cfg.D, rng)
        self.proj_affine = ChannelAffine(cfg.D, rng)
        self.q_lif = _lif(cfg)
        self.k_lif = _lif(cfg)
        self.v_lif = _lif(cfg)
        self.attn_lif = _lif(cfg, ATTENTION_THRESHOLD)
        self.proj_lif = _lif(cfg)

    def _split(self, x: Tensor) -> Tensor:
        steps, batch, tokens, channels = x.shape
        head_dim = channels // self.heads
        return x.reshape(steps, batch, tokens, self.heads, head_dim).transpose(
            0, 1, 3, 2, 4
        )

    def forward(self, x, keep=None):
        """
        Attend over the kept tokens.

        Parameters
        ----------
        x : SpikeTensor or Tensor
            Spikes [T, B, N, D].
        keep : TokenDecision, Tensor or np.ndarray, optional
            Keep mask [B, N] (or [N] for one image); None keeps all.

        Returns
        -------
        SpikeTensor or Tensor
            Spikes [T, B, N, D], the same type as ``x``.
        """
        x, wrapped = _unwrap(x)
        steps, batch, tokens, channels = x.shape
        keep = _keep_tensor(keep, batch, tokens)

        q = self.q_lif(self.q_affine(self.q(x)))
        k = self.k_lif(self.k_affine(self.k(x)))
        v = self.v_lif(self.v_affine(self.v(x)))
        if keep is not None:
            token_mask = keep.reshape(1, batch, tokens, 1)
            k = k * token_mask
            v = v * token_mask

        q, k, v = self._split(q), self._split(k), self._split(v)
        attn = (q @ k.swapaxes(-1, -2)) @ v * self.scale
        attn = attn.transpose(0, 1, 3, 2, 4).reshape(steps, batch, tokens, channels)
        y = self.attn_lif(attn)
        y = self.proj_lif(self.proj_affine(self.proj(y)))
        out = _masked_residual(x, y, keep)
        return SpikeTensor(out) if wrapped else out


class SpikingMLP(Module):
    """Two spiking linear layers with hidden width mlp_ratio * D."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.fc1 = Linear(cfg.D, cfg.hidden, rng)
        self.fc1_affine = ChannelAffine(cfg.hidden, rng)
        self.fc2 = Linear(cfg.hidden, cfg.D, rng)
        self.fc2_affine = ChannelAffine(cfg.D, rng)
        self.fc1_lif = _lif(cfg)
        self.fc2_lif = _lif(cfg)

    def forward(self, x, keep=None):
        """Apply the MLP at kept tokens; dropped tokens keep their input."""
        x, wrapped = _unwrap(x)
        _, batch, tokens, _ = x.shape
        keep = _keep_tensor(keep, batch, tokens)
        hidden = self.fc1_lif(self.fc1_affine(self.fc1(x)))
        y = self.fc2_lif(self.fc2_affine(self.fc2(hidden)))
        out = _masked_residual(x, y, keep)
        return SpikeTensor(out) if wrapped else out


@dataclass
class TokenState:
    """
    Running token bookkeeping of one forward pass.

    Attributes
    ----------
    decision : TokenDecision
        Cumulative decision over all N tokens.
    index : np.ndarray or None
        Gather mode only: original positions [B, K] of the compacted tokens.
    local_index : np.ndarray or None
        Gather mode only: positions kept by the latest selector, relative
        to the tokens that entered it.
    scores : list[np.ndarray]
        Keep probabilities [B, N] of every selector application.
    layers : list[int]
        Block index of every selector application.
    soft_keep_means : list[Tensor]
        Mean cumulative soft keep per selector application (scalars).
    """

    decision: TokenDecision
    index: np.ndarray | None = None
    local_index: np.ndarray | None = None
    scores: list[np.ndarray] = field(default_factory=list)
    layers: list[int] = field(default_factory=list)
    soft_keep_means: list[Tensor] = field(default_factory=list)

    @property
    def gathered(self) -> bool:
        """Return True when tokens are compacted."""
        return self.index is not None


class EncoderBlock(Module):
    """Optional token selector, spiking self-attention and spiking MLP."""

    def __init__(
        self,
        cfg: ModelConfig,
        index: int,
        rng: np.random.Generator,
        selector: BaseSelector | None = None,
    ):
        self.index = index
        self.selector = selector
        self.attn = SpikingSelfAttention(cfg, rng)
        self.mlp = SpikingMLP(cfg, rng)

    @property
    def selects(self) -> bool:
        """Return True if this block prunes tokens."""
        return self.selector is not None and self.selector.cfg.rho < 1.0

    def forward(
        self,
        x: Tensor,
        state: TokenState,
        mode: SelectionMode = SelectionMode.EVAL,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, TokenState]:
        """
        Run the block and update the token decision.

        Returns
        -------
        tuple[Tensor, TokenState]
            Output spikes and the token state after this block's selector.
        """
        if self.selects:
            state = self._select(x, state, mode, rng)
            if state.gathered:
                x = take_along_tokens(x, state.local_index)
        keep = None if state.gathered else state.decision.keep
        x = self.attn(x, keep)
        x = self.mlp(x, keep)
        return x, state

    def _select(self, x, state, mode, rng) -> TokenState:
        decision = state.decision
        if not state.gathered:
            new, score = self.selector.select(x, decision.hard, mode, rng)
            decision = compose_decision(decision, new)
            scores = score.keep_prob
        else:
            batch, kept = state.index.shape
            local_alive = np.ones((batch, kept), dtype=np.float32)
            new, score = self.selector.select(x, local_alive, mode, rng)
            counts = new.hard.sum(axis=1)
            if np.any(counts != counts[0]):
                raise UsageError("gather execution needs equal kept counts per image")
            local = np.sort(
                np.argsort(-new.hard, axis=1, kind="stable")[:, : int(counts[0])],
                axis=1,
            )
            rows = np.arange(batch)[:, None]
            full_hard = np.zeros_like(decision.hard)
            full_hard[rows, np.take_along_axis(state.index, local, axis=1)] = 1.0
            scores = np.zeros_like(decision.hard)
            scores[rows, state.index] = score.keep_prob
            decision = compose_decision(decision, TokenDecision.from_hard(full_hard))
            state.local_index = local
            state.index = np.take_along_axis(state.index, local, axis=1)

        state.decision = decision
        state.scores.append(scores)
        state.layers.append(self.index)
        state.soft_keep_means.append(decision.soft.mean())
        return state


class ClassificationHead(Module):
    """Average over kept tokens, then over time, then a linear layer."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.fc = Linear(cfg.D, cfg.num_classes, rng)

    def forward(self, x, keep=None) -> Tensor:
        """
        Classify spike tokens.

        Raises
        ------
        EmptyTokenSetError
            If an image has no kept token.
        """
        x, _ = _unwrap(x)
        steps, batch, tokens, channels = x.shape
        keep_tensor = _keep_tensor(keep, batch, tokens)
        if keep_tensor is None:
            pooled = x.mean(axis=2)
        else:
            counts = keep_tensor.data.sum(axis=1)
            if np.any(counts == 0):
                raise EmptyTokenSetError(
                    f"{int(np.sum(counts == 0))} image(s) have no kept token",
                    expected=">=1",
                    actual=0,
                )
            masked = x * keep_tensor.reshape(1, batch, tokens, 1)
            pooled = masked.sum(axis=2) * (1.0 / counts).astype(x.dtype).reshape(
                1, batch, 1
            )
        return self.fc(pooled.mean(axis=0))


@dataclass
class ForwardResult:
    """
    Outputs of :meth:`Spikformer.forward`.

    Attributes
    ----------
    logits : Tensor
        Class scores [B, num_classes].
    decision : TokenDecision
        Final cumulative keep decision [B, N].
    soft_keep_means : list[Tensor]
        Mean soft keep per selector application, for the ratio regulariser.
    spikes_by_layer : list[np.ndarray]
        Spikes [T, B, N, D] after SPS and after every block (mask mode,
        when recording is requested).
    scores : list[np.ndarray]
        Keep probabilities [B, N] per selector application.
    selector_layers : list[int]
        Block index of every selector application.
    """

    logits: Tensor
    decision: TokenDecision
    soft_keep_means: list[Tensor]
    spikes_by_layer: list[np.ndarray]
    scores: list[np.ndarray]
    selector_layers: list[int]


class Spikformer(Module):
    """
    Spiking vision transformer with token selection.

    Parameters
    ----------
    cfg : ModelConfig
        Model geometry.
    rng : np.random.Generator or int, optional
        Initialisation randomness (default: seed 0).
    selector_cfg : SelectorConfig, optional
        Selector settings; defaults to ``SelectorConfig(rho=cfg.rho)``.
    selector_kind : str, optional
        "spiking" (learned) or "random" (default: "spiking").

    Examples
    --------
    >>> model = Spikformer(desk_config(rho=0.7), rng=0)
    >>> result = model.forward(images, mode="eval")
    >>> result.decision.kept_counts
    array([23, 23])
    """

    def __init__(
        self,
        cfg: ModelConfig,
        rng: np.random.Generator | int | None = None,
        selector_cfg: SelectorConfig | None = None,
        selector_kind: str = "spiking",
    ):
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(0 if rng is None else rng)
        if selector_cfg is None:
            selector_cfg = SelectorConfig(rho=cfg.rho)
        elif selector_cfg.rho != cfg.rho:
            logger.debug(
                f"Selector rho {selector_cfg.rho} overrides model rho {cfg.rho}"
            )
        self.cfg = cfg
        self.selector_cfg = selector_cfg
        self.selector_kind = selector_kind
        self.sps = SpikingPatchSplitting(cfg, rng)
        blocks = []
        for index in range(1, cfg.L + 1):
            selector = None
            if index in cfg.selector_layers:
                selector = build_selector(selector_kind, cfg.D, selector_cfg, rng)
            blocks.append(EncoderBlock(cfg, index, rng, selector))
        self.blocks = blocks
        self.head = ClassificationHead(cfg, rng)
        self.assign_names()

    @property
    def selectors(self) -> list[BaseSelector]:
        """Return the selectors in block order."""
        return [b.selector for b in self.blocks if b.selector is not None]

    def set_temperature(self, temperature: float) -> None:
        """Set the Gumbel-Softmax temperature of every selector."""
        for selector in self.selectors:
            selector.temperature = temperature

    def sps_forward(self, images) -> SpikeTensor:
        """Encode images into validated spike tokens [T, B, N, D]."""
        return SpikeTensor(self.sps(images))

    def classify(self, x, keep=None) -> Tensor:
        """Return logits for spike tokens averaged over kept tokens and time."""
        return self.head(x, keep)

    def forward(
        self,
        images,
        mode: SelectionMode | str | None = None,
        rng: np.random.Generator | None = None,
        execution: ExecutionMode | str = ExecutionMode.MASK,
        record_spikes: bool = False,
    ) -> ForwardResult:
        """
        Classify a batch of images.

        Parameters
        ----------
        images : array_like
            Static images [B, C, H, W] or frame sequences [B, T, C, H, W].
        mode : SelectionMode or str, optional
            "train" or "eval"; defaults to the module's training flag.
        rng : np.random.Generator, optional
            Randomness for Gumbel sampling and random selectors.
        execution : ExecutionMode or str, optional
            "mask" (default) or "gather" (inference only).
        record_spikes : bool, optional
            Keep a copy of the spikes after SPS and every block (mask mode).

        Returns
        -------
        ForwardResult

        Raises
        ------
        UsageError
            If gather execution is requested in training mode.
        """
        if mode is None:
            mode = SelectionMode.TRAIN if self.training else SelectionMode.EVAL
        mode = SelectionMode(mode)
        execution = ExecutionMode(execution)
        if execution is ExecutionMode.GATHER and mode is SelectionMode.TRAIN:
            raise UsageError("gather execution is inference-only; use mask mode")

        x = self.sps(images)
        steps, batch, tokens, _ = x.shape
        state = TokenState(TokenDecision.keep_all(batch, tokens))
        if execution is ExecutionMode.GATHER:
            state.index = np.tile(np.arange(tokens), (batch, 1))
        recorded = [x.data.copy()] if record_spikes and not state.gathered else []

        for block in self.blocks:
            x, state = block(x, state, mode, rng)
            if recorded:
                recorded.append(x.data.copy())

        keep = None if state.gathered else state.decision.keep
        logits = self.head(x, keep)
        return ForwardResult(
            logits=logits,
            decision=state.decision,
            soft_keep_means=state.soft_keep_means,
            spikes_by_layer=recorded,
            scores=state.scores,
            selector_layers=state.layers,
        )

    def __repr__(self) -> str:
        cfg = self.cfg
        return (
            f"Spikformer(name='{cfg.name}', T={cfg.T}, L={cfg.L}, D={cfg.D}, "
            f"N={cfg.patch_tokens}, rho={self.selector_cfg.rho}, "
            f"selector='{self.selector_kind}')"
        )
