"""
Leaky integrate-and-fire neurons with surrogate gradients.

This module provides the spiking primitives of iskra:
- heaviside_spike: exact binary step on plain arrays
- surrogate_derivative / surrogate_primitive: smooth stand-ins for the
  derivative of the step and the step itself
- spike_fn: differentiable step node (binary forward, surrogate backward)
- lif_step: one timestep of leaky integration, firing and reset
- LIFNode: multi-step layer running lif_step sequentially over T
- SpikeTensor: validated binary activation tensor [T, B, N, D]

Neuron constants default to V_th = 1.0, decay = 0.5 and hard reset to
zero. The surrogate defaults to the sigmoid derivative with sharpness
alpha = 4.0.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from iskra.core.autograd import Tensor, as_tensor, stack
from iskra.exceptions import ConfigurationError, DimensionError

DEFAULT_THRESHOLD = 1.0
DEFAULT_DECAY = 0.5
DEFAULT_SURROGATE_WIDTH = 4.0


class ResetMode(str, Enum):
    """How the membrane potential is reset after a spike."""

    HARD_ZERO = "hard_zero"
    SOFT_SUBTRACT = "soft_subtract"


class SurrogateKind(str, Enum):
    """Family of the surrogate derivative."""

    SIGMOID = "sigmoid"
    RECTANGULAR = "rectangular"
    ARCTAN = "arctan"


@dataclass(frozen=True)
class SurrogateConfig:
    """
    Surrogate gradient of the Heaviside step.

    Attributes
    ----------
    kind : SurrogateKind
        sigmoid: alpha * s * (1 - s) with s = sigmoid(alpha * x);
        rectangular: alpha on |x| < 1 / (2 * alpha), 0 elsewhere;
        arctan: (alpha / 2) / (1 + (pi / 2 * alpha * x) ** 2).
        Every kind integrates to 1 over the real line.
    width : float
        Sharpness alpha > 0. Larger values give a narrower, taller peak.
    """

    kind: SurrogateKind = SurrogateKind.SIGMOID
    width: float = DEFAULT_SURROGATE_WIDTH

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", SurrogateKind(self.kind))
        except ValueError:
            raise ConfigurationError(
                f"Unknown surrogate kind: '{self.kind}'. "
                f"Supported: {[k.value for k in SurrogateKind]}",
                field="kind",
            )
        if not np.isfinite(self.width) or self.width <= 0:
            raise ConfigurationError(
                f"Surrogate width must be > 0, got {self.width}", field="width"
            )


def heaviside_spike(x) -> np.ndarray:
    """
    Exact binary step: 1 where x >= 0, else 0.

    Parameters
    ----------
    x : array_like
        Real-valued input.

    Returns
    -------
    np.ndarray
        Array of zeros and ones with the input's floating dtype
        (float32 for non-floating input).

    Examples
    --------
    >>> heaviside_spike([-1.0, 0.0, 2.0])
    array([0., 1., 1.], dtype=float32)
    """
    x = np.asarray(x)
    dtype = x.dtype if np.issubdtype(x.dtype, np.floating) else np.float32
    return (x >= 0).astype(dtype)


def surrogate_derivative(x, cfg: SurrogateConfig) -> np.ndarray:
    """
    Surrogate for d/dx of the Heaviside step.

    Nonnegative, symmetric about 0, maximal at 0 and vanishing as
    |x| grows.

    Parameters
    ----------
    x : array_like
        Distance of the membrane potential from the threshold.
    cfg : SurrogateConfig
        Surrogate family and sharpness.

    Returns
    -------
    np.ndarray
        Derivative values, same shape as ``x``.
    """
    if not isinstance(cfg, SurrogateConfig):
        raise ConfigurationError(f"Expected SurrogateConfig, got {type(cfg).__name__}")
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(np.float32)
    alpha = x.dtype.type(cfg.width)

    if cfg.kind is SurrogateKind.SIGMOID:
        s = _sigmoid(alpha * x)
        return alpha * s * (1 - s)
    if cfg.kind is SurrogateKind.RECTANGULAR:
        return np.where(np.abs(x) < 0.5 / alpha, alpha, 0).astype(x.dtype)
    scaled = (np.pi / 2) * alpha * x
    return ((alpha / 2) / (1 + scaled * scaled)).astype(x.dtype)


def surrogate_primitive(x, cfg: SurrogateConfig) -> np.ndarray:
    """
    Smooth step whose derivative is :func:`surrogate_derivative`.

    Used as the companion function for finite-difference checks.
    """
    x = np.asarray(x, dtype=np.float64)
    alpha = float(cfg.width)
    if cfg.kind is SurrogateKind.SIGMOID:
        return _sigmoid(alpha * x)
    if cfg.kind is SurrogateKind.RECTANGULAR:
        return np.clip(alpha * x + 0.5, 0.0, 1.0)
    return np.arctan((np.pi / 2) * alpha * x) / np.pi + 0.5


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1 + np.tanh(0.5 * x))


def spike_fn(x: Tensor, surrogate: SurrogateConfig) -> Tensor:
    """
    Differentiable spike: heaviside forward, surrogate backward.

    Parameters
    ----------
    x : Tensor
        Pre-activation (membrane potential minus threshold).
    surrogate : SurrogateConfig
        Surrogate used on the backward path.

    Returns
    -------
    Tensor
        Exactly binary tensor.
    """
    x = as_tensor(x)
    pre = x.data

    def _bw(g):
        return (g * surrogate_derivative(pre, surrogate),)

    return Tensor._make(heaviside_spike(pre), (x,), _bw)


@dataclass
class MembraneState:
    """
    Membrane of a population of LIF neurons.

    Attributes
    ----------
    potential : Tensor
        Membrane voltage, any shape (typically [B, N, D]).
    threshold : float
        Firing threshold V_th > 0.
    decay : float
        Leak factor per timestep, 0 < decay <= 1.
    reset_mode : ResetMode
        hard_zero sets spiking neurons to 0, soft_subtract subtracts V_th.
    """

    potential: Tensor
    threshold: float = DEFAULT_THRESHOLD
    decay: float = DEFAULT_DECAY
    reset_mode: ResetMode = ResetMode.HARD_ZERO

    def __post_init__(self):
        self.potential = as_tensor(self.potential)
        self.reset_mode = ResetMode(self.reset_mode)
        validate_neuron_constants(self.threshold, self.decay)

    @classmethod
    def zeros(
        cls,
        shape: tuple[int, ...],
        dtype=np.float32,
        threshold: float = DEFAULT_THRESHOLD,
        decay: float = DEFAULT_DECAY,
        reset_mode: ResetMode = ResetMode.HARD_ZERO,
    ) -> "MembraneState":
        """Create a resting membrane of the given shape."""
        return cls(Tensor(np.zeros(shape, dtype=dtype)), threshold, decay, reset_mode)


def validate_neuron_constants(threshold: float, decay: float) -> None:
    """Raise ConfigurationError unless V_th > 0 and 0 < decay <= 1."""
    if not threshold > 0:
        raise ConfigurationError(
            f"threshold must be > 0, got {threshold}", field="threshold"
        )
    if not 0 < decay <= 1:
        raise ConfigurationError(f"decay must be in (0, 1], got {decay}", field="decay")


def lif_step(
    state: MembraneState,
    input_current,
    surrogate: SurrogateConfig,
    detach_reset: bool = True,
) -> tuple[Tensor, MembraneState]:
    """
    Advance a LIF population by one timestep.

    The potential integrates ``decay * v + input``; neurons at or above
    threshold emit a spike and are reset.

    Parameters
    ----------
    state : MembraneState
        Membrane before the step.
    input_current : Tensor or array_like
        Synaptic input, same shape as the potential.
    surrogate : SurrogateConfig
        Surrogate gradient of the firing nonlinearity.
    detach_reset : bool, optional
        Exclude the reset from the backward graph (default: True).

    Returns
    -------
    tuple[Tensor, MembraneState]
        Binary spikes and the membrane after reset.

    Raises
    ------
    DimensionError
        If input and potential shapes differ.

    Examples
    --------
    >>> state = MembraneState.zeros((1,))
    >>> spikes, state = lif_step(state, np.array([2.0]), SurrogateConfig())
    >>> spikes.data, state.potential.data
    (array([1.], dtype=float32), array([0.], dtype=float32))
    """
    current = as_tensor(input_current)
    if current.shape != state.potential.shape:
        raise DimensionError(
            f"input current {current.shape} does not match membrane "
            f"{state.potential.shape}",
            expected=state.potential.shape,
            actual=current.shape,
        )
    potential = state.potential * state.decay + current
    spikes = spike_fn(potential - state.threshold, surrogate)
    gate = spikes.detach() if detach_reset else spikes

    if state.reset_mode is ResetMode.HARD_ZERO:
        potential = potential * (1.0 - gate)
    else:
        potential = potential - gate * state.threshold

    new_state = MembraneState(
        potential, state.threshold, state.decay, state.reset_mode
    )
    return spikes, new_state


@dataclass
class LIFNode:
    """
    Multi-step LIF layer.

    Runs :func:`lif_step` over the leading time axis of its input with the
    membrane carried across timesteps and reset to rest at every call.

    Examples
    --------
    >>> node = LIFNode()
    >>> spikes = node(Tensor(np.ones((4, 2, 8), dtype=np.float32)))
    >>> spikes.shape
    (4, 2, 8)
    """

    threshold: float = DEFAULT_THRESHOLD
    decay: float = DEFAULT_DECAY
    reset_mode: ResetMode = ResetMode.HARD_ZERO
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    detach_reset: bool = True

    def __post_init__(self):
        self.reset_mode = ResetMode(self.reset_mode)
        validate_neuron_constants(self.threshold, self.decay)

    def __call__(self, x_seq: Tensor) -> Tensor:
        x_seq = as_tensor(x_seq)
        state = MembraneState.zeros(
            x_seq.shape[1:], x_seq.dtype, self.threshold, self.decay, self.reset_mode
        )
        outputs = []
        for t in range(x_seq.shape[0]):
            spikes, state = lif_step(state, x_seq[t], self.surrogate, self.detach_reset)
            outputs.append(spikes)
        return stack(outputs, axis=0)


def is_binary(array: np.ndarray) -> bool:
    """Return True if every element is exactly 0 or 1."""
    return bool(np.all((array == 0) | (array == 1)))


@dataclass
class SpikeTensor:
    """
    Binary activation tensor, the currency of inter-layer traffic.

    Attributes
    ----------
    data : Tensor
        Spikes of shape [T, B, N, D] (timesteps, batch, tokens, channels).

    Raises
    ------
    DimensionError
        If data is not 4-D.
    ValueError
        If any element is not exactly 0 or 1 (when validated).
    """

    data: Tensor
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        self.data = as_tensor(self.data)
        if self.data.ndim != 4:
            raise DimensionError(
                f"SpikeTensor needs shape [T, B, N, D], got {self.data.shape}",
                expected=4,
                actual=self.data.ndim,
            )
        if self.data.shape[0] < 1:
            raise DimensionError("SpikeTensor needs T >= 1", expected=">=1", actual=0)
        if self.validate and not is_binary(self.data.data):
            raise ValueError("SpikeTensor data contains values other than 0 and 1")

    @classmethod
    def from_unbatched(cls, array) -> "SpikeTensor":
        """Wrap a single-image [T, N, D] spike array as B = 1."""
        array = np.asarray(array)
        if array.ndim != 3:
            raise DimensionError(
                f"expected [T, N, D], got {array.shape}", expected=3, actual=array.ndim
            )
        return cls(Tensor(array[:, None]))

    @property
    def T(self) -> int:
        """Return the number of timesteps."""
        return self.data.shape[0]

    @property
    def B(self) -> int:
        """Return the batch size."""
        return self.data.shape[1]

    @property
    def N(self) -> int:
        """Return the number of tokens."""
        return self.data.shape[2]

    @property
    def D(self) -> int:
        """Return the number of channels."""
        return self.data.shape[3]

    def numpy(self) -> np.ndarray:
        """Return the spike array."""
        return self.data.data
