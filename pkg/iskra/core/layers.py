"""
Trainable building blocks: parameters, modules and the affine layers.

Every weight lives in a PrunableParam, a Tensor that also carries its
hierarchical name, an optional binary mask and the distribution it was
initialised from (needed to redraw it for random re-initialisation).
"""

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from iskra.core.autograd import Tensor, as_tensor, conv2d
from iskra.exceptions import CheckpointError, DimensionError


@dataclass(frozen=True)
class Initializer:
    """
    Distribution a parameter is drawn from.

    Attributes
    ----------
    kind : str
        "uniform" draws from U(-bound, bound); "constant" fills with value.
    bound : float
        Half-width of the uniform distribution.
    value : float
        Fill value of the constant initializer.
    """

    kind: str = "uniform"
    bound: float = 0.0
    value: float = 0.0

    def draw(self, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
        """Return a float32 array drawn from this distribution."""
        if self.kind == "constant":
            return np.full(shape, self.value, dtype=np.float32)
        return rng.uniform(-self.bound, self.bound, size=shape).astype(np.float32)

    @property
    def std(self) -> float:
        """Return the standard deviation of the distribution."""
        return 0.0 if self.kind == "constant" else self.bound / np.sqrt(3.0)


def kaiming_uniform(fan_in: int) -> Initializer:
    """Return U(-sqrt(6 / fan_in), sqrt(6 / fan_in))."""
    return Initializer("uniform", bound=float(np.sqrt(6.0 / fan_in)))


class PrunableParam(Tensor):
    """
    Trainable tensor with an optional pruning mask.

    Attributes
    ----------
    name : str
        Hierarchical identifier, e.g. ``blocks.0.mlp.fc1.weight``.
    mask : np.ndarray or None
        Boolean keep mask with the shape of the values; None until the
        first pruning round.
    prunable : bool
        Whether magnitude pruning may remove entries.
    initializer : Initializer
        Distribution used at construction and by random re-initialisation.
    """

    __slots__ = ("mask", "prunable", "initializer")

    def __init__(
        self,
        values: np.ndarray,
        prunable: bool = False,
        initializer: Initializer | None = None,
        name: str | None = None,
    ):
        super().__init__(np.asarray(values, dtype=np.float32), True, name)
        self.mask: np.ndarray | None = None
        self.prunable = prunable
        self.initializer = initializer or Initializer("constant", value=0.0)

    @classmethod
    def create(
        cls,
        shape: tuple[int, ...],
        initializer: Initializer,
        rng: np.random.Generator,
        prunable: bool = False,
    ) -> "PrunableParam":
        """Draw a new parameter from ``initializer``."""
        return cls(initializer.draw(shape, rng), prunable, initializer)

    @property
    def size(self) -> int:
        """Return the number of elements."""
        return int(self.data.size)

    @property
    def alive(self) -> int:
        """Return the number of unmasked elements."""
        return self.size if self.mask is None else int(self.mask.sum())

    def set_mask(self, mask: np.ndarray) -> None:
        """
        Attach a keep mask and zero the masked values.

        Raises
        ------
        DimensionError
            If the mask shape differs from the parameter shape.
        """
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.shape:
            raise DimensionError(
                f"mask {mask.shape} does not match parameter '{self.name}' "
                f"{self.shape}",
                expected=self.shape,
                actual=mask.shape,
            )
        self.mask = mask
        self.apply_mask()

    def apply_mask(self) -> None:
        """Zero the masked values in place."""
        if self.mask is not None:
            self.data *= self.mask

    def mask_grad(self) -> None:
        """Zero the gradient of masked values in place."""
        if self.mask is not None and self.grad is not None:
            self.grad = self.grad * self.mask

    def __repr__(self) -> str:
        flag = ", prunable" if self.prunable else ""
        return f"PrunableParam(name='{self.name}', shape={self.shape}{flag})"


class Module:
    """
    Container of parameters and sub-modules.

    Parameters are discovered by walking instance attributes in
    definition order; lists of modules are walked by index.
    """

    training: bool = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, PrunableParam]]:
        """Yield (name, parameter) pairs in a stable order."""
        for attr, value in vars(self).items():
            path = f"{prefix}{attr}"
            if isinstance(value, PrunableParam):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")

    def modules(self) -> Iterator["Module"]:
        """Yield this module and every sub-module."""
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def assign_names(self) -> None:
        """Store each parameter's hierarchical name on the parameter."""
        for name, param in self.named_parameters():
            param.name = name

    def parameters(self) -> list[PrunableParam]:
        """Return all parameters."""
        return [p for _, p in self.named_parameters()]

    def prunable_parameters(self) -> list[PrunableParam]:
        """Return the parameters magnitude pruning may touch."""
        return [p for p in self.parameters() if p.prunable]

    def zero_grad(self) -> None:
        """Clear every parameter gradient."""
        for p in self.parameters():
            p.zero_grad()

    def train(self, mode: bool = True) -> "Module":
        """Set training mode on this module and all sub-modules."""
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        """Set inference mode."""
        return self.train(False)

    def state_dict(self) -> dict[str, np.ndarray]:
        """Return a copy of every parameter array keyed by name."""
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """
        Copy arrays into the parameters.

        Raises
        ------
        CheckpointError
            If names or shapes do not match this module.
        """
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise CheckpointError(
                f"state dict mismatch: missing={missing}, unexpected={unexpected}"
            )
        for name, param in own.items():
            values = np.asarray(state[name])
            if values.shape != param.shape:
                raise CheckpointError(
                    f"shape drift for '{name}': checkpoint {values.shape}, "
                    f"model {param.shape}"
                )
            param.data = values.astype(np.float32, copy=True)
            param.apply_mask()

    def num_parameters(self) -> int:
        """Return the total number of parameter elements."""
        return sum(p.size for p in self.parameters())


class Linear(Module):
    """
    Affine map over the last axis: ``x @ weight + bias``.

    The weight is stored as [in_features, out_features] and is prunable
    unless ``prunable=False``; the bias never is. Leading axes are
    flattened so the product is a single 2-D matrix multiply.
    """

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        bias: bool = True,
        prunable: bool = True,
    ):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = PrunableParam.create(
            (in_features, out_features), kaiming_uniform(in_features), rng, prunable
        )
        self.bias = (
            PrunableParam.create((out_features,), Initializer("constant"), rng)
            if bias
            else None
        )

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.shape[-1] != self.in_features:
            raise DimensionError(
                f"Linear expects {self.in_features} input features, got {x.shape[-1]}",
                expected=self.in_features,
                actual=x.shape[-1],
            )
        lead = x.shape[:-1]
        out = (x.reshape(-1, self.in_features) @ self.weight).reshape(
            *lead, self.out_features
        )
        return out if self.bias is None else out + self.bias

    def macs(self, tokens: int) -> int:
        """Return multiply-accumulates for ``tokens`` input rows."""
        return tokens * self.in_features * self.out_features


class Conv2d(Module):
    """Stride-1 same-padded convolution without bias; weight is prunable."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        rng: np.random.Generator,
    ):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        fan_in = in_channels * kernel * kernel
        self.weight = PrunableParam.create(
            (out_channels, in_channels, kernel, kernel),
            kaiming_uniform(fan_in),
            rng,
            True,
        )

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(as_tensor(x), self.weight, padding=self.kernel // 2)


class ChannelAffine(Module):
    """
    Learned per-channel scale and shift, the folded form of batch norm.

    ``axis`` selects the channel axis of the input.
    """

    def __init__(self, channels: int, rng: np.random.Generator, axis: int = -1):
        self.channels = channels
        self.axis = axis
        self.scale = PrunableParam.create(
            (channels,), Initializer("constant", value=1.0), rng
        )
        self.shift = PrunableParam.create((channels,), Initializer("constant"), rng)

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.shape[self.axis] != self.channels:
            raise DimensionError(
                f"ChannelAffine expects {self.channels} channels on axis "
                f"{self.axis}, got {x.shape[self.axis]}",
                expected=self.channels,
                actual=x.shape[self.axis],
            )
        shape = [1] * x.ndim
        shape[self.axis] = self.channels
        return x * self.scale.reshape(shape) + self.shift.reshape(shape)
