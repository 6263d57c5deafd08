"""
Core module for iskra.

This module contains the numerical machinery the rest of the package trains with:
- Tensor: reverse-mode differentiable array
- backward, no_grad, numerical_gradient: graph control and gradient oracle
- LIFNode, lif_step, MembraneState: leaky integrate-and-fire dynamics
- SpikeTensor: validated binary activations [T, B, N, D]
- SurrogateConfig, surrogate_derivative: surrogate gradient of the spike step
- Module, Linear, Conv2d, ChannelAffine, PrunableParam: trainable layers
"""

from iskra.core.autograd import (
    Tensor,
    as_tensor,
    backward,
    concatenate,
    conv2d,
    cross_entropy,
    max_pool2x2,
    no_grad,
    numerical_gradient,
    stack,
    take_along_tokens,
)
from iskra.core.layers import (
    ChannelAffine,
    Conv2d,
    Initializer,
    Linear,
    Module,
    PrunableParam,
    kaiming_uniform,
)
from iskra.core.neurons import (
    LIFNode,
    MembraneState,
    ResetMode,
    SpikeTensor,
    SurrogateConfig,
    SurrogateKind,
    heaviside_spike,
    is_binary,
    lif_step,
    spike_fn,
    surrogate_derivative,
    surrogate_primitive,
)

__all__ = [
    "ChannelAffine",
    "Conv2d",
    "Initializer",
    "Linear",
    "Module",
    "PrunableParam",
    "kaiming_uniform",
    "Tensor",
    "as_tensor",
    "backward",
    "concatenate",
    "conv2d",
    "cross_entropy",
    "max_pool2x2",
    "no_grad",
    "numerical_gradient",
    "stack",
    "take_along_tokens",
    "LIFNode",
    "MembraneState",
    "ResetMode",
    "SpikeTensor",
    "SurrogateConfig",
    "SurrogateKind",
    "heaviside_spike",
    "is_binary",
    "lif_step",
    "spike_fn",
    "surrogate_derivative",
    "surrogate_primitive",
]
