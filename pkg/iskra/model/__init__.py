"""
Model module for iskra.

This module contains the spiking vision transformer:
- ModelConfig, SpsStage: geometry and neuron settings, with presets
- Spikformer: SPS, encoder blocks with token selection, classification head
- SpikingSelfAttention, SpikingMLP, EncoderBlock: the block components
- ForwardResult: logits, token decisions and recorded spikes of a forward pass
"""

from iskra.model.config import (
    PRESETS,
    ModelConfig,
    SpsStage,
    desk_config,
    get_preset,
    paper_cifar_config,
    paper_dvs_config,
)
from iskra.model.spikformer import (
    ClassificationHead,
    EncoderBlock,
    ExecutionMode,
    ForwardResult,
    Spikformer,
    SpikingMLP,
    SpikingPatchSplitting,
    SpikingSelfAttention,
    TokenState,
    spike_or,
)

__all__ = [
    "PRESETS",
    "ModelConfig",
    "SpsStage",
    "desk_config",
    "get_preset",
    "paper_cifar_config",
    "paper_dvs_config",
    "ClassificationHead",
    "EncoderBlock",
    "ExecutionMode",
    "ForwardResult",
    "Spikformer",
    "SpikingMLP",
    "SpikingPatchSplitting",
    "SpikingSelfAttention",
    "TokenState",
    "spike_or",
]
