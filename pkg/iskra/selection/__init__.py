"""
Selection module for iskra.

This module contains the spiking token selector:
- SpikingTokenSelector: learned firing-rate scorer with Gumbel-Softmax decisions
- RandomTokenSelector: uniformly random baseline with the same keep counts
- TokenDecision, TokenScore: cumulative keep masks and keep/drop probabilities
- temporal_gap, score_tokens, sample_keep_decision, compose_decision,
  keep_schedule: the individual selection steps
"""

from iskra.selection.selector import (
    SELECTORS,
    BaseSelector,
    RandomTokenSelector,
    SelectionMode,
    SelectorConfig,
    SpikingTokenSelector,
    TemperatureSchedule,
    TokenDecision,
    TokenScore,
    TokenScorer,
    build_selector,
    compose_decision,
    export_decision_trace,
    gumbel_temperature,
    keep_counts,
    keep_schedule,
    sample_keep_decision,
    score_tokens,
    straight_through,
    temporal_gap,
)

__all__ = [
    "SELECTORS",
    "BaseSelector",
    "RandomTokenSelector",
    "SelectionMode",
    "SelectorConfig",
    "SpikingTokenSelector",
    "TemperatureSchedule",
    "TokenDecision",
    "TokenScore",
    "TokenScorer",
    "build_selector",
    "compose_decision",
    "export_decision_trace",
    "gumbel_temperature",
    "keep_counts",
    "keep_schedule",
    "sample_keep_decision",
    "score_tokens",
    "straight_through",
    "temporal_gap",
]
