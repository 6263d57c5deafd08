"""
Pruning module for iskra.

This module contains the lottery ticket machinery:
- WeightMask, magnitude_prune: global or per-layer magnitude pruning
- rewind, random_reinit: resetting the surviving weights
- imp_loop, eb_detect: iterative pruning and early-bird mask detection
"""

from iskra.pruning.lottery import (
    PruneConfig,
    PruneMethod,
    RewindPoint,
    RoundRecord,
    RoundTrainer,
    TicketSnapshot,
    eb_detect,
    imp_loop,
    rewind,
    write_round_csv,
)
from iskra.pruning.masks import (
    PRUNE_SCOPES,
    WeightMask,
    expected_sparsity,
    global_magnitude_mask,
    magnitude_prune,
    random_reinit,
    simulate_alive_counts,
)

__all__ = [
    "PruneConfig",
    "PruneMethod",
    "RewindPoint",
    "RoundRecord",
    "RoundTrainer",
    "TicketSnapshot",
    "eb_detect",
    "imp_loop",
    "rewind",
    "write_round_csv",
    "PRUNE_SCOPES",
    "WeightMask",
    "expected_sparsity",
    "global_magnitude_mask",
    "magnitude_prune",
    "random_reinit",
    "simulate_alive_counts",
]
