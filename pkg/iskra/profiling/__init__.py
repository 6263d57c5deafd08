"""
Profiling module for iskra.

This module contains the cost model:
- count_flops, CostReport: analytic FLOPs under token keep schedules
- throughput_bench: wall-clock images per second
- firing_rate_map, export_attention_map: firing-rate maps as PPM and CSV
"""

from iskra.profiling.bench import ThroughputResult, throughput_bench
from iskra.profiling.flops import (
    CostReport,
    LayerCost,
    block_token_counts,
    calibration_note,
    count_flops,
    synaptic_ops,
)
from iskra.profiling.maps import (
    export_attention_map,
    firing_rate_map,
    layer_firing_rates,
    read_map_csv,
)

__all__ = [
    "ThroughputResult",
    "throughput_bench",
    "CostReport",
    "LayerCost",
    "block_token_counts",
    "calibration_note",
    "count_flops",
    "synaptic_ops",
    "export_attention_map",
    "firing_rate_map",
    "layer_firing_rates",
    "read_map_csv",
]
