"""
Experiments module for iskra.

This module ties configuration, data, training and pruning together:
- ExperimentConfig, load_config, save_config: versioned JSON run files
- build_datasets, run_training, run_pruning: single runs from one config
- run_table1_analog, run_table2_analog, run_table3_analog, run_fig4_analog:
  experiment sweeps
- line_plot, write_line_plot: matplotlib line plots saved as deterministic SVG
"""

from iskra.experiments.config import (
    CONFIG_VERSION,
    DatasetConfig,
    ExperimentConfig,
    load_config,
    save_config,
)
from iskra.experiments.plots import line_plot, write_line_plot
from iskra.experiments.runner import (
    build_datasets,
    build_model,
    build_trainer,
    foreground_keep_rates,
    load_model,
    run_pruning,
    run_training,
    save_model,
    write_train_log,
)
from iskra.experiments.tables import (
    Fig4Row,
    Table1Row,
    Table2Row,
    Table3Row,
    run_fig4_analog,
    run_table1_analog,
    run_table2_analog,
    run_table3_analog,
    write_csv,
)

__all__ = [
    "CONFIG_VERSION",
    "DatasetConfig",
    "ExperimentConfig",
    "load_config",
    "save_config",
    "line_plot",
    "write_line_plot",
    "build_datasets",
    "build_model",
    "build_trainer",
    "foreground_keep_rates",
    "load_model",
    "run_pruning",
    "run_training",
    "save_model",
    "write_train_log",
    "Fig4Row",
    "Table1Row",
    "Table2Row",
    "Table3Row",
    "run_fig4_analog",
    "run_table1_analog",
    "run_table2_analog",
    "run_table3_analog",
    "write_csv",
]
