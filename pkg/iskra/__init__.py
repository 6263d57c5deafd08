"""
iskra - Sparse spiking vision transformer toolkit.

This package trains spiking transformers that drop uninformative image
tokens as they go deeper, searches for sparse winning tickets by iterative
magnitude pruning, and counts the inference cost of both kinds of sparsity.

Example usage::

    from iskra import Spikformer, desk_config, count_flops

    # Build a model that keeps 70% of the tokens at each selector
    model = Spikformer(desk_config(rho=0.7), rng=0)
    result = model.forward(images, mode="eval")
    print(result.decision.kept_counts)

    # Analytic FLOPs of the published CIFAR geometry
    from iskra import paper_cifar_config
    report = count_flops(paper_cifar_config(rho=0.7))
    print(f"{report.gflops:.2f} GFLOPs, {report.reduction:.1%} saved")
"""

__version__ = "0.1.0"

from iskra.core.autograd import Tensor, no_grad  # noqa: E402
from iskra.core.neurons import LIFNode, SpikeTensor  # noqa: E402
from iskra.data.registry import DATASETS, load_dataset  # noqa: E402
from iskra.exceptions import (  # noqa: E402
    CheckpointError,
    ConfigurationError,
    DimensionError,
    DivergenceError,
    EmptyTokenSetError,
    FormatError,
    IskraError,
    SaturationError,
    UsageError,
)
from iskra.experiments.config import ExperimentConfig, load_config  # noqa: E402
from iskra.model.config import (  # noqa: E402
    ModelConfig,
    desk_config,
    paper_cifar_config,
    paper_dvs_config,
)
from iskra.model.spikformer import ForwardResult, Spikformer  # noqa: E402
from iskra.profiling.flops import CostReport, count_flops  # noqa: E402
from iskra.pruning.lottery import PruneConfig, imp_loop  # noqa: E402
from iskra.pruning.masks import WeightMask, magnitude_prune  # noqa: E402
from iskra.selection.selector import (  # noqa: E402
    RandomTokenSelector,
    SelectorConfig,
    SpikingTokenSelector,
    TokenDecision,
)
from iskra.storage.checkpoint import CheckpointStorage  # noqa: E402
from iskra.training.trainer import Trainer, evaluate, train  # noqa: E402

__all__ = [
    # Core
    "Tensor",
    "no_grad",
    "LIFNode",
    "SpikeTensor",
    # Model
    "ModelConfig",
    "desk_config",
    "paper_cifar_config",
    "paper_dvs_config",
    "Spikformer",
    "ForwardResult",
    # Selection
    "SelectorConfig",
    "SpikingTokenSelector",
    "RandomTokenSelector",
    "TokenDecision",
    # Pruning
    "PruneConfig",
    "WeightMask",
    "magnitude_prune",
    "imp_loop",
    # Profiling
    "CostReport",
    "count_flops",
    # Harness
    "DATASETS",
    "load_dataset",
    "ExperimentConfig",
    "load_config",
    "Trainer",
    "train",
    "evaluate",
    "CheckpointStorage",
    # Exceptions
    "IskraError",
    "DimensionError",
    "EmptyTokenSetError",
    "ConfigurationError",
    "UsageError",
    "SaturationError",
    "CheckpointError",
    "FormatError",
    "DivergenceError",
    # Version
    "__version__",
]
