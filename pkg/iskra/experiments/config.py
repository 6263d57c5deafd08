"""
Experiment configuration files.

An experiment file is UTF-8 JSON with a ``version`` field and one section
per sub-configuration. Unknown keys are rejected in every section, and
serialisation is canonical (field order, two-space indent, trailing
newline), so writing a parsed file reproduces it byte for byte.

Example::

    {
      "version": 1,
      "seed": 0,
      "threads": 1,
      "selector_kind": "spiking",
      "model": {"T": 4, "L": 4, "D": 96, ...},
      "selector": {"rho": 0.7, ...},
      "prune": {"p": 0.25, "K": 5, ...},
      "optimizer": {"learning_rate": 0.001, ...},
      "dataset": {"kind": "synthetic_fg_bg", ...}
    }
"""

import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

from iskra.data.cifar import CIFAR100_LABELS
from iskra.data.registry import DATASETS
from iskra.data.synthetic import SyntheticConfig
from iskra.exceptions import ConfigurationError
from iskra.model.config import ModelConfig
from iskra.pruning.lottery import PruneConfig
from iskra.selection.selector import SELECTORS, SelectorConfig
from iskra.training.optim import OptimizerConfig

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1


def _check_keys(cls, data: dict, section: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigurationError(f"'{section}' must be an object", field=section)
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigurationError(
            f"Unknown keys in '{section}' section: {unknown}", field=section
        )
    return dict(data)


@dataclass
class DatasetConfig:
    """
    Data source.

    Attributes
    ----------
    kind : str
        Registry name: synthetic_fg_bg, cifar10_binary, cifar100_binary or
        tensor_frames.
    n_train, n_test : int
        Generated images per split (synthetic only).
    path : str, optional
        CIFAR directory or frame archive.
    test_fraction : float
        Held-out share of a frame archive.
    cifar100_labels : str
        "fine" (100 classes) or "coarse" (20 superclasses) for CIFAR-100.
    synthetic : SyntheticConfig
        Synthetic generator settings.
    """

    kind: str = "synthetic_fg_bg"
    n_train: int = 512
    n_test: int = 256
    path: str | None = None
    test_fraction: float = 0.2
    cifar100_labels: str = "fine"
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)

    def __post_init__(self):
        if isinstance(self.synthetic, dict):
            self.synthetic = SyntheticConfig(
                **_check_keys(SyntheticConfig, self.synthetic, "dataset.synthetic")
            )
        if self.kind not in DATASETS:
            raise ConfigurationError(
                f"Unknown dataset: '{self.kind}'. Available datasets: {list(DATASETS)}",
                field="kind",
            )
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigurationError("n_train and n_test must be >= 1", "n_train")
        if not 0 < self.test_fraction < 1:
            raise ConfigurationError(
                f"test_fraction must be in (0, 1), got {self.test_fraction}",
                field="test_fraction",
            )
        if self.cifar100_labels not in CIFAR100_LABELS:
            raise ConfigurationError(
                f"cifar100_labels must be one of {list(CIFAR100_LABELS)}, "
                f"got {self.cifar100_labels!r}",
                field="cifar100_labels",
            )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "path": self.path,
            "test_fraction": self.test_fraction,
            "cifar100_labels": self.cifar100_labels,
            "synthetic": self.synthetic.to_dict(),
        }


@dataclass
class ExperimentConfig:
    """
    Everything a run depends on; ``(seed, config)`` determines every artifact.

    Attributes
    ----------
    model : ModelConfig
    selector : SelectorConfig
    prune : PruneConfig
    optimizer : OptimizerConfig
    dataset : DatasetConfig
    seed : int
        Seeds data generation, initialisation, shuffling and sampling.
    threads : int
        Evaluation threads; 1 guarantees bitwise-reproducible metrics.
    selector_kind : str
        "spiking" or "random".
    """

    model: ModelConfig = field(default_factory=lambda: ModelConfig(num_classes=4))
    selector: SelectorConfig = field(default_factory=SelectorConfig)
    prune: PruneConfig = field(default_factory=lambda: PruneConfig(K=5))
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    seed: int = 0
    threads: int = 1
    selector_kind: str = "spiking"

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigurationError(f"seed must be >= 0, got {self.seed}", "seed")
        if self.threads < 1:
            raise ConfigurationError(
                f"threads must be >= 1, got {self.threads}", "threads"
            )
        if self.selector_kind not in SELECTORS:
            raise ConfigurationError(
                f"Unknown selector: '{self.selector_kind}'. "
                f"Available selectors: {list(SELECTORS)}",
                field="selector_kind",
            )
        if self.dataset.kind == "synthetic_fg_bg":
            self._check_synthetic()
        if self.model.rho != self.selector.rho:
            raise ConfigurationError(
                f"model.rho {self.model.rho} differs from selector.rho "
                f"{self.selector.rho}",
                field="rho",
            )

    def _check_synthetic(self) -> None:
        synthetic, model = self.dataset.synthetic, self.model
        if synthetic.num_classes > model.num_classes:
            raise ConfigurationError(
                f"dataset has {synthetic.num_classes} classes but the model "
                f"only {model.num_classes}",
                field="num_classes",
            )
        if (synthetic.channels, synthetic.image_hw) != (
            model.in_channels,
            model.image_hw,
        ):
            raise ConfigurationError(
                "synthetic image shape does not match the model input",
                field="image_hw",
            )

    def with_rho(
        self, rho: float, selector_kind: str | None = None
    ) -> "ExperimentConfig":
        """Return a copy with another keep ratio (and optionally selector)."""
        data = self.to_dict()
        data["model"]["rho"] = rho
        data["selector"]["rho"] = rho
        if selector_kind is not None:
            data["selector_kind"] = selector_kind
        return ExperimentConfig.from_dict(data)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        data = self.to_dict()
        data["seed"] = seed
        return ExperimentConfig.from_dict(data)

    def to_dict(self) -> dict:
        """Return the canonical JSON-ready dict, ``version`` first."""
        return {
            "version": CONFIG_VERSION,
            "seed": self.seed,
            "threads": self.threads,
            "selector_kind": self.selector_kind,
            "model": self.model.to_dict(),
            "selector": self.selector.to_dict(),
            "prune": self.prune.to_dict(),
            "optimizer": self.optimizer.to_dict(),
            "dataset": self.dataset.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """
        Build a config from a parsed file.

        Raises
        ------
        ConfigurationError
            On a missing or unsupported version, unknown keys, or invalid
            values in any section.
        """
        if not isinstance(data, dict):
            raise ConfigurationError("configuration must be a JSON object")
        data = dict(data)
        version = data.pop("version", None)
        if version != CONFIG_VERSION:
            raise ConfigurationError(
                f"Unsupported config version {version!r} (expected {CONFIG_VERSION})",
                field="version",
            )
        allowed = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise ConfigurationError(f"Unknown top-level keys: {unknown}", "config")
        try:
            sections = {
                "model": ModelConfig.from_dict(data.get("model", {})),
                "selector": SelectorConfig(
                    **_check_keys(SelectorConfig, data.get("selector", {}), "selector")
                ),
                "prune": PruneConfig(
                    **_check_keys(PruneConfig, data.get("prune", {}), "prune")
                ),
                "optimizer": OptimizerConfig(
                    **_check_keys(
                        OptimizerConfig, data.get("optimizer", {}), "optimizer"
                    )
                ),
                "dataset": DatasetConfig(
                    **_check_keys(DatasetConfig, data.get("dataset", {}), "dataset")
                ),
            }
        except TypeError as e:
            raise ConfigurationError(f"Malformed configuration: {e}")
        scalars = {
            k: data[k] for k in ("seed", "threads", "selector_kind") if k in data
        }
        return cls(**sections, **scalars)


def load_config(path: str | Path) -> ExperimentConfig:
    """
    Read an experiment file.

    Raises
    ------
    ConfigurationError
        If the file is missing, not valid JSON or not a valid configuration.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}", field="config")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in {path}: {e}", field="config")
    config = ExperimentConfig.from_dict(data)
    logger.debug(f"Loaded configuration from {path}")
    return config


def save_config(config: ExperimentConfig, path: str | Path) -> Path:
    """Write ``config`` in canonical form."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config.to_json(), encoding="utf-8")
    return path
