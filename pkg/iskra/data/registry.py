"""
Dataset registry.
"""

from pathlib import Path
from typing import Callable

import numpy as np

from iskra.data.cifar import load_cifar10_binary, load_cifar100_binary
from iskra.data.dataset import Dataset
from iskra.data.frames import load_tensor_frames
from iskra.data.synthetic import SyntheticConfig, generate_synthetic
from iskra.exceptions import ConfigurationError


def _synthetic(n, path, synthetic, rng) -> Dataset:
    return generate_synthetic(n, synthetic, rng)


def _cifar(n, path, synthetic, rng) -> Dataset:
    if path is None:
        raise ConfigurationError("cifar10_binary needs a data path", field="path")
    return load_cifar10_binary(path)


def _cifar100(n, path, synthetic, rng) -> Dataset:
    if path is None:
        raise ConfigurationError("cifar100_binary needs a data path", field="path")
    return load_cifar100_binary(path)


def _frames(n, path, synthetic, rng) -> Dataset:
    if path is None:
        raise ConfigurationError("tensor_frames needs a data path", field="path")
    return load_tensor_frames(path)


DATASETS: dict[str, Callable[..., Dataset]] = {
    "synthetic_fg_bg": _synthetic,
    "cifar10_binary": _cifar,
    "cifar100_binary": _cifar100,
    "tensor_frames": _frames,
}


def load_dataset(
    name: str,
    n: int = 1024,
    path: str | Path | None = None,
    synthetic: SyntheticConfig | None = None,
    rng: np.random.Generator | int | None = None,
) -> Dataset:
    """
    Build or load a dataset by registry name.

    Parameters
    ----------
    name : str
        One of ``DATASETS``.
    n : int, optional
        Number of generated images (synthetic only).
    path : str or Path, optional
        Directory (cifar10_binary, cifar100_binary) or archive (tensor_frames).
    synthetic : SyntheticConfig, optional
        Synthetic dataset settings.
    rng : np.random.Generator or int, optional
        Generation randomness (synthetic only).

    Raises
    ------
    ConfigurationError
        If the name is unknown or a required path is missing.
    """
    if name not in DATASETS:
        raise ConfigurationError(
            f"Unknown dataset: '{name}'. Available datasets: {list(DATASETS)}",
            field="dataset",
        )
    return DATASETS[name](n, path, synthetic, rng)
