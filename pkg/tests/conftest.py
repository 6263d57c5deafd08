"""
Pytest configuration and shared fixtures.

This module contains pytest fixtures and configuration that are shared
across all test modules.
"""

import numpy as np
import pytest

from iskra.data.synthetic import SyntheticConfig, generate_synthetic
from iskra.experiments.config import DatasetConfig, ExperimentConfig
from iskra.model.config import ModelConfig, SpsStage
from iskra.pruning.lottery import PruneConfig
from iskra.selection.selector import SelectorConfig
from iskra.training.optim import OptimizerConfig


def tiny_model_config(rho: float = 1.0, **overrides) -> ModelConfig:
    """Return a 16x16, 4x4-token model small enough for unit tests."""
    values = dict(
        T=2,
        L=2,
        D=16,
        heads=2,
        image_hw=16,
        in_channels=3,
        num_classes=4,
        sps_stages=(SpsStage(8), SpsStage(16)),
        selector_layers=(1, 2),
        rho=rho,
        name="tiny",
    )
    values.update(overrides)
    return ModelConfig(**values)


def tiny_synthetic_config() -> SyntheticConfig:
    """Return synthetic data matching :func:`tiny_model_config`."""
    return SyntheticConfig(image_hw=16, token_grid=4, block_tokens=2)


def tiny_experiment_config(rho: float = 1.0, epochs: int = 1) -> ExperimentConfig:
    """Return an experiment that trains the tiny model for a few steps."""
    return ExperimentConfig(
        model=tiny_model_config(rho=rho),
        selector=SelectorConfig(rho=rho),
        prune=PruneConfig(p=0.25, K=2),
        optimizer=OptimizerConfig(epochs=epochs, batch_size=8, learning_rate=1e-2),
        dataset=DatasetConfig(
            n_train=16, n_test=8, synthetic=tiny_synthetic_config()
        ),
        seed=0,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    """Provide a seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config() -> ModelConfig:
    """Provide a tiny dense model configuration."""
    return tiny_model_config()


@pytest.fixture
def tiny_sparse_config() -> ModelConfig:
    """Provide a tiny model configuration keeping half of the tokens."""
    return tiny_model_config(rho=0.5)


@pytest.fixture
def tiny_images(rng) -> np.ndarray:
    """Provide a batch of two random 16x16 RGB images."""
    return rng.random((2, 3, 16, 16)).astype(np.float32)


@pytest.fixture
def tiny_dataset():
    """Provide a small synthetic dataset for the tiny model."""
    return generate_synthetic(16, tiny_synthetic_config(), np.random.default_rng(0))


@pytest.fixture
def tiny_experiment() -> ExperimentConfig:
    """Provide a one-epoch experiment on the tiny model."""
    return tiny_experiment_config()
