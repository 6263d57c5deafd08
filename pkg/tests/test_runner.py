"""
Unit tests for the experiment runner helpers.

Runs use the tiny experiment with one epoch per training run.
"""

import csv

import numpy as np
import pytest

from iskra.data.cifar import CIFAR100_RECORD_BYTES
from iskra.data.dataset import Dataset
from iskra.data.frames import save_tensor_frames
from iskra.exceptions import CheckpointError, ConfigurationError
from iskra.experiments.config import DatasetConfig, ExperimentConfig
from iskra.experiments.runner import (
    TRAIN_LOG_HEADER,
    build_datasets,
    build_model,
    foreground_keep_rates,
    load_model,
    run_pruning,
    run_training,
    save_model,
    write_train_log,
)
from iskra.storage.checkpoint import CheckpointStorage
from iskra.training.trainer import EpochProgress

from tests.conftest import tiny_experiment_config, tiny_model_config


class TestBuildDatasets:
    """Tests for build_datasets()."""

    def test_synthetic_splits(self):
        """Test split sizes and independence of the two streams."""
        train, test = build_datasets(tiny_experiment_config())
        assert (len(train), len(test)) == (16, 8)
        assert not np.array_equal(train.images[:8], test.images)

    def test_deterministic(self):
        """Test that the seed fixes the data."""
        a, _ = build_datasets(tiny_experiment_config())
        b, _ = build_datasets(tiny_experiment_config())
        np.testing.assert_array_equal(a.images, b.images)

    def test_seed_changes_data(self):
        """Test that another seed gives other images."""
        a, _ = build_datasets(tiny_experiment_config())
        b, _ = build_datasets(tiny_experiment_config().with_seed(1))
        assert not np.array_equal(a.images, b.images)

    def test_frame_archive_split(self, tmp_path):
        """Test the held-out share of a frame archive."""
        path = save_tensor_frames(
            tmp_path / "f.npz", np.zeros((10, 2, 3, 16, 16)), np.arange(10) % 2
        )
        cfg = ExperimentConfig(
            model=tiny_model_config(),
            dataset=DatasetConfig(kind="tensor_frames", path=str(path)),
        )
        train, test = build_datasets(cfg)
        assert (len(train), len(test)) == (8, 2)

    def test_cifar_needs_path(self):
        """Test that CIFAR-10 without a directory raises ConfigurationError."""
        cfg = ExperimentConfig(
            model=tiny_model_config(), dataset=DatasetConfig(kind="cifar10_binary")
        )
        with pytest.raises(ConfigurationError):
            build_datasets(cfg)

    def test_cifar100_splits(self, tmp_path):
        """Test that CIFAR-100 reads train.bin and test.bin with coarse labels."""
        pixels = bytes(CIFAR100_RECORD_BYTES - 2)
        (tmp_path / "train.bin").write_bytes(
            bytes([4, 40]) + pixels + bytes([19, 99]) + pixels
        )
        (tmp_path / "test.bin").write_bytes(bytes([7, 70]) + pixels)
        cfg = ExperimentConfig(
            model=tiny_model_config(),
            dataset=DatasetConfig(
                kind="cifar100_binary", path=str(tmp_path), cifar100_labels="coarse"
            ),
        )
        train, test = build_datasets(cfg)
        np.testing.assert_array_equal(train.labels, [4, 19])
        np.testing.assert_array_equal(test.labels, [7])
        assert train.num_classes == 20
        assert test.name == "cifar100_binary"


class TestBuildModel:
    """Tests for build_model()."""

    def test_seeded_initialisation(self):
        """Test that equal configs give equal weights."""
        a = build_model(tiny_experiment_config()).state_dict()
        b = build_model(tiny_experiment_config()).state_dict()
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])

    def test_selector_kind(self):
        """Test that the configured selector is built."""
        model = build_model(tiny_experiment_config(rho=0.5).with_rho(0.5, "random"))
        assert model.selector_kind == "random"
        assert len(model.selectors) == 2


class TestRuns:
    """Tests for run_training() and run_pruning()."""

    def test_training(self):
        """Test one epoch of training with a callback."""
        seen = []
        result = run_training(tiny_experiment_config(rho=0.5), seen.append)
        assert len(result.history) == 1
        assert seen[0].epoch == 0

    def test_pruning(self, tmp_path):
        """Test the round records and stored ticket."""
        storage = CheckpointStorage(tmp_path)
        snapshot = run_pruning(tiny_experiment_config(), storage)
        alive = [r.alive_params for r in snapshot.metrics]
        assert len(alive) == 3
        assert alive[0] > alive[1] > alive[2]
        assert storage.exists("ticket/weights")


class TestForegroundKeepRates:
    """Tests for foreground_keep_rates()."""

    def test_rates(self, tiny_dataset):
        """Test rates in the unit interval."""
        model = build_model(tiny_experiment_config(rho=0.5))
        fg, bg = foreground_keep_rates(model, tiny_dataset, batch_size=8)
        assert 0.0 <= fg <= 1.0
        assert 0.0 <= bg <= 1.0

    def test_dense_keeps_everything(self, tiny_dataset):
        """Test that rho = 1 keeps foreground and background."""
        model = build_model(tiny_experiment_config())
        assert foreground_keep_rates(model, tiny_dataset) == (1.0, 1.0)

    def test_requires_foreground(self):
        """Test that a dataset without masks raises ValueError."""
        model = build_model(tiny_experiment_config())
        dataset = Dataset(np.zeros((2, 3, 16, 16)), [0, 1], 4)
        with pytest.raises(ValueError):
            foreground_keep_rates(model, dataset)


class TestTrainLog:
    """Tests for write_train_log()."""

    def test_format(self, tmp_path):
        """Test the header and six-decimal floats."""
        history = [
            EpochProgress(0, 2, 1.5, 0.25, 1e-3, 1.0),
            EpochProgress(1, 2, 1.25, None, 5e-4, 1.0),
        ]
        path = write_train_log(history, tmp_path / "logs" / "train.csv")
        with open(path, encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == TRAIN_LOG_HEADER
        assert rows[1] == ["0", "1.500000", "0.250000", "0.001000", "1.000000"]
        assert rows[2][2] == ""


class TestModelCheckpoints:
    """Tests for save_model() and load_model()."""

    def test_round_trip(self, tmp_path):
        """Test that stored weights load into a fresh model."""
        cfg = tiny_experiment_config()
        storage = CheckpointStorage(tmp_path)
        model = build_model(cfg.with_seed(5))
        save_model(model, storage)
        loaded = load_model(cfg, storage)
        for name, values in model.state_dict().items():
            np.testing.assert_array_equal(loaded.state_dict()[name], values)

    def test_mismatched_model(self, tmp_path):
        """Test that another geometry raises CheckpointError."""
        storage = CheckpointStorage(tmp_path)
        save_model(build_model(tiny_experiment_config()), storage)
        data = tiny_experiment_config().to_dict()
        data["model"]["D"] = 8
        data["model"]["heads"] = 2
        data["model"]["sps_stages"][-1]["out_channels"] = 8
        with pytest.raises(CheckpointError):
            load_model(ExperimentConfig.from_dict(data), storage)
