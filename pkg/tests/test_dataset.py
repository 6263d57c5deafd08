"""
Unit tests for in-memory datasets and the dataset registry.
"""

import numpy as np
import pytest

from iskra.data.dataset import Dataset
from iskra.data.frames import save_tensor_frames
from iskra.data.registry import DATASETS, load_dataset
from iskra.data.synthetic import SyntheticConfig
from iskra.exceptions import ConfigurationError, DimensionError


def make_dataset(m=10, classes=3) -> Dataset:
    images = np.arange(m * 3 * 2 * 2, dtype=np.float32).reshape(m, 3, 2, 2)
    return Dataset(images, np.arange(m) % classes, classes, name="toy")


class TestDataset:
    """Tests for Dataset validation and slicing."""

    def test_dtypes(self):
        """Test that images and labels are converted."""
        dataset = make_dataset()
        assert dataset.images.dtype == np.float32
        assert dataset.labels.dtype == np.int64
        assert len(dataset) == 10
        assert dataset.image_shape == (3, 2, 2)
        assert not dataset.is_frames

    def test_frames(self):
        """Test that 5-D input is a frame dataset."""
        dataset = Dataset(np.zeros((2, 4, 2, 8, 8)), [0, 1], 2)
        assert dataset.is_frames

    def test_wrong_rank(self):
        """Test that 3-D images raise DimensionError."""
        with pytest.raises(DimensionError):
            Dataset(np.zeros((2, 8, 8)), [0, 1], 2)

    def test_label_count(self):
        """Test that labels must match the images."""
        with pytest.raises(DimensionError):
            Dataset(np.zeros((2, 1, 4, 4)), [0, 1, 1], 2)

    def test_label_range(self):
        """Test that out-of-range labels raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            Dataset(np.zeros((2, 1, 4, 4)), [0, 2], 2)

    def test_foreground_count(self):
        """Test that foreground masks must match the images."""
        with pytest.raises(DimensionError):
            Dataset(np.zeros((2, 1, 4, 4)), [0, 1], 2, np.zeros((3, 4)))

    def test_sample_without_foreground(self):
        """Test that unknown foreground gives no token indices."""
        sample = make_dataset().sample(4)
        assert sample.label == 1
        assert sample.foreground_tokens.size == 0

    def test_split(self):
        """Test the leading and trailing parts."""
        head, tail = make_dataset().split(0.7)
        assert len(head) == 7
        assert len(tail) == 3
        np.testing.assert_array_equal(tail.labels, [1, 2, 0])

    @pytest.mark.parametrize("fraction", [0.0, 1.0])
    def test_split_invalid(self, fraction):
        """Test that degenerate fractions raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            make_dataset().split(fraction)

    def test_with_labels(self):
        """Test relabelling leaves the original untouched."""
        dataset = make_dataset()
        relabelled = dataset.with_labels(np.zeros(10, dtype=np.int64))
        assert relabelled.labels.sum() == 0
        assert dataset.labels.sum() > 0

    def test_batches_cover_everything(self, rng):
        """Test that shuffled batches visit every image once."""
        batches = list(make_dataset().batches(4, rng))
        assert [len(b.labels) for b in batches] == [4, 4, 2]
        seen = np.concatenate([b.indices for b in batches])
        np.testing.assert_array_equal(np.sort(seen), np.arange(10))

    def test_batches_in_order(self):
        """Test unshuffled iteration."""
        batches = list(make_dataset().batches(5, shuffle=False))
        np.testing.assert_array_equal(batches[1].indices, np.arange(5, 10))

    def test_batches_invalid(self):
        """Test batch size and generator checks."""
        with pytest.raises(ConfigurationError):
            list(make_dataset().batches(0, shuffle=False))
        with pytest.raises(ConfigurationError):
            list(make_dataset().batches(4))

    def test_repr(self):
        """Test the string representation."""
        assert repr(make_dataset()) == (
            "Dataset(name='toy', size=10, shape=[3, 2, 2], classes=3)"
        )


class TestRegistry:
    """Tests for load_dataset()."""

    def test_names(self):
        """Test the registered sources."""
        assert set(DATASETS) == {
            "synthetic_fg_bg",
            "cifar10_binary",
            "cifar100_binary",
            "tensor_frames",
        }

    def test_synthetic(self):
        """Test generating through the registry."""
        dataset = load_dataset("synthetic_fg_bg", n=8, rng=0)
        assert len(dataset) == 8
        assert dataset.name == "synthetic_fg_bg"

    def test_synthetic_config(self):
        """Test that the synthetic settings are passed on."""
        cfg = SyntheticConfig(image_hw=16, token_grid=4, block_tokens=2)
        dataset = load_dataset("synthetic_fg_bg", n=4, synthetic=cfg, rng=0)
        assert dataset.image_shape == (3, 16, 16)

    def test_frames(self, tmp_path):
        """Test loading an archive through the registry."""
        path = save_tensor_frames(
            tmp_path / "frames.npz", np.zeros((3, 2, 2, 4, 4)), [0, 1, 0]
        )
        assert load_dataset("tensor_frames", path=path).is_frames

    def test_unknown(self):
        """Test that an unknown name raises ConfigurationError."""
        with pytest.raises(ConfigurationError) as exc_info:
            load_dataset("imagenet")
        assert exc_info.value.field == "dataset"

    @pytest.mark.parametrize(
        "name", ["cifar10_binary", "cifar100_binary", "tensor_frames"]
    )
    def test_path_required(self, name):
        """Test that file-backed sources need a path."""
        with pytest.raises(ConfigurationError) as exc_info:
            load_dataset(name)
        assert exc_info.value.field == "path"
