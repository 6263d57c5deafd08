"""
Unit tests for the synthetic foreground/background dataset.
"""

import numpy as np
import pytest

from iskra.data.synthetic import SyntheticConfig, class_colors, generate_synthetic
from iskra.exceptions import ConfigurationError


class TestSyntheticConfig:
    """Tests for SyntheticConfig validation."""

    def test_defaults(self):
        """Test the default geometry."""
        cfg = SyntheticConfig()
        assert cfg.tokens == 64
        assert cfg.foreground_fraction == 0.25

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"num_classes": 1},
            {"num_classes": 8},
            {"token_grid": 5},
            {"token_grid": 1, "image_hw": 4},
            {"block_tokens": 0},
            {"block_tokens": 8},
            {"foreground_level": 1.5},
            {"background_level": -0.1},
        ],
    )
    def test_invalid(self, kwargs):
        """Test that invalid settings raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            SyntheticConfig(**kwargs)

    def test_to_dict(self):
        """Test serialisation."""
        assert SyntheticConfig().to_dict()["block_tokens"] == 4


class TestClassColors:
    """Tests for class_colors()."""

    def test_bits(self):
        """Test that class c is coloured by the bits of c + 1."""
        np.testing.assert_array_equal(
            class_colors(4, 3), [[1, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 1]]
        )

    def test_distinct(self):
        """Test that every class has its own non-black colour."""
        colors = class_colors(7, 3)
        assert len({tuple(c) for c in colors}) == 7
        assert np.all(colors.sum(axis=1) > 0)


class TestGenerateSynthetic:
    """Tests for generate_synthetic()."""

    def test_shapes(self):
        """Test images, labels and foreground masks."""
        dataset = generate_synthetic(12, rng=0)
        assert dataset.images.shape == (12, 3, 32, 32)
        assert dataset.foreground.shape == (12, 64)
        assert np.all(dataset.foreground.sum(axis=1) == 16)

    def test_balanced(self):
        """Test that every class appears equally often."""
        dataset = generate_synthetic(20, rng=3)
        np.testing.assert_array_equal(np.bincount(dataset.labels), [5, 5, 5, 5])

    def test_deterministic(self):
        """Test that one seed gives a bitwise identical dataset."""
        a = generate_synthetic(6, rng=7)
        b = generate_synthetic(6, rng=7)
        np.testing.assert_array_equal(a.images, b.images)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_foreground_carries_label(self):
        """Test that foreground pixels show the class colour."""
        cfg = SyntheticConfig(image_hw=16, token_grid=4, block_tokens=2)
        dataset = generate_synthetic(8, cfg, rng=1)
        colors = class_colors(cfg.num_classes, cfg.channels) * cfg.foreground_level
        for i in range(len(dataset)):
            sample = dataset.sample(i)
            token = int(sample.foreground_tokens[0])
            row, col = divmod(token, cfg.token_grid)
            pixel = sample.image[:, row * 4, col * 4]
            np.testing.assert_allclose(pixel, colors[sample.label])

    def test_background_bounded(self):
        """Test that background noise stays below its level."""
        cfg = SyntheticConfig(background_level=0.2)
        dataset = generate_synthetic(4, cfg, rng=2)
        background = ~dataset.foreground.reshape(4, 8, 8)
        pixels = np.repeat(np.repeat(background, 4, axis=1), 4, axis=2)
        values = dataset.images.transpose(1, 0, 2, 3)[:, pixels]
        assert values.max() <= 0.2

    def test_empty(self):
        """Test that n = 0 gives an empty dataset."""
        assert len(generate_synthetic(0, rng=0)) == 0

    def test_negative(self):
        """Test that a negative size raises ConfigurationError."""
        with pytest.raises(ConfigurationError):
            generate_synthetic(-1)
