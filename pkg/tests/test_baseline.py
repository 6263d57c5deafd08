"""
Unit tests for the logistic-regression baseline.
"""

import numpy as np

from iskra.data.dataset import Dataset
from iskra.data.synthetic import generate_synthetic
from iskra.training.baseline import logistic_baseline, pooled_features


class TestPooledFeatures:
    """Tests for pooled_features()."""

    def test_shape(self, tiny_dataset):
        """Test two features per channel."""
        assert pooled_features(tiny_dataset, 4).shape == (16, 6)

    def test_values(self):
        """Test the mean and the maximum of the token means."""
        images = np.zeros((1, 1, 4, 4), dtype=np.float32)
        images[0, 0, :2, :2] = 1.0
        features = pooled_features(Dataset(images, [0], 2), 2)
        np.testing.assert_allclose(features, [[0.25, 1.0]])

    def test_frames_averaged(self):
        """Test that frame sequences are averaged over time."""
        frames = np.zeros((1, 2, 1, 4, 4), dtype=np.float32)
        frames[0, 0] = 1.0
        features = pooled_features(Dataset(frames, [0], 2), 2)
        np.testing.assert_allclose(features, [[0.5, 0.5]])


class TestLogisticBaseline:
    """Tests for logistic_baseline()."""

    def test_synthetic_is_separable(self):
        """Test that the synthetic classes are linearly separable."""
        train_set = generate_synthetic(64, rng=0)
        test_set = generate_synthetic(32, rng=1)
        assert logistic_baseline(train_set, test_set) >= 0.9

    def test_permuted_labels_near_chance(self):
        """Test that shuffled labels cannot be learned."""
        train_set = generate_synthetic(64, rng=0)
        test_set = generate_synthetic(200, rng=1)
        shuffled = test_set.with_labels(
            np.random.default_rng(5).permutation(test_set.labels)
        )
        assert logistic_baseline(train_set, shuffled) < 0.5
