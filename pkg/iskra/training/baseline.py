"""
Logistic-regression baseline on pooled image statistics.

Used as a separability oracle: if a linear model on per-token intensity
statistics reaches high accuracy, the dataset is learnable by
construction and a failing spiking model points at the model.
"""

import logging

import numpy as np

from iskra.data.dataset import Dataset

logger = logging.getLogger(__name__)


def pooled_features(dataset: Dataset, token_grid: int) -> np.ndarray:
    """
    Return per-image features [M, 2 * C].

    For each channel: the mean over tokens and the maximum over tokens of
    the token mean intensity. Frame sequences are averaged over time first.
    """
    images = dataset.images
    if dataset.is_frames:
        images = images.mean(axis=1)
    count, channels, height, width = images.shape
    patch_h, patch_w = height // token_grid, width // token_grid
    tokens = images[:, :, : patch_h * token_grid, : patch_w * token_grid].reshape(
        count, channels, token_grid, patch_h, token_grid, patch_w
    )
    token_means = tokens.mean(axis=(3, 5)).reshape(count, channels, -1)
    return np.concatenate(
        [token_means.mean(axis=2), token_means.max(axis=2)], axis=1
    ).astype(np.float64)


def logistic_baseline(
    train_set: Dataset,
    test_set: Dataset,
    token_grid: int = 8,
    epochs: int = 500,
    learning_rate: float = 0.5,
) -> float:
    """
    Fit softmax regression by full-batch gradient descent and return test accuracy.

    Parameters
    ----------
    train_set, test_set : Dataset
        Data sharing the same image shape and classes.
    token_grid : int, optional
        Tokens per image side used to pool the features (default: 8).
    epochs : int, optional
        Gradient descent iterations (default: 500).
    learning_rate : float, optional
        Step size on standardised features (default: 0.5).
    """
    x_train = pooled_features(train_set, token_grid)
    x_test = pooled_features(test_set, token_grid)
    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0) + 1e-8
    x_train = (x_train - mean) / std
    x_test = (x_test - mean) / std

    classes = train_set.num_classes
    one_hot = np.eye(classes)[train_set.labels]
    weights = np.zeros((x_train.shape[1], classes))
    bias = np.zeros(classes)
    for _ in range(epochs):
        logits = x_train @ weights + bias
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        error = (probs - one_hot) / len(x_train)
        weights -= learning_rate * (x_train.T @ error)
        bias -= learning_rate * error.sum(axis=0)

    predicted = np.argmax(x_test @ weights + bias, axis=1)
    accuracy = float(np.mean(predicted == test_set.labels))
    logger.info(f"Logistic baseline accuracy: {accuracy:.4f}")
    return accuracy
