"""
Pre-tensorized event frames stored as ``.npz`` archives.

An archive holds ``frames`` [M, T, C, H, W] and integer ``labels`` [M].
"""

import logging
from pathlib import Path

import numpy as np

from iskra.data.dataset import Dataset
from iskra.exceptions import FormatError

logger = logging.getLogger(__name__)


def save_tensor_frames(
    path: str | Path, frames: np.ndarray, labels: np.ndarray
) -> Path:
    """Write frames and labels to an ``.npz`` archive."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        np.savez(
            f,
            frames=np.asarray(frames, dtype=np.float32),
            labels=np.asarray(labels, dtype=np.int64),
        )
    return path


def load_tensor_frames(path: str | Path, num_classes: int | None = None) -> Dataset:
    """
    Load frame sequences.

    Parameters
    ----------
    path : str or Path
        Archive written by :func:`save_tensor_frames` or any ``.npz`` with
        the same two arrays.
    num_classes : int, optional
        Defaults to ``max(labels) + 1``.

    Raises
    ------
    FormatError
        If an array is missing or ``frames`` is not 5-D.
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"frame archive not found: {path}")
    with np.load(path, allow_pickle=False) as archive:
        missing = [k for k in ("frames", "labels") if k not in archive.files]
        if missing:
            raise FormatError(f"{path}: missing arrays {missing}")
        frames = archive["frames"]
        labels = archive["labels"]
    if frames.ndim != 5:
        raise FormatError(f"{path}: frames must be [M, T, C, H, W], got {frames.shape}")
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if labels.size else 2
    logger.info(f"Loaded {frames.shape[0]} frame sequences from {path.name}")
    return Dataset(frames, labels, max(num_classes, 2), name="tensor_frames")
