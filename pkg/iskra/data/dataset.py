"""
In-memory labelled image datasets.
"""

import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from iskra.exceptions import ConfigurationError, DimensionError

logger = logging.getLogger(__name__)


@dataclass
class SyntheticSample:
    """
    One image with the tokens that carry its class pattern.

    Attributes
    ----------
    image : np.ndarray
        Pixels [C, H, W] in [0, 1].
    label : int
        Class id.
    foreground_tokens : np.ndarray
        Sorted indices (row-major on the token grid) of foreground tokens.
    """

    image: np.ndarray
    label: int
    foreground_tokens: np.ndarray


@dataclass
class Batch:
    """A mini-batch: inputs, labels and the dataset indices they came from."""

    images: np.ndarray
    labels: np.ndarray
    indices: np.ndarray


@dataclass
class Dataset:
    """
    Images (or frame sequences) with integer labels.

    Attributes
    ----------
    images : np.ndarray
        float32 images [M, C, H, W] or frame sequences [M, T, C, H, W].
    labels : np.ndarray
        int64 labels [M].
    num_classes : int
        Number of classes.
    foreground : np.ndarray, optional
        Boolean foreground token masks [M, N] when known.
    name : str
        Registry name of the source.
    """

    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    foreground: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim not in (4, 5):
            raise DimensionError(
                f"images must be [M, C, H, W] or [M, T, C, H, W], got "
                f"{self.images.shape}",
                expected=4,
                actual=self.images.ndim,
            )
        if self.labels.shape != (self.images.shape[0],):
            raise DimensionError(
                f"labels of shape {self.labels.shape} for "
                f"{self.images.shape[0]} images",
                expected=self.images.shape[0],
                actual=self.labels.shape,
            )
        if self.foreground is not None:
            self.foreground = np.asarray(self.foreground, dtype=bool)
            if self.foreground.shape[0] != self.images.shape[0]:
                raise DimensionError(
                    "foreground masks do not match the number of images",
                    expected=self.images.shape[0],
                    actual=self.foreground.shape[0],
                )
        if len(self.labels) and (
            self.labels.min() < 0 or self.labels.max() >= self.num_classes
        ):
            raise ConfigurationError(
                f"labels must lie in 0..{self.num_classes - 1}", field="num_classes"
            )

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def is_frames(self) -> bool:
        """Return True for frame sequences [M, T, C, H, W]."""
        return self.images.ndim == 5

    @property
    def image_shape(self) -> tuple[int, ...]:
        return tuple(self.images.shape[1:])

    def sample(self, index: int) -> SyntheticSample:
        """Return one image with its foreground token indices (empty if unknown)."""
        tokens = (
            np.flatnonzero(self.foreground[index])
            if self.foreground is not None
            else np.zeros(0, dtype=np.int64)
        )
        return SyntheticSample(self.images[index], int(self.labels[index]), tokens)

    def subset(self, indices) -> "Dataset":
        """Return the images at ``indices`` as a new dataset."""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.images[indices],
            self.labels[indices],
            self.num_classes,
            None if self.foreground is None else self.foreground[indices],
            self.name,
        )

    def split(self, fraction: float) -> tuple["Dataset", "Dataset"]:
        """
        Split into a leading and a trailing part.

        Parameters
        ----------
        fraction : float
            Share of the images in the first part, 0 < fraction < 1.
        """
        if not 0 < fraction < 1:
            raise ConfigurationError(
                f"split fraction must be in (0, 1), got {fraction}", field="fraction"
            )
        cut = int(round(len(self) * fraction))
        everything = np.arange(len(self))
        return self.subset(everything[:cut]), self.subset(everything[cut:])

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        """Return a copy with replaced labels (used by label-permutation controls)."""
        return Dataset(
            self.images, labels, self.num_classes, self.foreground, self.name
        )

    def batches(
        self,
        batch_size: int,
        rng: np.random.Generator | None = None,
        shuffle: bool = True,
    ) -> Iterator[Batch]:
        """
        Iterate over mini-batches; the last one may be smaller.

        Raises
        ------
        ConfigurationError
            If ``batch_size`` < 1, or shuffling is requested without ``rng``.
        """
        if batch_size < 1:
            raise ConfigurationError(
                f"batch_size must be >= 1, got {batch_size}", field="batch_size"
            )
        order = np.arange(len(self))
        if shuffle:
            if rng is None:
                raise ConfigurationError("shuffling needs a random generator", "rng")
            order = rng.permutation(len(self))
        for start in range(0, len(self), batch_size):
            chosen = order[start : start + batch_size]
            yield Batch(self.images[chosen], self.labels[chosen], chosen)

    def __repr__(self) -> str:
        return (
            f"Dataset(name='{self.name}', size={len(self)}, "
            f"shape={list(self.image_shape)}, classes={self.num_classes})"
        )
