"""
Synthetic foreground/background classification data.

Every image is split into a grid of token patches matching the model's
token grid. A square block of tokens at a random position carries the
class pattern: a saturated colour whose channel bits encode the label.
All other tokens are dim uniform noise that does not depend on the label,
so only the foreground tells the classes apart.
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np

from iskra.data.dataset import Dataset
from iskra.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass
class SyntheticConfig:
    """
    Geometry and intensities of the synthetic dataset.

    Attributes
    ----------
    num_classes : int
        Classes, 2 .. 2**channels - 1 (class c is coloured by the bits of c + 1).
    image_hw : int
        Square image size in pixels.
    channels : int
        Image channels.
    token_grid : int
        Tokens per image side; must divide ``image_hw``.
    block_tokens : int
        Side of the foreground token block; 4 of 8 gives 25% foreground.
    foreground_level : float
        Intensity of lit channels in the foreground block.
    background_level : float
        Upper bound of the uniform background noise.
    """

    num_classes: int = 4
    image_hw: int = 32
    channels: int = 3
    token_grid: int = 8
    block_tokens: int = 4
    foreground_level: float = 0.9
    background_level: float = 0.5

    def __post_init__(self):
        if not 2 <= self.num_classes <= 2**self.channels - 1:
            raise ConfigurationError(
                f"num_classes must be in 2..{2 ** self.channels - 1} for "
                f"{self.channels} channels, got {self.num_classes}",
                field="num_classes",
            )
        if self.token_grid < 2 or self.image_hw % self.token_grid:
            raise ConfigurationError(
                f"token_grid {self.token_grid} must be >= 2 and divide "
                f"image_hw {self.image_hw}",
                field="token_grid",
            )
        if not 1 <= self.block_tokens < self.token_grid:
            raise ConfigurationError(
                f"block_tokens must be in 1..{self.token_grid - 1}, "
                f"got {self.block_tokens}",
                field="block_tokens",
            )
        for name in ("foreground_level", "background_level"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1]", field=name)

    @property
    def tokens(self) -> int:
        return self.token_grid**2

    @property
    def foreground_fraction(self) -> float:
        """Return the share of tokens inside the foreground block."""
        return self.block_tokens**2 / self.tokens

    def to_dict(self) -> dict:
        return asdict(self)


def class_colors(num_classes: int, channels: int) -> np.ndarray:
    """
    Return the 0/1 channel pattern [num_classes, channels] of each class.

    Examples
    --------
    >>> class_colors(3, 3)
    array([[1., 0., 0.],
           [0., 1., 0.],
           [1., 1., 0.]], dtype=float32)
    """
    codes = np.arange(1, num_classes + 1)[:, None]
    bits = (codes >> np.arange(channels)[None, :]) & 1
    return bits.astype(np.float32)


def generate_synthetic(
    n: int,
    cfg: SyntheticConfig | None = None,
    rng: np.random.Generator | int | None = None,
) -> Dataset:
    """
    Generate ``n`` balanced samples.

    Parameters
    ----------
    n : int
        Number of images.
    cfg : SyntheticConfig, optional
        Dataset settings (default: SyntheticConfig()).
    rng : np.random.Generator or int, optional
        Randomness; the same seed gives a bitwise identical dataset.

    Returns
    -------
    Dataset
        Images [n, C, H, W], labels and foreground token masks [n, N].
    """
    cfg = cfg or SyntheticConfig()
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(0 if rng is None else rng)
    if n < 0:
        raise ConfigurationError(f"n must be >= 0, got {n}", field="n")

    labels = rng.permutation(np.arange(n) % cfg.num_classes)
    patch = cfg.image_hw // cfg.token_grid
    block = cfg.block_tokens
    colors = class_colors(cfg.num_classes, cfg.channels) * cfg.foreground_level

    images = rng.uniform(
        0.0, cfg.background_level, size=(n, cfg.channels, cfg.image_hw, cfg.image_hw)
    ).astype(np.float32)
    origins = rng.integers(0, cfg.token_grid - block + 1, size=(n, 2))
    foreground = np.zeros((n, cfg.token_grid, cfg.token_grid), dtype=bool)

    for i in range(n):
        row, col = origins[i]
        foreground[i, row : row + block, col : col + block] = True
        top, left = row * patch, col * patch
        span = block * patch
        images[i, :, top : top + span, left : left + span] = colors[labels[i]][
            :, None, None
        ]

    logger.debug(
        f"Generated {n} synthetic images, {cfg.num_classes} classes, "
        f"{cfg.foreground_fraction:.0%} foreground"
    )
    return Dataset(
        images,
        labels,
        cfg.num_classes,
        foreground.reshape(n, cfg.tokens),
        name="synthetic_fg_bg",
    )
