"""
Weight masks and magnitude pruning.

A WeightMask maps parameter names to boolean keep arrays. Pruning only
ever removes entries, so masks produced by successive rounds are nested.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from iskra.core.layers import Module, PrunableParam
from iskra.exceptions import CheckpointError, ConfigurationError, SaturationError

logger = logging.getLogger(__name__)

PRUNE_SCOPES = ["global", "per_layer"]


def _prunable(params: Module | Iterable[PrunableParam]) -> list[PrunableParam]:
    if isinstance(params, Module):
        params.assign_names()
        return params.prunable_parameters()
    params = list(params)
    for index, param in enumerate(params):
        if param.name is None:
            param.name = f"param{index}"
    names = [p.name for p in params]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise ConfigurationError(
            f"parameter names must be unique, got duplicates {duplicates}", "params"
        )
    return [p for p in params if p.prunable]


def _validate_fraction(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ConfigurationError(f"prune fraction must be in (0, 1), got {p}", "p")


def _floor_count(fraction: float, count: int) -> int:
    # Rounding first keeps 0.25 * 12 from landing on 2.999...
    return int(math.floor(round(fraction * count, 9)))


@dataclass
class WeightMask:
    """
    Boolean keep masks keyed by parameter name.

    Attributes
    ----------
    masks : dict[str, np.ndarray]
        True marks a weight that is still alive.
    """

    masks: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_params(cls, params: Module | Iterable[PrunableParam]) -> "WeightMask":
        """Capture the current masks of the prunable parameters (all-ones if unset)."""
        masks = {}
        for param in _prunable(params):
            if param.mask is None:
                masks[param.name] = np.ones(param.shape, dtype=bool)
            else:
                masks[param.name] = param.mask.copy()
        return cls(masks)

    @property
    def alive(self) -> int:
        """Return the number of kept weights."""
        return int(sum(int(m.sum()) for m in self.masks.values()))

    @property
    def total(self) -> int:
        """Return the number of masked-or-kept weights."""
        return int(sum(m.size for m in self.masks.values()))

    @property
    def sparsity(self) -> float:
        """Return the fraction of removed weights."""
        total = self.total
        return 0.0 if total == 0 else 1.0 - self.alive / total

    def _check_compatible(self, other: "WeightMask") -> None:
        if self.masks.keys() != other.masks.keys():
            raise CheckpointError(
                f"mask names differ: {sorted(set(self.masks) ^ set(other.masks))}"
            )
        for name, mask in self.masks.items():
            if mask.shape != other.masks[name].shape:
                raise CheckpointError(
                    f"mask shape drift for '{name}': {mask.shape} vs "
                    f"{other.masks[name].shape}"
                )

    def hamming_distance(self, other: "WeightMask") -> float:
        """Return the fraction of positions on which the two masks disagree."""
        self._check_compatible(other)
        total = self.total
        if total == 0:
            return 0.0
        differ = sum(
            int(np.count_nonzero(mask != other.masks[name]))
            for name, mask in self.masks.items()
        )
        return differ / total

    def is_nested_in(self, other: "WeightMask") -> bool:
        """Return True if every weight kept here is also kept by ``other``."""
        self._check_compatible(other)
        return all(
            not np.any(mask & ~other.masks[name]) for name, mask in self.masks.items()
        )

    def apply(self, params: Module | Iterable[PrunableParam]) -> None:
        """Attach these masks to the matching parameters and zero removed weights."""
        by_name = {p.name: p for p in _prunable(params)}
        missing = sorted(set(self.masks) - set(by_name))
        if missing:
            raise CheckpointError(f"masks for unknown parameters: {missing}")
        for name, mask in self.masks.items():
            by_name[name].set_mask(mask)

    def to_arrays(self) -> dict[str, np.ndarray]:
        """Return copies of the mask arrays."""
        return {name: mask.copy() for name, mask in self.masks.items()}

    def copy(self) -> "WeightMask":
        return WeightMask(self.to_arrays())


def _bottom_k(
    values: list[np.ndarray], positions: list[np.ndarray], remove: int
) -> list[np.ndarray]:
    """Split the ``remove`` smallest pooled magnitudes into per-tensor positions."""
    if remove == 0:
        return [pos[:0] for pos in positions]
    pooled = np.concatenate(values)
    owner = np.concatenate(
        [np.full(len(v), i, dtype=np.int64) for i, v in enumerate(values)]
    )
    flat = np.concatenate(positions)
    # Stable sort: equal magnitudes are removed in pooled index order.
    chosen = np.argsort(pooled, kind="stable")[:remove]
    return [flat[chosen[owner[chosen] == i]] for i in range(len(values))]


def magnitude_prune(
    params: Module | Iterable[PrunableParam],
    p: float,
    scope: str = "global",
) -> WeightMask:
    """
    Remove the ``p`` fraction of alive prunable weights with the smallest |w|.

    Parameters
    ----------
    params : Module or iterable of PrunableParam
        Model or parameters; only ``prunable`` ones are considered.
    p : float
        Fraction in (0, 1) of the currently alive weights to remove.
    scope : str, optional
        "global" pools all tensors before ranking (default); "per_layer"
        removes ``floor(p * alive)`` from every tensor separately.

    Returns
    -------
    WeightMask
        The updated masks, already attached to the parameters.

    Raises
    ------
    ConfigurationError
        If ``p`` or ``scope`` is invalid.
    SaturationError
        If no prunable weight is alive.

    Examples
    --------
    >>> w = PrunableParam(np.array([0.5, -0.1, 0.3, -0.7]), prunable=True)
    >>> magnitude_prune([w], 0.25).masks[w.name]
    array([ True, False,  True,  True])
    """
    _validate_fraction(p)
    if scope not in PRUNE_SCOPES:
        raise ConfigurationError(
            f"Unknown prune scope: '{scope}'. Valid options: {PRUNE_SCOPES}",
            "scope",
        )
    tensors = _prunable(params)
    alive_total = sum(param.alive for param in tensors)
    if alive_total == 0:
        raise SaturationError("no prunable weight is alive")

    positions = []
    values = []
    for param in tensors:
        keep = np.ones(param.shape, dtype=bool) if param.mask is None else param.mask
        pos = np.flatnonzero(keep.ravel())
        positions.append(pos)
        values.append(np.abs(param.data.ravel()[pos]))

    if scope == "global":
        removed = _bottom_k(values, positions, _floor_count(p, alive_total))
    else:
        removed = [
            _bottom_k([v], [pos], _floor_count(p, len(pos)))[0]
            for v, pos in zip(values, positions)
        ]

    for param, drop in zip(tensors, removed):
        if param.mask is None:
            mask = np.ones(param.size, dtype=bool)
        else:
            mask = param.mask.ravel().copy()
        mask[drop] = False
        param.set_mask(mask.reshape(param.shape))

    result = WeightMask.from_params(tensors)
    logger.debug(
        f"Pruned {alive_total - result.alive} of {alive_total} alive weights "
        f"({scope}), sparsity now {result.sparsity:.4f}"
    )
    return result


def global_magnitude_mask(
    weights: dict[str, np.ndarray], alive: int, within: WeightMask | None = None
) -> WeightMask:
    """
    One-shot mask keeping the ``alive`` largest |w| pooled over ``weights``.

    Ties are broken the same way as in :func:`magnitude_prune`, so masks
    computed from one set of weights at decreasing ``alive`` are nested.

    Parameters
    ----------
    weights : dict[str, np.ndarray]
        Weights to rank, keyed by parameter name.
    alive : int
        Weights left alive.
    within : WeightMask, optional
        Only weights alive in this mask are ranked; the result is nested
        in it whatever the magnitudes.

    Raises
    ------
    ConfigurationError
        If ``alive`` exceeds the weights available for ranking.
    CheckpointError
        If ``within`` does not cover exactly the names and shapes of
        ``weights``.
    """
    names = list(weights)
    arrays = {n: np.asarray(weights[n]) for n in names}
    if within is None:
        keep = {n: np.ones(arrays[n].shape, dtype=bool) for n in names}
    else:
        keep = within.masks
        if set(keep) != set(names):
            raise CheckpointError(
                f"mask names differ: {sorted(set(keep) ^ set(names))}"
            )
        for name in names:
            if keep[name].shape != arrays[name].shape:
                raise CheckpointError(
                    f"mask shape drift for '{name}': {keep[name].shape} vs "
                    f"{arrays[name].shape}"
                )
    positions = [np.flatnonzero(keep[n].ravel()) for n in names]
    total = sum(len(pos) for pos in positions)
    if not 0 <= alive <= total:
        raise ConfigurationError(f"alive count {alive} outside [0, {total}]", "alive")
    values = [
        np.abs(arrays[n].astype(np.float64).ravel()[pos])
        for n, pos in zip(names, positions)
    ]
    removed = _bottom_k(values, positions, total - alive)
    masks = {}
    for name, drop in zip(names, removed):
        mask = keep[name].ravel().copy()
        mask[drop] = False
        masks[name] = mask.reshape(arrays[name].shape)
    return WeightMask(masks)


def random_reinit(
    params: Module | Iterable[PrunableParam],
    masks: WeightMask | None,
    rng: np.random.Generator,
) -> None:
    """
    Redraw every parameter from the distribution it was initialised with.

    Masked weights stay exactly zero. Non-prunable parameters are redrawn
    as well, so the network is a fresh sample apart from its masks.
    """
    tensors = params.parameters() if isinstance(params, Module) else list(params)
    if isinstance(params, Module):
        params.assign_names()
    for param in tensors:
        param.data = param.initializer.draw(param.shape, rng)
        param.apply_mask()
    if masks is not None:
        masks.apply(tensors)
    logger.debug(f"Re-initialised {len(tensors)} parameters")


def expected_sparsity(p: float, k: int) -> float:
    """Return the analytic sparsity ``1 - (1 - p) ** k`` after ``k`` rounds."""
    _validate_fraction(p)
    if k < 0:
        raise ConfigurationError(f"round count must be >= 0, got {k}", "K")
    return 1.0 - (1.0 - p) ** k


def simulate_alive_counts(total: int, p: float, k: int) -> list[int]:
    """
    Return the alive weight counts after rounds 0..k of global pruning.

    Examples
    --------
    >>> simulate_alive_counts(16, 0.25, 2)
    [16, 12, 9]
    """
    _validate_fraction(p)
    counts = [int(total)]
    for _ in range(k):
        counts.append(counts[-1] - _floor_count(p, counts[-1]))
    return counts
