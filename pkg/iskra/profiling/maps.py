"""
Firing-rate statistics and attention map export.

A token's firing rate is the fraction of (timestep, channel) slots in
which it spikes. Rendered on the token grid it shows which image regions
the network keeps active.
"""

import csv
import logging
from pathlib import Path

import numpy as np

from iskra.core.neurons import SpikeTensor, is_binary
from iskra.exceptions import DimensionError, FormatError, UsageError
from iskra.model.spikformer import ForwardResult

logger = logging.getLogger(__name__)

MAP_CSV_HEADER = ["row", "col", "rate"]


def firing_rate_map(x, image: int | None = None) -> np.ndarray:
    """
    Return per-token firing rates.

    Parameters
    ----------
    x : SpikeTensor or array_like
        Spikes [T, B, N, D] or a single image [T, N, D].
    image : int, optional
        Select one image of a batch.

    Returns
    -------
    np.ndarray
        Rates [N] for a single image (or when ``image`` is given),
        otherwise [B, N]; all values in [0, 1].

    Examples
    --------
    >>> firing_rate_map(np.ones((4, 8, 16)))
    array([1., 1., 1., 1., 1., 1., 1., 1.])
    """
    if isinstance(x, SpikeTensor):
        spikes = x.numpy()
    else:
        spikes = np.asarray(getattr(x, "data", x))
        if not is_binary(spikes):
            raise ValueError("firing rates need binary spikes")
    if spikes.ndim == 3:
        return spikes.mean(axis=(0, 2), dtype=np.float64)
    if spikes.ndim != 4:
        raise DimensionError(
            f"expected [T, B, N, D] or [T, N, D], got {spikes.shape}",
            expected=4,
            actual=spikes.ndim,
        )
    rates = spikes.mean(axis=(0, 3), dtype=np.float64)
    return rates if image is None else rates[image]


def layer_firing_rates(result: ForwardResult) -> dict[str, float]:
    """
    Return the mean firing rate of the SPS output and of every block output.

    Keys are ``sps`` and ``blocks.<l>`` (1-based), the naming used by
    :func:`iskra.profiling.flops.count_flops`.

    Raises
    ------
    UsageError
        If the forward pass did not record spikes.
    """
    if not result.spikes_by_layer:
        raise UsageError("forward pass was run without record_spikes=True")
    rates = {"sps": float(np.mean(result.spikes_by_layer[0]))}
    for index, spikes in enumerate(result.spikes_by_layer[1:], start=1):
        rates[f"blocks.{index}"] = float(np.mean(spikes))
    return rates


def _heat_colors(rates: np.ndarray) -> np.ndarray:
    """Map rates to RGB: 0 is blue, 1 is red."""
    rates = np.clip(rates, 0.0, 1.0)
    red = np.round(255.0 * rates)
    blue = np.round(255.0 * (1.0 - rates))
    rgb = np.stack([red, np.zeros_like(red), blue], axis=-1)
    return rgb.astype(np.uint8)


def export_attention_map(
    rate_map: np.ndarray,
    grid: tuple[int, int],
    path: str | Path,
    cell_px: int = 8,
) -> tuple[Path, Path]:
    """
    Write a firing-rate map as a P6 pixmap and a CSV file.

    Parameters
    ----------
    rate_map : np.ndarray
        Rates [N] in row-major token order.
    grid : tuple[int, int]
        Token grid (rows, cols) with rows * cols == N.
    path : str or Path
        Output path without extension; ``.ppm`` and ``.csv`` are appended.
    cell_px : int, optional
        Edge length in pixels of one token cell (default: 8).

    Returns
    -------
    tuple[Path, Path]
        Paths of the pixmap and the CSV file.

    Raises
    ------
    DimensionError
        If the grid does not hold exactly N tokens.
    """
    rates = np.asarray(rate_map, dtype=np.float64).ravel()
    rows, cols = grid
    if rows * cols != rates.size:
        raise DimensionError(
            f"grid {rows}x{cols} does not hold {rates.size} tokens",
            expected=rates.size,
            actual=rows * cols,
        )
    base = Path(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    ppm_path = base.with_name(base.name + ".ppm")
    csv_path = base.with_name(base.name + ".csv")

    cells = _heat_colors(rates).reshape(rows, cols, 3)
    pixels = np.repeat(np.repeat(cells, cell_px, axis=0), cell_px, axis=1)
    header = f"P6\n{cols * cell_px} {rows * cell_px}\n255\n".encode("ascii")
    ppm_path.write_bytes(header + pixels.tobytes())

    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MAP_CSV_HEADER)
        for index, rate in enumerate(rates):
            writer.writerow([index // cols, index % cols, f"{rate:.9f}"])

    logger.info(f"Wrote attention map {ppm_path.name} ({rows}x{cols} tokens)")
    return ppm_path, csv_path


def read_map_csv(path: str | Path) -> tuple[np.ndarray, tuple[int, int]]:
    """
    Read a map written by :func:`export_attention_map`.

    Returns
    -------
    tuple[np.ndarray, tuple[int, int]]
        Rates [N] in row-major order and the grid (rows, cols).

    Raises
    ------
    FormatError
        If the header is wrong or the cells do not cover the grid.
    """
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != MAP_CSV_HEADER:
            raise FormatError(f"{path}: expected header {MAP_CSV_HEADER}, got {header}")
        cells = [(int(r), int(c), float(v)) for r, c, v in reader]
    if not cells:
        raise FormatError(f"{path}: no map cells")
    rows = max(r for r, _, _ in cells) + 1
    cols = max(c for _, c, _ in cells) + 1
    if len(cells) != rows * cols:
        raise FormatError(f"{path}: {len(cells)} cells for a {rows}x{cols} grid")
    rates = np.zeros(rows * cols, dtype=np.float64)
    for r, c, v in cells:
        rates[r * cols + c] = v
    return rates, (rows, cols)
