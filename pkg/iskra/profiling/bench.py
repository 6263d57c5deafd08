"""
Wall-clock throughput measurement.

Numbers depend on the machine; they are reported for trend comparisons
between keep ratios on the same host, never as absolute targets.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np

from iskra.core.autograd import no_grad
from iskra.exceptions import UsageError
from iskra.model.spikformer import ExecutionMode, Spikformer

logger = logging.getLogger(__name__)


@dataclass
class ThroughputResult:
    """
    Timing summary of repeated forward passes.

    Attributes
    ----------
    images_per_second : float
        Batch size divided by the median pass time.
    median_s : float
        Median seconds per pass.
    iqr_s : float
        Interquartile range of the pass times, in seconds.
    repeats : int
        Number of timed passes.
    batch_size : int
        Images per pass.
    """

    images_per_second: float
    median_s: float
    iqr_s: float
    repeats: int
    batch_size: int


def throughput_bench(
    model: Spikformer,
    images: np.ndarray,
    repeats: int = 5,
    warmup: int = 1,
    execution: ExecutionMode | str = ExecutionMode.GATHER,
) -> ThroughputResult:
    """
    Time inference on a fixed batch.

    Parameters
    ----------
    model : Spikformer
        Model to time; it is switched to inference mode.
    images : np.ndarray
        Batch of images [B, C, H, W] or frames [B, T, C, H, W].
    repeats : int, optional
        Timed passes (default: 5).
    warmup : int, optional
        Untimed passes before timing (default: 1).
    execution : ExecutionMode or str, optional
        "gather" (default) compacts kept tokens; "mask" computes on all.

    Returns
    -------
    ThroughputResult

    Raises
    ------
    UsageError
        If the batch is empty or ``repeats`` < 1.
    """
    images = np.asarray(images, dtype=np.float32)
    if images.ndim == 0 or images.shape[0] == 0:
        raise UsageError("throughput benchmark needs at least one image")
    if repeats < 1:
        raise UsageError(f"repeats must be >= 1, got {repeats}")

    model.eval()
    rng = np.random.default_rng(0)
    timings = []
    with no_grad():
        for _ in range(max(warmup, 0)):
            model.forward(images, mode="eval", rng=rng, execution=execution)
        for _ in range(repeats):
            start = time.perf_counter()
            model.forward(images, mode="eval", rng=rng, execution=execution)
            timings.append(time.perf_counter() - start)

    median = float(np.median(timings))
    q25, q75 = np.percentile(timings, [25, 75])
    result = ThroughputResult(
        images_per_second=images.shape[0] / median if median > 0 else float("inf"),
        median_s=median,
        iqr_s=float(q75 - q25),
        repeats=repeats,
        batch_size=int(images.shape[0]),
    )
    logger.info(
        f"Throughput: {result.images_per_second:.1f} images/s "
        f"(median {median * 1000:.2f} ms, {ExecutionMode(execution).value})"
    )
    return result
