"""
Line plots of sweep results.

Figures are drawn with matplotlib on the Agg backend and saved as SVG. The
SVG hash salt and the date metadata are fixed, so the same series always
produce the same bytes.
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

logger = logging.getLogger(__name__)

FIGSIZE = (6.4, 4.2)
SVG_HASHSALT = "iskra"
RC_PARAMS = {
    "font.family": "DejaVu Sans",
    "axes.unicode_minus": False,
    "svg.hashsalt": SVG_HASHSALT,
}


def line_plot(
    series: dict[str, list[tuple[float, float]]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
) -> Figure:
    """
    Draw one marked line per series.

    Parameters
    ----------
    series : dict[str, list[tuple[float, float]]]
        Points (x, y) per series name, drawn in insertion order. Empty
        series are skipped.
    title, x_label, y_label : str, optional
        Text labels.

    Returns
    -------
    Figure
        The caller closes it with ``plt.close``.

    Raises
    ------
    ValueError
        If no series contains a point.
    """
    if not any(series.values()):
        raise ValueError("nothing to plot")
    fig, ax = plt.subplots(figsize=FIGSIZE, constrained_layout=True)
    for name, points in series.items():
        if not points:
            continue
        xs = [float(x) for x, _ in points]
        ys = [float(y) for _, y in points]
        ax.plot(xs, ys, marker="o", label=name)
    ax.set_title(title)
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    return fig


def write_line_plot(
    series: dict[str, list[tuple[float, float]]],
    path: str | Path,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
) -> Path:
    """Render :func:`line_plot` to ``path`` as SVG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(RC_PARAMS):
        fig = line_plot(series, title, x_label, y_label)
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    logger.info(f"Wrote plot to {path}")
    return path
