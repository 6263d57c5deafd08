"""
Unit tests for sweep line plots.
"""

import matplotlib.pyplot as plt
import pytest

from iskra.experiments.plots import line_plot, write_line_plot


class TestLinePlot:
    """Tests for line_plot()."""

    def test_one_line_per_series(self):
        """Test that every non-empty series becomes a labelled line."""
        fig = line_plot({"a": [(0, 1), (1, 2)], "b": [(0, 2), (1, 0)], "c": []})
        try:
            ax = fig.axes[0]
            assert [line.get_label() for line in ax.get_lines()] == ["a", "b"]
            assert list(ax.get_lines()[1].get_ydata()) == [2.0, 0.0]
        finally:
            plt.close(fig)

    def test_labels(self):
        """Test the title and axis labels."""
        fig = line_plot({"a": [(0, 0)]}, "title", "sparsity (%)", "accuracy (%)")
        try:
            ax = fig.axes[0]
            assert ax.get_title() == "title"
            assert ax.get_xlabel() == "sparsity (%)"
            assert ax.get_ylabel() == "accuracy (%)"
        finally:
            plt.close(fig)

    def test_empty(self):
        """Test that no points raise ValueError."""
        with pytest.raises(ValueError):
            line_plot({"a": []})


class TestWriteLinePlot:
    """Tests for write_line_plot()."""

    def test_write(self, tmp_path):
        """Test writing an SVG to a nested path."""
        path = write_line_plot({"a": [(0, 0), (1, 1)]}, tmp_path / "p" / "f.svg")
        text = path.read_text(encoding="utf-8")
        assert "<svg" in text
        assert "<dc:date>" not in text

    def test_deterministic(self, tmp_path):
        """Test that equal input gives equal bytes."""
        series = {"imp_rewind": [(0.0, 90.0), (43.75, 88.5)]}
        first = write_line_plot(series, tmp_path / "a.svg", "t")
        second = write_line_plot(series, tmp_path / "b.svg", "t")
        assert first.read_bytes() == second.read_bytes()

    def test_no_open_figures(self, tmp_path):
        """Test that the figure is closed after saving."""
        before = len(plt.get_fignums())
        write_line_plot({"a": [(0, 0), (1, 1)]}, tmp_path / "f.svg")
        assert len(plt.get_fignums()) == before
