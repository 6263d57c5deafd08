"""
Unit tests for the experiment table runners.

The runners train the tiny model for one epoch per run, so the numbers
are not meaningful; the tests check row structure and written files.
"""

import csv

import pytest

from iskra.experiments.tables import (
    Fig4Row,
    Table1Row,
    Table2Row,
    run_fig4_analog,
    run_table1_analog,
    run_table2_analog,
    run_table3_analog,
    write_csv,
)
from iskra.pruning.lottery import PruneMethod

from tests.conftest import tiny_experiment_config


def read_rows(path):
    with open(path, encoding="utf-8") as f:
        return list(csv.reader(f))


class TestWriteCsv:
    """Tests for write_csv()."""

    def test_header_and_floats(self, tmp_path):
        """Test field names and six-decimal floats."""
        path = write_csv(tmp_path / "out.csv", [Fig4Row("imp_rewind", 1, 0.25, 0.5)])
        assert read_rows(path) == [
            ["method", "round", "sparsity", "eval_acc"],
            ["imp_rewind", "1", "0.250000", "0.500000"],
        ]

    def test_empty(self, tmp_path):
        """Test that no rows give an empty file."""
        assert write_csv(tmp_path / "e.csv", []).read_text(encoding="utf-8") == ""


class TestTable1:
    """Tests for run_table1_analog()."""

    def test_rows(self, tmp_path):
        """Test one row per keep ratio and the reference geometry."""
        rows = run_table1_analog(
            tiny_experiment_config(), [1.0, 0.5], tmp_path, 1, bench_batch=2
        )
        assert [r.rho for r in rows] == [1.0, 0.5]
        assert rows[0].flops_reduction == 0.0
        assert rows[1].flops_reduction > 0.0
        assert rows[1].paper_cifar_reduction == pytest.approx(0.2644, abs=1e-4)
        assert all(0.0 <= r.accuracy <= 1.0 for r in rows)
        table = read_rows(tmp_path / "table1.csv")
        assert table[0] == [f for f in Table1Row.__dataclass_fields__]
        assert len(table) == 3


class TestTable2:
    """Tests for run_table2_analog()."""

    def test_rows(self, tmp_path):
        """Test one ticket search per keep ratio and the written files."""
        rows = run_table2_analog(tiny_experiment_config(), [1.0, 0.5], tmp_path)
        assert [(r.rho, r.round) for r in rows] == [
            (1.0, 0),
            (1.0, 1),
            (1.0, 2),
            (0.5, 0),
            (0.5, 1),
            (0.5, 2),
        ]
        for dense, sparse in zip(rows[:3], rows[3:]):
            assert sparse.sparsity == pytest.approx(dense.sparsity, abs=0.02)
        assert rows[2].sparsity > rows[1].sparsity > 0.0
        table = read_rows(tmp_path / "table2.csv")
        assert table[0] == [f for f in Table2Row.__dataclass_fields__]
        assert len(table) == 7
        assert (tmp_path / "imp_rounds_rho1.csv").exists()
        assert (tmp_path / "imp_rounds_rho0.5.csv").exists()
        assert "rho=0.5" in (tmp_path / "table2.svg").read_text(encoding="utf-8")

    def test_default_keep_ratios(self):
        """Test the dense and 0.7 defaults without an output directory."""
        rows = run_table2_analog(tiny_experiment_config())
        assert sorted({r.rho for r in rows}) == [0.7, 1.0]


class TestTable3:
    """Tests for run_table3_analog()."""

    def test_rows(self, tmp_path):
        """Test the seed statistics of matched selector pairs."""
        rows = run_table3_analog(tiny_experiment_config(), [0.5], [0, 1], tmp_path)
        assert len(rows) == 1
        assert rows[0].seeds == 2
        assert 0.0 <= rows[0].selector_mean <= 1.0
        assert 0.0 <= rows[0].random_mean <= 1.0
        assert rows[0].selector_std >= 0.0
        assert len(read_rows(tmp_path / "table3.csv")) == 2


class TestFig4:
    """Tests for run_fig4_analog()."""

    def test_single_method(self, tmp_path):
        """Test rows, per-round log and plot of one method."""
        rows = run_fig4_analog(
            tiny_experiment_config(), tmp_path, [PruneMethod.IMP_REWIND]
        )
        assert [r.round for r in rows] == [0, 1, 2]
        assert rows[0].sparsity == 0.0
        assert rows[2].sparsity > rows[1].sparsity
        assert (tmp_path / "fig4.csv").exists()
        assert (tmp_path / "imp_rounds_imp_rewind.csv").exists()
        svg = (tmp_path / "fig4.svg").read_text(encoding="utf-8")
        assert "imp_rewind" in svg

    @pytest.mark.slow
    def test_all_methods(self, tmp_path):
        """Test that every pruning method contributes a series."""
        rows = run_fig4_analog(tiny_experiment_config(), tmp_path)
        assert {r.method for r in rows} == {
            "imp_rewind",
            "early_bird",
            "random_reinit",
        }
        assert len(rows) == 9
