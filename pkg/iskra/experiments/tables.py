"""
Desk-scale analogs of the keep-ratio table, the dense-versus-sparse ticket
table, the selector-versus-random table and the pruning-method comparison.

Every runner returns its rows and, given an output directory, writes them
as CSV (and SVG for the pruning sweeps) under deterministic names.
"""

import csv
import logging
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from iskra.experiments.config import ExperimentConfig
from iskra.experiments.plots import write_line_plot
from iskra.experiments.runner import build_datasets, run_pruning, run_training
from iskra.model.config import paper_cifar_config
from iskra.profiling.bench import throughput_bench
from iskra.profiling.flops import count_flops
from iskra.pruning.lottery import PruneMethod, write_round_csv
from iskra.training.trainer import evaluate

logger = logging.getLogger(__name__)

TABLE2_RHOS = [1.0, 0.7]

FIG4_METHODS = [
    PruneMethod.IMP_REWIND,
    PruneMethod.EARLY_BIRD,
    PruneMethod.RANDOM_REINIT,
]


def write_csv(path: str | Path, rows: list) -> Path:
    """Write dataclass rows as CSV with a header of their field names."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        if rows:
            writer.writerow([fl.name for fl in fields(rows[0])])
        for row in rows:
            writer.writerow(
                [f"{v:.6f}" if isinstance(v, float) else v for v in astuple(row)]
            )
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


@dataclass
class Table1Row:
    """Accuracy, speed and cost of one keep ratio."""

    rho: float
    accuracy: float
    images_per_second: float
    gflops: float
    flops_reduction: float
    paper_cifar_gflops: float
    paper_cifar_reduction: float


@dataclass
class Table2Row:
    """Accuracy of one keep ratio after one pruning round."""

    rho: float
    round: int
    sparsity: float
    eval_acc: float


@dataclass
class Table3Row:
    """Learned selector against random selection at one keep ratio."""

    rho: float
    selector_mean: float
    selector_std: float
    random_mean: float
    random_std: float
    seeds: int


@dataclass
class Fig4Row:
    """Accuracy of one pruning method after one round."""

    method: str
    round: int
    sparsity: float
    eval_acc: float


def run_table1_analog(
    cfg: ExperimentConfig,
    rho_list: list[float],
    out_dir: str | Path | None = None,
    bench_repeats: int = 5,
    bench_batch: int = 32,
) -> list[Table1Row]:
    """
    Train one model per keep ratio and report accuracy, throughput and FLOPs.

    FLOPs are analytic for the configured geometry; the 384-channel CIFAR
    geometry is reported alongside for comparison with published values.
    """
    datasets = build_datasets(cfg)
    test_set = datasets[1]
    sample = test_set.images[: min(bench_batch, len(test_set))]
    rows = []
    for rho in rho_list:
        run_cfg = cfg.with_rho(rho)
        model = run_training(run_cfg, datasets=datasets).model
        accuracy = evaluate(model, test_set, run_cfg.threads, seed=run_cfg.seed)
        speed = throughput_bench(model, sample, repeats=bench_repeats)
        report = count_flops(run_cfg.model)
        paper = count_flops(paper_cifar_config(rho=rho))
        rows.append(
            Table1Row(
                rho=rho,
                accuracy=accuracy,
                images_per_second=speed.images_per_second,
                gflops=report.gflops,
                flops_reduction=report.reduction,
                paper_cifar_gflops=paper.gflops,
                paper_cifar_reduction=paper.reduction,
            )
        )
        logger.info(
            f"rho={rho}: accuracy {accuracy:.4f}, "
            f"{speed.images_per_second:.1f} images/s, {report.gflops:.4f} GFLOPs"
        )
    if out_dir is not None:
        write_csv(Path(out_dir) / "table1.csv", rows)
    return rows


def run_table2_analog(
    cfg: ExperimentConfig,
    rho_list: list[float] | None = None,
    out_dir: str | Path | None = None,
) -> list[Table2Row]:
    """
    Search lottery tickets of the dense model and of sparse keep ratios.

    Each keep ratio runs the configured pruning method on the same data, so
    the rows compare accuracy at equal weight sparsity with and without
    token dropping. Writes ``table2.csv``, ``table2.svg`` and the per-round
    log of every keep ratio as ``imp_rounds_rho<rho>.csv``.

    Parameters
    ----------
    cfg : ExperimentConfig
        Base run; only its keep ratio is replaced.
    rho_list : list[float], optional
        Keep ratios; defaults to ``[1.0, 0.7]``.
    out_dir : str or Path, optional
        Output directory.

    Returns
    -------
    list[Table2Row]
        One row per keep ratio and round, in round order.
    """
    datasets = build_datasets(cfg)
    rows = []
    series = {}
    for rho in rho_list or TABLE2_RHOS:
        snapshot = run_pruning(cfg.with_rho(rho), datasets=datasets)
        for record in snapshot.metrics:
            rows.append(Table2Row(rho, record.round, record.sparsity, record.eval_acc))
        series[f"rho={rho:g}"] = [
            (100.0 * r.sparsity, 100.0 * r.eval_acc) for r in snapshot.metrics
        ]
        logger.info(
            f"rho={rho}: final sparsity {snapshot.metrics[-1].sparsity:.4f}, "
            f"accuracy {snapshot.metrics[-1].eval_acc:.4f}"
        )
        if out_dir is not None:
            write_round_csv(
                snapshot.metrics, Path(out_dir) / f"imp_rounds_rho{rho:g}.csv"
            )
    if out_dir is not None:
        write_csv(Path(out_dir) / "table2.csv", rows)
        write_line_plot(
            series,
            Path(out_dir) / "table2.svg",
            title="Tickets with and without token dropping",
            x_label="sparsity (%)",
            y_label="accuracy (%)",
        )
    return rows


def run_table3_analog(
    cfg: ExperimentConfig,
    rho_list: list[float],
    seeds: list[int],
    out_dir: str | Path | None = None,
) -> list[Table3Row]:
    """Train matched learned/random selector pairs over seeds and keep ratios."""
    rows = []
    for rho in rho_list:
        scores: dict[str, list[float]] = {"spiking": [], "random": []}
        for seed in seeds:
            seeded = cfg.with_seed(seed)
            datasets = build_datasets(seeded)
            for kind in scores:
                run_cfg = seeded.with_rho(rho, selector_kind=kind)
                model = run_training(run_cfg, datasets=datasets).model
                scores[kind].append(
                    evaluate(model, datasets[1], run_cfg.threads, seed=seed)
                )
        rows.append(
            Table3Row(
                rho=rho,
                selector_mean=float(np.mean(scores["spiking"])),
                selector_std=float(np.std(scores["spiking"])),
                random_mean=float(np.mean(scores["random"])),
                random_std=float(np.std(scores["random"])),
                seeds=len(seeds),
            )
        )
        logger.info(
            f"rho={rho}: selector {rows[-1].selector_mean:.4f}, "
            f"random {rows[-1].random_mean:.4f}"
        )
    if out_dir is not None:
        write_csv(Path(out_dir) / "table3.csv", rows)
    return rows


def run_fig4_analog(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    methods: list[PruneMethod] | None = None,
) -> list[Fig4Row]:
    """
    Run each pruning method to the configured round count.

    Writes ``fig4.csv``, ``fig4.svg`` (accuracy against sparsity) and the
    per-round log of every method as ``imp_rounds_<method>.csv``.
    """
    datasets = build_datasets(cfg)
    rows = []
    series = {}
    for method in methods or FIG4_METHODS:
        data = cfg.to_dict()
        data["prune"]["method"] = PruneMethod(method).value
        run_cfg = ExperimentConfig.from_dict(data)
        snapshot = run_pruning(run_cfg, datasets=datasets)
        for record in snapshot.metrics:
            rows.append(
                Fig4Row(
                    PruneMethod(method).value,
                    record.round,
                    record.sparsity,
                    record.eval_acc,
                )
            )
        series[PruneMethod(method).value] = [
            (100.0 * r.sparsity, 100.0 * r.eval_acc) for r in snapshot.metrics
        ]
        if out_dir is not None:
            write_round_csv(
                snapshot.metrics,
                Path(out_dir) / f"imp_rounds_{PruneMethod(method).value}.csv",
            )
    if out_dir is not None:
        write_csv(Path(out_dir) / "fig4.csv", rows)
        write_line_plot(
            series,
            Path(out_dir) / "fig4.svg",
            title="Accuracy under weight pruning",
            x_label="sparsity (%)",
            y_label="accuracy (%)",
        )
    return rows
