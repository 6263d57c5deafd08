"""
Command-line interface for iskra.

This module provides CLI commands for training and evaluating the sparse
spiking transformer, running lottery ticket searches, profiling inference
cost, exporting firing-rate maps and running the experiment sweeps.
"""

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from iskra import __version__
from iskra.core.autograd import no_grad
from iskra.exceptions import IskraError, UsageError
from iskra.experiments.config import ExperimentConfig, load_config, save_config
from iskra.experiments.runner import (
    build_datasets,
    load_model,
    run_pruning,
    run_training,
    save_model,
    write_train_log,
)
from iskra.experiments.tables import (
    run_fig4_analog,
    run_table1_analog,
    run_table2_analog,
    run_table3_analog,
)
from iskra.model.config import PRESETS, get_preset
from iskra.profiling.flops import SUPPORTED_FLOPS_PER_MAC, count_flops
from iskra.profiling.maps import export_attention_map, firing_rate_map
from iskra.pruning.lottery import write_round_csv
from iskra.selection.selector import export_decision_trace
from iskra.storage.checkpoint import CheckpointStorage
from iskra.training.trainer import EpochProgress, evaluate

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
TABLE1_RHOS = "1.0,0.9,0.8,0.7,0.6,0.5"
TABLE2_RHOS = "1.0,0.7"
TABLE3_RHOS = "0.8,0.7,0.6"


def _float_list(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list: {value}")


def _int_list(value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list: {value}")


def create_parser() -> argparse.ArgumentParser:
    """
    Create and configure the argument parser.

    Returns
    -------
    argparse.ArgumentParser
        Configured argument parser
    """
    parser = argparse.ArgumentParser(
        prog="iskra",
        description="Sparse spiking vision transformer toolkit",
        epilog="Example: iskra --seed 1 --out runs/seed1 train",
    )

    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    parser.add_argument(
        "--config",
        "-c",
        metavar="PATH",
        help="Experiment configuration file (JSON, default: built-in desk run)",
    )
    parser.add_argument(
        "--seed",
        type=int,
        help="Override the configured seed",
    )
    parser.add_argument(
        "--out",
        "-o",
        metavar="DIR",
        default="./runs",
        help="Output directory (default: ./runs)",
    )
    parser.add_argument(
        "--threads",
        type=int,
        help="Override the configured evaluation thread count",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        help="Log debug detail",
    )
    verbosity.add_argument(
        "--quiet",
        "-q",
        action="store_true",
        help="Only log warnings and suppress progress output",
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # Train command
    train_parser = subparsers.add_parser(
        "train",
        help="Train a model and store its weights",
        description="Train the configured model on the configured dataset",
    )
    train_parser.add_argument(
        "--epochs",
        type=int,
        help="Override the configured number of epochs",
    )
    train_parser.add_argument(
        "--rho",
        type=float,
        help="Override the configured keep ratio",
    )

    # Prune command
    subparsers.add_parser(
        "prune",
        help="Run the configured lottery ticket search",
        description="Iteratively prune, rewind and retrain the configured model",
    )

    # Eval command
    eval_parser = subparsers.add_parser(
        "eval",
        help="Evaluate stored weights on the test split",
        description="Load the model checkpoint from --out and report accuracy",
    )
    eval_parser.add_argument(
        "--execution",
        choices=["mask", "gather"],
        default="mask",
        help="Token execution mode (default: mask)",
    )
    eval_parser.add_argument(
        "--trace",
        action="store_true",
        help="Also write the keep decisions of the first test image",
    )

    # Profile command
    profile_parser = subparsers.add_parser(
        "profile",
        help="Count inference FLOPs analytically",
        description="Write a per-layer FLOPs report without running the model",
    )
    profile_parser.add_argument(
        "--preset",
        choices=list(PRESETS),
        help="Model geometry preset (default: the configured model)",
    )
    profile_parser.add_argument(
        "--rho",
        type=float,
        help="Keep ratio to count with",
    )
    profile_parser.add_argument(
        "--flops-per-mac",
        type=int,
        choices=SUPPORTED_FLOPS_PER_MAC,
        default=2,
        help="FLOPs counted per multiply-accumulate (default: 2)",
    )
    profile_parser.add_argument(
        "--weight-sparsity",
        type=float,
        default=0.0,
        help="Fraction of pruned weights for sparse accounting (default: 0)",
    )

    # Export maps command
    maps_parser = subparsers.add_parser(
        "export-maps",
        help="Export firing-rate maps of stored weights",
        description="Write per-token firing-rate maps as PPM and CSV",
    )
    maps_parser.add_argument(
        "--images",
        type=int,
        default=4,
        help="Number of test images to export (default: 4)",
    )
    maps_parser.add_argument(
        "--layer",
        type=int,
        default=-1,
        help="Recorded layer: 0 is the patch splitter, -1 the last block",
    )

    # Experiment sweeps
    table1_parser = subparsers.add_parser(
        "table1",
        help="Accuracy, throughput and FLOPs per keep ratio",
    )
    table1_parser.add_argument(
        "--rho",
        type=_float_list,
        default=_float_list(TABLE1_RHOS),
        help=f"Keep ratios (default: {TABLE1_RHOS})",
    )
    table2_parser = subparsers.add_parser(
        "table2",
        help="Lottery tickets with and without token dropping",
    )
    table2_parser.add_argument(
        "--rho",
        type=_float_list,
        default=_float_list(TABLE2_RHOS),
        help=f"Keep ratios (default: {TABLE2_RHOS})",
    )
    table3_parser = subparsers.add_parser(
        "table3",
        help="Learned selector against random selection",
    )
    table3_parser.add_argument(
        "--rho",
        type=_float_list,
        default=_float_list(TABLE3_RHOS),
        help=f"Keep ratios (default: {TABLE3_RHOS})",
    )
    table3_parser.add_argument(
        "--seeds",
        type=_int_list,
        default=[0, 1, 2, 3, 4],
        help="Seeds (default: 0,1,2,3,4)",
    )
    subparsers.add_parser(
        "fig4",
        help="Compare rewinding, early-bird and random re-initialisation",
    )

    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Set up root logging for a CLI run."""
    level = logging.INFO
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Load the configuration and apply command-line overrides.

    Raises
    ------
    ConfigurationError
        If the file or an override is invalid.
    """
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    data = cfg.to_dict()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.threads is not None:
        data["threads"] = args.threads
    if getattr(args, "epochs", None) is not None:
        data["optimizer"]["epochs"] = args.epochs
    cfg = ExperimentConfig.from_dict(data)
    if getattr(args, "rho", None) is not None and args.command == "train":
        cfg = cfg.with_rho(args.rho)
    return cfg


def create_progress_callback(quiet: bool = False):
    """
    Create a progress callback for training runs.

    Parameters
    ----------
    quiet : bool
        If True, suppress output

    Returns
    -------
    callable
        Progress callback function
    """
    if quiet:
        return None

    def on_epoch(progress: EpochProgress) -> None:
        acc = "-" if progress.eval_acc is None else f"{progress.eval_acc:.4f}"
        print(
            f"[{progress.progress_percent:5.1f}%] epoch "
            f"{progress.epoch + 1}/{progress.epochs} "
            f"loss {progress.train_loss:.4f} acc {acc}",
            flush=True,
        )

    return on_epoch


def _error(e: Exception) -> int:
    print(f"Error: {e}", file=sys.stderr)
    return 1


def cmd_train(args: argparse.Namespace) -> int:
    """
    Execute the train command.

    Writes ``config.json``, ``train_log.csv`` and the ``model`` checkpoint
    under ``--out``.

    Returns
    -------
    int
        Exit code (0 for success, 1 for error)
    """
    out = Path(args.out)
    try:
        cfg = resolve_config(args)
        save_config(cfg, out / "config.json")
        result = run_training(cfg, on_epoch=create_progress_callback(args.quiet))
        write_train_log(result.history, out / "train_log.csv")
        save_model(result.model, CheckpointStorage(out))
    except IskraError as e:
        return _error(e)

    if not args.quiet and result.history:
        last = result.history[-1]
        acc = "-" if last.eval_acc is None else f"{last.eval_acc:.4f}"
        print(f"Final loss {last.train_loss:.4f}, accuracy {acc}")
    return 0


def cmd_prune(args: argparse.Namespace) -> int:
    """Execute the prune command; writes ``imp_rounds.csv`` and the ticket."""
    out = Path(args.out)
    try:
        cfg = resolve_config(args)
        save_config(cfg, out / "config.json")
        snapshot = run_pruning(cfg, storage=CheckpointStorage(out))
        write_round_csv(snapshot.metrics, out / "imp_rounds.csv")
    except IskraError as e:
        return _error(e)

    if not args.quiet:
        for record in snapshot.metrics:
            print(
                f"round {record.round}: sparsity {record.sparsity:.2%} "
                f"accuracy {record.eval_acc:.4f}"
            )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    """Execute the eval command."""
    out = Path(args.out)
    try:
        cfg = resolve_config(args)
        model = load_model(cfg, CheckpointStorage(out))
        _, test_set = build_datasets(cfg)
        accuracy = evaluate(
            model, test_set, cfg.threads, execution=args.execution, seed=cfg.seed
        )
        if args.trace:
            model.eval()
            with no_grad():
                result = model.forward(
                    test_set.images[:1],
                    mode="eval",
                    rng=np.random.default_rng(cfg.seed),
                )
            export_decision_trace(
                result.decision,
                result.scores,
                result.selector_layers,
                out / "decisions.csv",
            )
    except IskraError as e:
        return _error(e)

    print(f"Accuracy: {accuracy:.4f} on {len(test_set)} images")
    return 0


def cmd_profile(args: argparse.Namespace) -> int:
    """Execute the profile command; writes ``cost_report.json``."""
    out = Path(args.out)
    try:
        overrides = {} if args.rho is None else {"rho": args.rho}
        if args.preset:
            model_cfg = get_preset(args.preset, **overrides)
        else:
            model_cfg = replace(resolve_config(args).model, **overrides)
        report = count_flops(
            model_cfg,
            weight_sparsity=args.weight_sparsity,
            sparse_accounting=args.weight_sparsity > 0,
            flops_per_mac=args.flops_per_mac,
        )
        out.mkdir(parents=True, exist_ok=True)
        report.to_json(out / "cost_report.json")
    except IskraError as e:
        return _error(e)

    if not args.quiet:
        for layer in report.per_layer:
            print(f"{layer.name:<24} {layer.flops:>16,} {layer.token_count:>6}")
        print()
        print(
            f"Total {report.gflops:.3f} GFLOPs "
            f"({report.reduction:.1%} below dense), {report.convention}"
        )
        if report.calibration_note:
            print(report.calibration_note)
    return 0


def cmd_export_maps(args: argparse.Namespace) -> int:
    """Execute the export-maps command."""
    out = Path(args.out)
    try:
        cfg = resolve_config(args)
        model = load_model(cfg, CheckpointStorage(out))
        _, test_set = build_datasets(cfg)
        images = test_set.images[: max(args.images, 1)]
        model.eval()
        with no_grad():
            result = model.forward(
                images,
                mode="eval",
                rng=np.random.default_rng(cfg.seed),
                record_spikes=True,
            )
        recorded = len(result.spikes_by_layer)
        if not -recorded <= args.layer < recorded:
            raise UsageError(
                f"layer {args.layer} not recorded; {recorded} layers available"
            )
        spikes = result.spikes_by_layer[args.layer]
        written = []
        for i in range(len(images)):
            rates = firing_rate_map(spikes, image=i)
            written.extend(
                export_attention_map(
                    rates, cfg.model.token_grid, out / f"attention_{i}"
                )
            )
        export_decision_trace(
            result.decision,
            result.scores,
            result.selector_layers,
            out / "decisions.csv",
        )
    except IskraError as e:
        return _error(e)

    if not args.quiet:
        print(f"Wrote {len(written)} files to {out}")
    return 0


def cmd_table1(args: argparse.Namespace) -> int:
    """Execute the table1 sweep; writes ``table1.csv``."""
    try:
        rows = run_table1_analog(resolve_config(args), args.rho, args.out)
    except IskraError as e:
        return _error(e)
    if not args.quiet:
        _print_rows(rows)
    return 0


def cmd_table2(args: argparse.Namespace) -> int:
    """Execute the table2 sweep; writes ``table2.csv`` and ``table2.svg``."""
    try:
        rows = run_table2_analog(resolve_config(args), args.rho, args.out)
    except IskraError as e:
        return _error(e)
    if not args.quiet:
        _print_rows(rows)
    return 0


def cmd_table3(args: argparse.Namespace) -> int:
    """Execute the table3 sweep; writes ``table3.csv``."""
    try:
        rows = run_table3_analog(resolve_config(args), args.rho, args.seeds, args.out)
    except IskraError as e:
        return _error(e)
    if not args.quiet:
        _print_rows(rows)
    return 0


def cmd_fig4(args: argparse.Namespace) -> int:
    """Execute the fig4 sweep; writes ``fig4.csv`` and ``fig4.svg``."""
    try:
        rows = run_fig4_analog(resolve_config(args), args.out)
    except IskraError as e:
        return _error(e)
    if not args.quiet:
        _print_rows(rows)
    return 0


def _print_rows(rows: list) -> None:
    if not rows:
        return
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(list(vars(rows[0])))
    for row in rows:
        writer.writerow(
            [f"{v:.4f}" if isinstance(v, float) else v for v in vars(row).values()]
        )


COMMANDS = {
    "train": cmd_train,
    "prune": cmd_prune,
    "eval": cmd_eval,
    "profile": cmd_profile,
    "export-maps": cmd_export_maps,
    "table1": cmd_table1,
    "table2": cmd_table2,
    "table3": cmd_table3,
    "fig4": cmd_fig4,
}


def main(args: Optional[list[str]] = None) -> int:
    """
    Main entry point for the CLI.

    Parameters
    ----------
    args : list[str], optional
        Command-line arguments (defaults to sys.argv[1:])

    Returns
    -------
    int
        Exit code (0 for success, non-zero for error)
    """
    parser = create_parser()
    parsed_args = parser.parse_args(args)

    if parsed_args.command is None:
        parser.print_help()
        return 0

    configure_logging(parsed_args.verbose, parsed_args.quiet)

    handler = COMMANDS.get(parsed_args.command)
    if handler is None:
        print(f"Unknown command: {parsed_args.command}", file=sys.stderr)
        return 1
    return handler(parsed_args)


if __name__ == "__main__":
    sys.exit(main())
