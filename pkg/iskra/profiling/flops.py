"""
Analytic FLOPs accounting for Spikformer geometries.

Counts are derived from ModelConfig alone, layer by layer, so they are
pure integer arithmetic and independent of weights or hardware.

Convention (also written into every report):
- one multiply-accumulate counts ``flops_per_mac`` FLOPs (default 2)
- every per-timestep layer is multiplied by T
- SPS convolutions are counted at their input resolution, before pooling
- token selectors score the temporal mean, so they are counted once
- a configured selector is charged whenever it can drop tokens: rho < 1 or
  an explicit schedule. At rho = 1, and under the all-ones fraction
  schedule, it is compiled out
- the classifier runs once on the time-averaged features
- element-wise work (neurons, affines, residuals, pooling) is not counted
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

from iskra.exceptions import ConfigurationError
from iskra.model.config import ModelConfig
from iskra.selection.selector import keep_counts, keep_schedule

logger = logging.getLogger(__name__)

CALIBRATION_TOLERANCE = 0.10
SUPPORTED_FLOPS_PER_MAC = [1, 2]
CSV_HEADER = ["layer", "flops", "token_count", "alive_weights", "synaptic_ops"]


@dataclass
class LayerCost:
    """
    Cost of one layer.

    Attributes
    ----------
    name : str
        Layer identifier, e.g. ``blocks.2.mlp.fc1``.
    flops : int
        FLOPs of this layer, T included.
    token_count : int
        Tokens (or output pixels for convolutions) processed per timestep.
    alive_weights : int
        Unpruned weights of the layer (0 for weight-free products).
    synaptic_ops : float
        ``flops`` scaled by the firing rate of the layer input.
    """

    name: str
    flops: int
    token_count: int
    alive_weights: int
    synaptic_ops: float


@dataclass
class CostReport:
    """
    FLOPs of one configuration under one token keep schedule.

    Attributes
    ----------
    model : str
        Preset name of the configuration.
    schedule : list[int]
        Tokens kept after each selector application.
    per_layer : list[LayerCost]
        Layer costs in execution order.
    total_flops : int
        Sum of ``per_layer`` FLOPs.
    dense_flops : int
        FLOPs of the same geometry without token selection or sparsity.
    convention : dict
        Counting convention used.
    reference_gflops : float, optional
        Published value for this geometry, if known.
    calibration_note : str
        Deviation of the dense count from ``reference_gflops``.
    firing_rates : list[float]
        Optional per-token firing rates attached by the caller.
    wall_throughput : float, optional
        Optional measured images/second, informational.
    """

    model: str
    schedule: list[int]
    per_layer: list[LayerCost]
    total_flops: int
    dense_flops: int
    convention: dict
    reference_gflops: float | None = None
    calibration_note: str = ""
    firing_rates: list[float] = field(default_factory=list)
    wall_throughput: float | None = None

    @property
    def gflops(self) -> float:
        return self.total_flops / 1e9

    @property
    def reduction(self) -> float:
        """Return the relative saving against the dense count."""
        return 1.0 - self.total_flops / self.dense_flops

    @property
    def total_synaptic_ops(self) -> float:
        return float(sum(layer.synaptic_ops for layer in self.per_layer))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["gflops"] = self.gflops
        data["reduction"] = self.reduction
        data["total_synaptic_ops"] = self.total_synaptic_ops
        return data

    def to_json(self, path: str | Path | None = None) -> str:
        """
        Serialize the report as indented JSON.

        Parameters
        ----------
        path : str or Path, optional
            When given, the JSON is also written there.
        """
        text = json.dumps(self.to_dict(), indent=2) + "\n"
        if path is not None:
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
            logger.info(f"Wrote cost report to {path}")
        return text

    def to_csv_rows(self) -> list[list]:
        """Return a header row followed by one row per layer."""
        rows: list[list] = [list(CSV_HEADER)]
        for layer in self.per_layer:
            rows.append(
                [
                    layer.name,
                    layer.flops,
                    layer.token_count,
                    layer.alive_weights,
                    f"{layer.synaptic_ops:.1f}",
                ]
            )
        return rows


def _resolve_schedule(cfg: ModelConfig, schedule) -> list[int]:
    tokens = cfg.patch_tokens
    if schedule is None:
        return keep_schedule(cfg.rho, cfg.selector_layers, tokens)
    schedule = list(schedule)
    if len(schedule) != len(cfg.selector_layers):
        raise ConfigurationError(
            f"schedule has {len(schedule)} entries for "
            f"{len(cfg.selector_layers)} selector layers",
            field="schedule",
        )
    if any(isinstance(v, float) for v in schedule):
        # cumulative keep fractions of N
        if any(not 0 < v <= 1 for v in schedule):
            raise ConfigurationError(
                f"keep fractions must be in (0, 1], got {schedule}", field="schedule"
            )
        counts = [int(keep_counts(v, [tokens])[0]) for v in schedule]
    else:
        counts = [int(v) for v in schedule]
    previous = tokens
    for count in counts:
        if not 1 <= count <= previous:
            raise ConfigurationError(
                f"schedule {counts} must be non-increasing within 1..{tokens}",
                field="schedule",
            )
        previous = count
    return counts


def _selector_charged(cfg: ModelConfig, schedule) -> bool:
    if not cfg.selector_layers:
        return False
    if schedule is None:
        return cfg.rho < 1.0
    return not all(isinstance(v, float) and v == 1.0 for v in schedule)


def block_token_counts(cfg: ModelConfig, schedule=None) -> list[int]:
    """
    Return the tokens processed by each encoder block.

    Examples
    --------
    >>> block_token_counts(paper_cifar_config(rho=0.5))
    [64, 32, 16, 8]
    """
    counts = _resolve_schedule(cfg, schedule)
    tokens = cfg.patch_tokens
    per_block = []
    applied = 0
    for index in range(1, cfg.L + 1):
        if index in cfg.selector_layers:
            tokens = counts[applied]
            applied += 1
        per_block.append(tokens)
    return per_block


def synaptic_ops(flops: int, rate: float) -> float:
    """Scale a dense FLOPs count by the firing rate of the layer input."""
    if not 0.0 <= rate <= 1.0:
        raise ConfigurationError(f"firing rate must be in [0, 1], got {rate}", "rate")
    return flops * rate


def calibration_note(cfg: ModelConfig, dense_flops: int, flops_per_mac: int = 2) -> str:
    """
    Describe how the dense count compares with the published value.

    The reported total is stated as is. Published values count one FLOP
    per multiply-accumulate, so the window is checked on the MAC count and
    the convention gap is spelled out.

    Parameters
    ----------
    cfg : ModelConfig
        Geometry the count belongs to.
    dense_flops : int
        Dense total in the report's own convention.
    flops_per_mac : int, optional
        Convention of ``dense_flops`` (default: 2).

    Returns
    -------
    str

    Examples
    --------
    >>> note = calibration_note(paper_cifar_config(), 7_472_291_328)
    >>> note.split(", ")[-1]
    'consistent with 1 FLOP/MAC (3.736 GMACs'
    """
    if cfg.reference_gflops is None:
        return "no reference value for this geometry"
    reference = cfg.reference_gflops
    measured = dense_flops / 1e9
    macs = measured / flops_per_mac
    deviation = macs / reference - 1.0
    unit = "FLOP/MAC" if flops_per_mac == 1 else "FLOPs/MAC"
    note = (
        f"dense {measured:.3f} GFLOPs ({flops_per_mac} {unit}) vs reference "
        f"{reference:.2f} GFLOPs ({measured / reference - 1.0:+.1%})"
    )
    if abs(deviation) > CALIBRATION_TOLERANCE:
        note += f", outside the {CALIBRATION_TOLERANCE:.0%} calibration window"
        if flops_per_mac != 1:
            note += f" at 1 FLOP/MAC too ({macs:.3f} GMACs, {deviation:+.1%})"
        logger.warning(f"{cfg.name}: {note}")
    elif flops_per_mac != 1:
        note += f", consistent with 1 FLOP/MAC ({macs:.3f} GMACs, {deviation:+.1%})"
    return note


def _sps_macs(cfg: ModelConfig) -> list[tuple[str, int, int, int]]:
    """Return (name, MACs per timestep, output pixels, weights) per SPS conv."""
    layers = []
    side = cfg.image_hw
    channels = cfg.in_channels
    for i, stage in enumerate(cfg.sps_stages):
        weights = channels * stage.out_channels * stage.kernel**2
        pixels = side * side
        layers.append((f"sps.{i}", pixels * weights, pixels, weights))
        channels = stage.out_channels
        if stage.pool:
            side //= 2
    if cfg.rpe:
        weights = cfg.D * cfg.D * 9
        pixels = side * side
        layers.append(("sps.rpe", pixels * weights, pixels, weights))
    return layers


def _layer_costs(
    cfg: ModelConfig,
    counts: list[int],
    density: float,
    sparse_accounting: bool,
    flops_per_mac: int,
    rates: dict[str, float],
    hidden_width: int,
    selecting: bool,
) -> list[LayerCost]:
    layers: list[LayerCost] = []

    def add(name, macs, tokens, weights, rate, prunable=True, repeat=cfg.T):
        flops = macs * repeat * flops_per_mac
        alive = weights
        if prunable:
            alive = int(round(weights * density))
            if sparse_accounting:
                flops = int(round(flops * density))
        layers.append(
            LayerCost(name, int(flops), tokens, alive, synaptic_ops(flops, rate))
        )

    for name, macs, pixels, weights in _sps_macs(cfg):
        # the first convolution sees real-valued pixels
        add(name, macs, pixels, weights, 1.0)

    D, hidden = cfg.D, cfg.hidden
    entering = cfg.patch_tokens
    for index, n in enumerate(block_token_counts(cfg, counts), start=1):
        rate = rates.get("sps" if index == 1 else f"blocks.{index - 1}", 1.0)
        prefix = f"blocks.{index}"
        if selecting and index in cfg.selector_layers:
            scorer = D * hidden_width + hidden_width * 2
            add(
                f"{prefix}.selector",
                entering * scorer,
                entering,
                scorer,
                rate,
                prunable=False,
                repeat=1,
            )
        add(f"{prefix}.attn.qkv", 3 * n * D * D, n, 3 * D * D, rate)
        add(f"{prefix}.attn.qk", n * n * D, n, 0, rate, prunable=False)
        add(f"{prefix}.attn.av", n * n * D, n, 0, rate, prunable=False)
        add(f"{prefix}.attn.proj", n * D * D, n, D * D, rate)
        add(f"{prefix}.mlp.fc1", n * D * hidden, n, D * hidden, rate)
        add(f"{prefix}.mlp.fc2", n * hidden * D, n, hidden * D, rate)
        entering = n

    head = D * cfg.num_classes
    add("head", head, entering, head, rates.get(f"blocks.{cfg.L}", 1.0), repeat=1)
    return layers


def count_flops(
    cfg: ModelConfig,
    schedule=None,
    weight_sparsity: float = 0.0,
    sparse_accounting: bool = False,
    flops_per_mac: int = 2,
    firing_rates: dict[str, float] | None = None,
    selector_hidden: int | None = None,
) -> CostReport:
    """
    Count the FLOPs of one inference of ``cfg``.

    Parameters
    ----------
    cfg : ModelConfig
        Geometry to count.
    schedule : sequence, optional
        Tokens kept after each selector application, as integer counts or
        as cumulative float fractions of N. Defaults to the schedule of
        ``cfg.rho``.
    weight_sparsity : float, optional
        Fraction of pruned weights in the prunable layers.
    sparse_accounting : bool, optional
        Scale prunable layers by ``1 - weight_sparsity`` (default: False,
        masks execute dense).
    flops_per_mac : int, optional
        1 or 2 (default).
    firing_rates : dict[str, float], optional
        Measured rates keyed ``sps`` and ``blocks.<l>`` (output spikes of
        that stage), used for the synaptic operation column; missing
        entries count as rate 1.
    selector_hidden : int, optional
        Scorer hidden width (default: D // 2).

    Returns
    -------
    CostReport

    Raises
    ------
    ConfigurationError
        If the schedule does not fit the configuration, or a parameter is
        out of range.

    Examples
    --------
    >>> report = count_flops(paper_cifar_config())
    >>> round(report.gflops, 2)
    7.47
    >>> round(count_flops(paper_cifar_config(), flops_per_mac=1).gflops, 2)
    3.74
    """
    if flops_per_mac not in SUPPORTED_FLOPS_PER_MAC:
        raise ConfigurationError(
            f"flops_per_mac must be one of {SUPPORTED_FLOPS_PER_MAC}, "
            f"got {flops_per_mac}",
            field="flops_per_mac",
        )
    if not 0.0 <= weight_sparsity < 1.0:
        raise ConfigurationError(
            f"weight_sparsity must be in [0, 1), got {weight_sparsity}",
            field="weight_sparsity",
        )
    rates = dict(firing_rates or {})
    for key, rate in rates.items():
        if not 0.0 <= rate <= 1.0:
            raise ConfigurationError(
                f"firing rate '{key}' must be in [0, 1], got {rate}",
                field="firing_rates",
            )
    if schedule is not None:
        schedule = list(schedule)
    counts = _resolve_schedule(cfg, schedule)
    hidden_width = selector_hidden or cfg.D // 2
    selecting = _selector_charged(cfg, schedule)

    layers = _layer_costs(
        cfg,
        counts,
        1.0 - weight_sparsity,
        sparse_accounting,
        flops_per_mac,
        rates,
        hidden_width,
        selecting,
    )
    dense_layers = _layer_costs(
        cfg,
        [cfg.patch_tokens] * len(counts),
        1.0,
        False,
        flops_per_mac,
        {},
        hidden_width,
        False,
    )
    total = sum(layer.flops for layer in layers)
    dense = sum(layer.flops for layer in dense_layers)
    convention = {
        "flops_per_mac": flops_per_mac,
        "timesteps_included": True,
        "sps_full_resolution": True,
        "selector_counted_once": True,
        "head_counted_once": True,
        "sparse_accounting": sparse_accounting,
    }
    report = CostReport(
        model=cfg.name,
        schedule=counts,
        per_layer=layers,
        total_flops=total,
        dense_flops=dense,
        convention=convention,
        reference_gflops=cfg.reference_gflops,
        calibration_note=calibration_note(cfg, dense, flops_per_mac),
    )
    logger.debug(
        f"{cfg.name}: {report.gflops:.3f} GFLOPs for schedule {counts} "
        f"({report.reduction:.2%} below dense)"
    )
    return report
