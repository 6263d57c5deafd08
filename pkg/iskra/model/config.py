"""
Model configuration and presets.

ModelConfig fixes the Spikformer geometry (timesteps, depth, width, the
Spiking Patch Splitting stages) together with the token selection
placement and the neuron constants shared by every LIF layer.

Three presets are provided:
- desk_config(): small model used for training at desk scale
- paper_cifar_config(): 384-channel CIFAR geometry, used for FLOPs accounting
- paper_dvs_config(): 256-channel 128x128 event-frame geometry, FLOPs only
"""

from dataclasses import asdict, dataclass, fields

from iskra.core.neurons import (
    DEFAULT_DECAY,
    DEFAULT_SURROGATE_WIDTH,
    DEFAULT_THRESHOLD,
    ResetMode,
    SurrogateConfig,
    SurrogateKind,
    validate_neuron_constants,
)
from iskra.exceptions import ConfigurationError


@dataclass(frozen=True)
class SpsStage:
    """
    One convolutional stage of Spiking Patch Splitting.

    Attributes
    ----------
    out_channels : int
        Output channels of the 3x3 (or ``kernel``) convolution.
    kernel : int
        Odd square kernel size, padded to keep the spatial size.
    pool : bool
        Apply 2x2 max pooling after the neuron layer.
    """

    out_channels: int
    kernel: int = 3
    pool: bool = True

    def __post_init__(self):
        if self.out_channels < 1:
            raise ConfigurationError(
                f"SPS stage needs out_channels >= 1, got {self.out_channels}",
                field="sps_stages",
            )
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigurationError(
                f"SPS kernel must be a positive odd number, got {self.kernel}",
                field="sps_stages",
            )


@dataclass
class ModelConfig:
    """
    Geometry and neuron settings of a Spikformer.

    Attributes
    ----------
    T : int
        Number of timesteps.
    L : int
        Number of encoder blocks.
    D : int
        Embedding channels (must equal the last SPS stage's channels).
    heads : int
        Attention heads; D must be divisible by heads.
    mlp_ratio : float
        MLP hidden width is ``round(mlp_ratio * D)``.
    image_hw : int
        Square input size in pixels.
    in_channels : int
        Input image channels.
    num_classes : int
        Classifier outputs.
    sps_stages : tuple[SpsStage, ...]
        Patch splitting stages, applied in order.
    rpe : bool
        Add the relative position convolution after the last stage.
    selector_layers : tuple[int, ...]
        1-based encoder blocks whose entry applies token selection.
    rho : float
        Keep ratio per selector application, 0 < rho <= 1.
    threshold, decay, reset_mode : neuron constants
    surrogate_kind, surrogate_width : surrogate gradient
    attention_scale : float
        Constant s of the softmax-free attention scale s / sqrt(D / heads).
    reference_gflops : float, optional
        Published FLOPs of this geometry, used to annotate cost reports.
    name : str
        Preset name, informational.
    """

    T: int = 4
    L: int = 4
    D: int = 96
    heads: int = 3
    mlp_ratio: float = 4.0
    image_hw: int = 32
    in_channels: int = 3
    num_classes: int = 10
    sps_stages: tuple[SpsStage, ...] = (SpsStage(48), SpsStage(96))
    rpe: bool = False
    selector_layers: tuple[int, ...] = (2, 3, 4)
    rho: float = 1.0
    threshold: float = DEFAULT_THRESHOLD
    decay: float = DEFAULT_DECAY
    reset_mode: ResetMode = ResetMode.HARD_ZERO
    surrogate_kind: SurrogateKind = SurrogateKind.SIGMOID
    surrogate_width: float = DEFAULT_SURROGATE_WIDTH
    attention_scale: float = 0.25
    reference_gflops: float | None = None
    name: str = "desk"

    def __post_init__(self):
        self.sps_stages = tuple(
            s if isinstance(s, SpsStage) else SpsStage(**s) for s in self.sps_stages
        )
        self.selector_layers = tuple(int(i) for i in self.selector_layers)
        try:
            self.reset_mode = ResetMode(self.reset_mode)
        except ValueError:
            raise ConfigurationError(
                f"Unknown reset mode: '{self.reset_mode}'", field="reset_mode"
            )
        for name in ("T", "L", "D", "heads", "image_hw", "in_channels"):
            if getattr(self, name) < 1:
                raise ConfigurationError(
                    f"{name} must be >= 1, got {getattr(self, name)}", field=name
                )
        if self.num_classes < 2:
            raise ConfigurationError(
                f"num_classes must be >= 2, got {self.num_classes}",
                field="num_classes",
            )
        if self.D % self.heads:
            raise ConfigurationError(
                f"D={self.D} is not divisible by heads={self.heads}", field="heads"
            )
        if self.mlp_ratio <= 0:
            raise ConfigurationError(
                f"mlp_ratio must be > 0, got {self.mlp_ratio}", field="mlp_ratio"
            )
        if not self.sps_stages:
            raise ConfigurationError("at least one SPS stage is required", "sps_stages")
        if self.sps_stages[-1].out_channels != self.D:
            raise ConfigurationError(
                f"last SPS stage has {self.sps_stages[-1].out_channels} channels, "
                f"expected D={self.D}",
                field="sps_stages",
            )
        if self.image_hw % self.downsampling:
            raise ConfigurationError(
                f"image_hw={self.image_hw} is not divisible by the SPS "
                f"downsampling factor {self.downsampling}",
                field="image_hw",
            )
        if not 0 < self.rho <= 1:
            raise ConfigurationError(f"rho must be in (0, 1], got {self.rho}", "rho")
        if list(self.selector_layers) != sorted(set(self.selector_layers)):
            raise ConfigurationError(
                f"selector_layers must be strictly increasing, got "
                f"{list(self.selector_layers)}",
                field="selector_layers",
            )
        if any(not 1 <= i <= self.L for i in self.selector_layers):
            raise ConfigurationError(
                f"selector_layers {list(self.selector_layers)} not within 1..{self.L}",
                field="selector_layers",
            )
        if self.attention_scale <= 0:
            raise ConfigurationError(
                f"attention_scale must be > 0, got {self.attention_scale}",
                field="attention_scale",
            )
        validate_neuron_constants(self.threshold, self.decay)
        # validates kind and width
        self.surrogate_kind = self.surrogate.kind

    @property
    def downsampling(self) -> int:
        """Return the total spatial downsampling of the SPS stages."""
        return 2 ** sum(1 for s in self.sps_stages if s.pool)

    @property
    def token_grid(self) -> tuple[int, int]:
        """Return the (rows, cols) token grid after SPS."""
        side = self.image_hw // self.downsampling
        return side, side

    @property
    def patch_tokens(self) -> int:
        """Return N, the number of tokens after SPS."""
        rows, cols = self.token_grid
        return rows * cols

    @property
    def hidden(self) -> int:
        """Return the MLP hidden width."""
        return int(round(self.mlp_ratio * self.D))

    @property
    def head_dim(self) -> int:
        """Return the per-head channel count."""
        return self.D // self.heads

    @property
    def surrogate(self) -> SurrogateConfig:
        """Return the surrogate gradient configuration."""
        return SurrogateConfig(self.surrogate_kind, self.surrogate_width)

    def to_dict(self) -> dict:
        """Return a JSON-ready dict in field order."""
        data = asdict(self)
        data["sps_stages"] = [asdict(s) for s in self.sps_stages]
        data["selector_layers"] = list(self.selector_layers)
        data["reset_mode"] = self.reset_mode.value
        data["surrogate_kind"] = SurrogateKind(self.surrogate_kind).value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        """
        Build a config from a dict, rejecting unknown keys.

        Raises
        ------
        ConfigurationError
            If ``data`` contains keys that are not ModelConfig fields.
        """
        return cls(**_known_fields(cls, data, "model"))


def _known_fields(cls, data: dict, section: str) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigurationError(
            f"Unknown keys in '{section}' section: {unknown}", field=section
        )
    return dict(data)


def desk_config(**overrides) -> ModelConfig:
    """Return the desk-scale training configuration (N = 64 tokens)."""
    return ModelConfig(**overrides)


def paper_cifar_config(**overrides) -> ModelConfig:
    """
    Return the 384-channel CIFAR geometry used for FLOPs accounting.

    Four SPS stages (48, 96, 192, 384 channels) with pooling after the
    last two, plus the relative position convolution, give N = 64
    tokens on 32x32 inputs.
    """
    settings = dict(
        T=4,
        L=4,
        D=384,
        heads=12,
        mlp_ratio=4.0,
        image_hw=32,
        in_channels=3,
        num_classes=10,
        sps_stages=(
            SpsStage(48, pool=False),
            SpsStage(96, pool=False),
            SpsStage(192),
            SpsStage(384),
        ),
        rpe=True,
        reference_gflops=3.74,
        name="paper-cifar",
    )
    settings.update(overrides)
    return ModelConfig(**settings)


def paper_dvs_config(**overrides) -> ModelConfig:
    """Return the 256-channel, 16-timestep geometry for 128x128 event frames."""
    settings = dict(
        T=16,
        L=2,
        D=256,
        heads=16,
        mlp_ratio=4.0,
        image_hw=128,
        in_channels=2,
        num_classes=10,
        sps_stages=(SpsStage(32), SpsStage(64), SpsStage(128), SpsStage(256)),
        rpe=True,
        selector_layers=(1, 2),
        reference_gflops=7.78,
        name="paper-dvs",
    )
    settings.update(overrides)
    return ModelConfig(**settings)


PRESETS = {
    "desk": desk_config,
    "paper-cifar": paper_cifar_config,
    "paper-dvs": paper_dvs_config,
}


def get_preset(name: str, **overrides) -> ModelConfig:
    """
    Return a preset configuration by name.

    Raises
    ------
    ConfigurationError
        If the preset is unknown.
    """
    if name not in PRESETS:
        raise ConfigurationError(
            f"Unknown preset: '{name}'. Available presets: {list(PRESETS)}",
            field="preset",
        )
    return PRESETS[name](**overrides)
