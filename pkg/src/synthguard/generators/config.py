"""Training configuration for the GAN engines."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from synthguard.errors import ConfigError
from synthguard.privacy import DpConfig

KINDS = ("simple", "medgan", "timeseries")
LOSSES = ("standard", "wasserstein")
LIPSCHITZ = ("none", "weight_clip", "gradient_penalty")


@dataclass(frozen=True)
class GanConfig:
    """Hyperparameters of one training run.

    ``lipschitz_value`` is the clip bound for ``weight_clip`` and the penalty
    weight for ``gradient_penalty``.  ``n_critic=None`` picks 5 for the
    Wasserstein loss and 1 for the standard loss.
    """

    kind: str = "simple"
    latent_dim: int = 16
    epochs: int = 10_000
    batch_size: int = 64
    learning_rate: float = 1e-3
    generator_widths: tuple[int, ...] = (64, 64)
    discriminator_widths: tuple[int, ...] = (64, 64)
    autoencoder_widths: tuple[int, ...] = (64,)
    code_dim: int = 32
    lstm_hidden: int = 64
    loss: str = "standard"
    lipschitz: str = "none"
    lipschitz_value: float = 0.0
    steps_per_cell: int = 5
    n_critic: int | None = None
    dp: DpConfig | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.lipschitz not in LIPSCHITZ:
            raise ConfigError(f"lipschitz must be one of {LIPSCHITZ}, got {self.lipschitz!r}")
        if self.latent_dim < 1 or self.epochs < 1 or self.batch_size < 1 or self.steps_per_cell < 1:
            raise ConfigError("latent_dim, epochs, batch_size and steps_per_cell must all be >= 1")
        if self.code_dim < 1 or self.lstm_hidden < 1:
            raise ConfigError("code_dim and lstm_hidden must be >= 1")
        if any(w < 1 for w in self.generator_widths + self.discriminator_widths + self.autoencoder_widths):
            raise ConfigError("layer widths must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.lipschitz == "gradient_penalty" and self.loss != "wasserstein":
            raise ConfigError("gradient_penalty requires the wasserstein loss")
        if self.lipschitz != "none" and not self.lipschitz_value > 0:
            raise ConfigError(f"{self.lipschitz} needs a positive lipschitz_value")
        if self.n_critic is not None and self.n_critic < 1:
            raise ConfigError("n_critic must be >= 1")

    @property
    def critic_steps(self) -> int:
        if self.n_critic is not None:
            return self.n_critic
        return 5 if self.loss == "wasserstein" else 1

    def replace(self, **changes) -> GanConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("generator_widths", "discriminator_widths", "autoencoder_widths"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> GanConfig:
        d = dict(d)
        for k in ("generator_widths", "discriminator_widths", "autoencoder_widths"):
            if k in d:
                d[k] = tuple(int(v) for v in d[k])
        if d.get("dp") is not None:
            d["dp"] = DpConfig(**d["dp"])
        return cls(**d)


def wasserstein_defaults(**overrides) -> dict:
    base = dict(loss="wasserstein", lipschitz="weight_clip", lipschitz_value=0.01)
    base.update(overrides)
    return base


@dataclass(frozen=True)
class Preset:
    """A named model configuration with its display label."""

    name: str
    label: str
    config: GanConfig = field(default_factory=GanConfig)


def default_presets(epochs: int = 10_000, seed: int = 0, noise_multiplier: float = 1.0) -> dict[str, Preset]:
    """simpleGAN, medGAN, DG, DPGAN-inside-DG and PPGAN configurations."""
    common = dict(epochs=epochs, seed=seed)
    return {
        "simple": Preset("simple", "SimpleGAN", GanConfig(kind="simple", **common)),
        "medgan": Preset("medgan", "MedGAN", GanConfig(kind="medgan", **common)),
        "timeseries": Preset(
            "timeseries", "DG", GanConfig(kind="timeseries", batch_size=32, **wasserstein_defaults(**common))
        ),
        "dpgan": Preset(
            "dpgan",
            "DPGAN (DG)",
            GanConfig(
                kind="timeseries",
                batch_size=32,
                dp=DpConfig(clip_norm=1.0, noise_multiplier=noise_multiplier),
                **wasserstein_defaults(**common),
            ),
        ),
        "ppgan": Preset(
            "ppgan",
            "PPGAN",
            GanConfig(kind="simple", dp=DpConfig.ppgan(noise_multiplier), **wasserstein_defaults(**common)),
        ),
    }
