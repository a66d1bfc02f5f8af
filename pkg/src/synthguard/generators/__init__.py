"""GAN training engines and sampling."""

from synthguard.generators.config import GanConfig, Preset, default_presets, wasserstein_defaults
from synthguard.generators.engine import TrainLog, run_adversarial
from synthguard.generators.flat import reconstruction_error, train_medgan, train_simple_gan
from synthguard.generators.losses import gradient_penalty, standard_losses, wasserstein_losses
from synthguard.generators.model import GeneratorModel, generate_rows, load_model, save_model
from synthguard.generators.timeseries import train_timeseries_gan

__all__ = [
    "GanConfig",
    "GeneratorModel",
    "Preset",
    "TrainLog",
    "default_presets",
    "generate_rows",
    "gradient_penalty",
    "load_model",
    "reconstruction_error",
    "run_adversarial",
    "save_model",
    "standard_losses",
    "train_medgan",
    "train_simple_gan",
    "train_timeseries_gan",
    "wasserstein_defaults",
    "wasserstein_losses",
]
