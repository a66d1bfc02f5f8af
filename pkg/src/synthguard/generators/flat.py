"""Row-wise generators: the baseline GAN and the autoencoder-backed medGAN variant."""

from __future__ import annotations

import numpy as np

from synthguard import rng as rng_mod
from synthguard.dataset import NormalizationParams
from synthguard.errors import ConfigError, TrainingDiverged
from synthguard.generators.config import GanConfig
from synthguard.generators.engine import TrainLog, run_adversarial, sample_rows
from synthguard.generators.model import GeneratorModel
from synthguard.numerics import autograd as ag
from synthguard.numerics.autograd import Tensor
from synthguard.numerics.layers import MLP, Module, mse
from synthguard.numerics.optim import Adam


def build_flat(config: GanConfig, n_columns: int, rng: np.random.Generator) -> dict[str, Module]:
    modules: dict[str, Module] = {}
    if config.kind == "medgan":
        aw = list(config.autoencoder_widths)
        modules["encoder"] = MLP([n_columns, *aw, config.code_dim], rng, "tanh", "tanh", name="encoder")
        modules["decoder"] = MLP([config.code_dim, *aw[::-1], n_columns], rng, "tanh", "tanh", name="decoder")
        out_dim = config.code_dim
    else:
        out_dim = n_columns
    modules["generator"] = MLP([config.latent_dim, *config.generator_widths, out_dim], rng, "tanh", "tanh", name="generator")
    modules["discriminator"] = MLP([n_columns, *config.discriminator_widths, 1], rng, "tanh", "linear", name="discriminator")
    return modules


def _check_rows(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
        raise ConfigError(f"expected a non-empty 2-D row matrix, got shape {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise ConfigError("rows contain non-finite values")
    return rows


def _latent(model_or_config, rng: np.random.Generator, n: int) -> Tensor:
    return Tensor(rng.standard_normal((n, model_or_config.latent_dim)))


def train_simple_gan(
    rows: np.ndarray,
    config: GanConfig,
    rng: np.random.Generator,
    normalization: NormalizationParams | None = None,
) -> tuple[GeneratorModel, TrainLog]:
    """Train the baseline GAN on normalized rows."""
    if config.kind != "simple":
        raise ConfigError(f"train_simple_gan needs kind='simple', got {config.kind!r}")
    rows = _check_rows(rows)
    init_rng, loop_rng = rng_mod.split(rng, 2)
    modules = build_flat(config, rows.shape[1], init_rng)
    gen, disc = modules["generator"], modules["discriminator"]
    log = run_adversarial(
        config, disc, gen.parameters(), sample_rows(rows), lambda r, b: gen(_latent(config, r, b)), loop_rng
    )
    model = GeneratorModel("simple", config, modules, normalization, {"n_columns": rows.shape[1]})
    return model, log


def pretrain_autoencoder(
    encoder: MLP, decoder: MLP, rows: np.ndarray, config: GanConfig, rng: np.random.Generator, log: TrainLog
) -> None:
    params = ag.parameters_of(encoder, decoder)
    opt = Adam(params, lr=config.learning_rate)
    sample = sample_rows(rows)
    for epoch in range(config.epochs):
        batch = Tensor(sample(rng, config.batch_size))
        loss = mse(decoder(encoder(batch)), batch)
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingDiverged("autoencoder loss is not finite", epoch)
        opt.step(ag.backward(loss, params))
        log.pretrain_loss.append(value)


def reconstruction_error(model: GeneratorModel, rows: np.ndarray) -> float:
    with ag.no_grad():
        x = Tensor(rows)
        return mse(model.modules["decoder"](model.modules["encoder"](x)), x).item()


def train_medgan(
    rows: np.ndarray,
    config: GanConfig,
    rng: np.random.Generator,
    normalization: NormalizationParams | None = None,
) -> tuple[GeneratorModel, TrainLog]:
    """Autoencoder pretraining, then a GAN whose samples are decoded codes.

    The decoder is frozen during the adversarial phase; generator gradients
    flow through it but only the generator is updated.
    """
    if config.kind != "medgan":
        raise ConfigError(f"train_medgan needs kind='medgan', got {config.kind!r}")
    rows = _check_rows(rows)
    init_rng, ae_rng, loop_rng = rng_mod.split(rng, 3)
    modules = build_flat(config, rows.shape[1], init_rng)
    gen, dec, disc = modules["generator"], modules["decoder"], modules["discriminator"]
    log = TrainLog()
    pretrain_autoencoder(modules["encoder"], dec, rows, config, ae_rng, log)
    run_adversarial(
        config, disc, gen.parameters(), sample_rows(rows), lambda r, b: dec(gen(_latent(config, r, b))), loop_rng, log
    )
    model = GeneratorModel("medgan", config, modules, normalization, {"n_columns": rows.shape[1]})
    return model, log


def sample_flat(model: GeneratorModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Normalized-scale samples; the caller applies inverse normalization."""
    with ag.no_grad():
        out = model.modules["generator"](_latent(model.config, rng, n))
        if model.kind == "medgan":
            out = model.modules["decoder"](out)
    return out.data
