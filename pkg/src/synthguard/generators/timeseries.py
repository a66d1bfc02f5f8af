"""Sequence generator in the DoppelGANger mould.

An MLP emits each sequence's static attributes.  An LSTM conditioned on those
attributes is unrolled ``ceil(max_len / S)`` times and every cell emits ``S``
time steps of ``features + label + continuation flag``.  A sequence ends at
the first step whose flag is negative, or at ``max_len``.

The critic sees ``attributes ++ flattened padded steps``, where each step
carries an extra 0/1 mask channel, so its input width does not depend on
the true sequence length.
"""

from __future__ import annotations

import math

import numpy as np

from synthguard import rng as rng_mod
from synthguard.dataset import EntitySequence, SequenceDataset
from synthguard.errors import ConfigError
from synthguard.generators.config import GanConfig
from synthguard.generators.engine import TrainLog, run_adversarial
from synthguard.generators.model import GeneratorModel
from synthguard.numerics import autograd as ag
from synthguard.numerics.autograd import Tensor
from synthguard.numerics.layers import MLP, Dense, LSTMCell, Module

SAMPLE_BATCH = 256


def cell_invocations(max_len: int, steps_per_cell: int) -> int:
    return math.ceil(max_len / steps_per_cell)


def build_timeseries(
    config: GanConfig, n_attributes: int, n_features: int, max_len: int, rng: np.random.Generator
) -> dict[str, Module]:
    channels = n_features + 2
    modules: dict[str, Module] = {}
    if n_attributes:
        modules["attribute_generator"] = MLP(
            [config.latent_dim, *config.generator_widths, n_attributes], rng, "tanh", "tanh", name="attribute_generator"
        )
    modules["feature_lstm"] = LSTMCell(n_attributes + config.latent_dim, config.lstm_hidden, rng, name="feature_lstm")
    modules["feature_head"] = Dense(config.lstm_hidden, config.steps_per_cell * channels, rng, name="feature_head")
    modules["discriminator"] = MLP(
        [n_attributes + max_len * (channels + 1), *config.discriminator_widths, 1], rng, "tanh", "linear", name="discriminator"
    )
    return modules


def generator_parameters(modules: dict[str, Module]) -> dict[str, Tensor]:
    return ag.parameters_of(*(m for k, m in modules.items() if k != "discriminator"))


def unroll(
    modules: dict[str, Module], config: GanConfig, n_attributes: int, n_features: int, max_len: int,
    rng: np.random.Generator, batch: int,
) -> tuple[Tensor | None, Tensor]:
    """Run the generator; returns attributes ``(B, A)`` and steps ``(B, L, F + 2)``."""
    channels = n_features + 2
    n_cells = cell_invocations(max_len, config.steps_per_cell)
    z_attr = rng.standard_normal((batch, config.latent_dim))
    z_feat = rng.standard_normal((n_cells, batch, config.latent_dim))
    attrs = modules["attribute_generator"](Tensor(z_attr)) if n_attributes else None
    lstm: LSTMCell = modules["feature_lstm"]
    head: Dense = modules["feature_head"]
    h, c = lstm.zero_state(batch)
    outputs = []
    for k in range(n_cells):
        inp = Tensor(z_feat[k]) if attrs is None else ag.concat([attrs, Tensor(z_feat[k])], axis=1)
        h, c = lstm(inp, h, c)
        outputs.append(ag.tanh(head(h)))
    steps = ag.concat(outputs, axis=1).reshape(batch, n_cells * config.steps_per_cell, channels)
    if n_cells * config.steps_per_cell != max_len:
        steps = steps[:, :max_len, :]
    return attrs, steps


def lengths_from_flags(flags: np.ndarray) -> np.ndarray:
    """Length = index of the first negative flag + 1, or the full width."""
    neg = flags < 0
    first = np.where(neg.any(axis=1), neg.argmax(axis=1), flags.shape[1] - 1)
    return first + 1


def critic_input(attrs: Tensor | None, steps: Tensor) -> Tensor:
    batch, max_len, _ = steps.shape
    lengths = lengths_from_flags(steps.data[:, :, -1])
    mask = (np.arange(max_len)[None, :] < lengths[:, None]).astype(np.float64)[:, :, None]
    masked = ag.concat([steps * mask, Tensor(mask)], axis=2).reshape(batch, -1)
    return masked if attrs is None else ag.concat([attrs, masked], axis=1)


def encode_real(ds: SequenceDataset) -> np.ndarray:
    """Critic-ready rows for every real (normalized) sequence."""
    L, F = ds.max_len, ds.n_features
    out = np.zeros((len(ds), ds.n_attributes + L * (F + 3)))
    for i, s in enumerate(ds.sequences):
        T = s.length
        steps = np.zeros((L, F + 3))
        steps[:T, :F] = s.features
        steps[:T, F] = s.labels
        steps[:T, F + 1] = 1.0
        steps[T - 1, F + 1] = -1.0
        steps[:T, F + 2] = 1.0
        out[i, : ds.n_attributes] = s.attributes
        out[i, ds.n_attributes :] = steps.reshape(-1)
    return out


def train_timeseries_gan(ds: SequenceDataset, config: GanConfig, rng: np.random.Generator) -> tuple[GeneratorModel, TrainLog]:
    """Train on a normalized :class:`SequenceDataset`."""
    if config.kind != "timeseries":
        raise ConfigError(f"train_timeseries_gan needs kind='timeseries', got {config.kind!r}")
    if len(ds) == 0:
        raise ConfigError("cannot train on an empty dataset")
    if ds.lengths.max() > ds.max_len:
        raise ConfigError("dataset holds sequences longer than its max_len")
    A, F, L = ds.n_attributes, ds.n_features, ds.max_len
    init_rng, loop_rng = rng_mod.split(rng, 2)
    modules = build_timeseries(config, A, F, L, init_rng)
    real = encode_real(ds)
    n = real.shape[0]

    def sample_real(r: np.random.Generator, batch: int) -> np.ndarray:
        return real[r.choice(n, size=batch, replace=batch > n)]

    def sample_fake(r: np.random.Generator, batch: int) -> Tensor:
        return critic_input(*unroll(modules, config, A, F, L, r, batch))

    log = run_adversarial(config, modules["discriminator"], generator_parameters(modules), sample_real, sample_fake, loop_rng)
    meta = {"attribute_names": list(ds.attribute_names), "feature_names": list(ds.feature_names), "max_len": L}
    return GeneratorModel("timeseries", config, modules, ds.normalization, meta), log


def sample_sequences(model: GeneratorModel, n: int, rng: np.random.Generator) -> SequenceDataset:
    """Sequences totalling exactly ``n`` rows, in the original scale."""
    attr_names = tuple(model.meta["attribute_names"])
    feat_names = tuple(model.meta["feature_names"])
    A, F, L = len(attr_names), len(feat_names), int(model.meta["max_len"])
    seqs: list[EntitySequence] = []
    total = 0
    while total < n:
        with ag.no_grad():
            attrs, steps = unroll(model.modules, model.config, A, F, L, rng, SAMPLE_BATCH)
        lengths = lengths_from_flags(steps.data[:, :, -1])
        for b in range(SAMPLE_BATCH):
            T = int(min(lengths[b], n - total))
            a = attrs.data[b] if attrs is not None else np.zeros(0)
            rows = np.column_stack([np.broadcast_to(a, (T, A)), steps.data[b, :T, : F + 1]])
            if model.normalization is not None:
                rows = model.normalization.invert(rows)
            seqs.append(EntitySequence(rows[0, :A].copy(), rows[:, A : A + F].copy(), rows[:, A + F].copy()))
            total += T
            if total >= n:
                break
    return SequenceDataset(tuple(seqs), max_len=L, feature_names=feat_names, attribute_names=attr_names)
