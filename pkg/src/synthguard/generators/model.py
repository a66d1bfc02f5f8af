"""Trained generator container, sampling entry point and serialization."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from synthguard.dataset import NormalizationParams
from synthguard.errors import ConfigError, StateError
from synthguard.generators.config import GanConfig
from synthguard.numerics.layers import Module

FORMAT = "synthguard-generator"
FORMAT_VERSION = 1


@dataclass
class GeneratorModel:
    """Networks of one trained GAN plus what is needed to sample from it.

    ``modules`` holds every network including the discriminator; ``meta``
    records data dimensions (``n_columns`` for flat kinds; ``attribute_names``,
    ``feature_names`` and ``max_len`` for the time-series kind).
    """

    kind: str
    config: GanConfig
    modules: dict[str, Module]
    normalization: NormalizationParams | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def latent_dim(self) -> int:
        return self.config.latent_dim

    def generate(self, n: int, rng: np.random.Generator):
        return generate_rows(self, n, rng)


def generate_rows(model: GeneratorModel, n: int, rng: np.random.Generator):
    """Sample ``n`` rows in the original (un-normalized) scale.

    Flat kinds return an ``(n, columns)`` array; the time-series kind returns
    a :class:`SequenceDataset` whose sequences total exactly ``n`` rows.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if model.kind in ("simple", "medgan"):
        from synthguard.generators.flat import sample_flat

        rows = sample_flat(model, n, rng)
        return model.normalization.invert(rows) if model.normalization is not None else rows
    if model.kind == "timeseries":
        from synthguard.generators.timeseries import sample_sequences

        return sample_sequences(model, n, rng)
    raise StateError(f"unknown generator kind {model.kind!r}")


def _rebuild(kind: str, config: GanConfig, meta: dict) -> dict[str, Module]:
    rng = np.random.default_rng(0)
    if kind in ("simple", "medgan"):
        from synthguard.generators.flat import build_flat

        return build_flat(config, meta["n_columns"], rng)
    from synthguard.generators.timeseries import build_timeseries

    return build_timeseries(config, len(meta["attribute_names"]), len(meta["feature_names"]), meta["max_len"], rng)


def save_model(model: GeneratorModel, path: str | os.PathLike) -> None:
    header = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "config": model.config.to_dict(),
        "normalization": model.normalization.to_dict() if model.normalization is not None else None,
        "meta": model.meta,
    }
    arrays = {"__header__": np.array(json.dumps(header, sort_keys=True))}
    for mod_name, module in model.modules.items():
        for p_name, arr in module.state_dict().items():
            arrays[f"{mod_name}/{p_name}"] = arr
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path: str | os.PathLike) -> GeneratorModel:
    with np.load(path, allow_pickle=False) as npz:
        header = json.loads(str(npz["__header__"]))
        if header.get("format") != FORMAT:
            raise ConfigError(f"{path}: not a generator file")
        if header.get("version") != FORMAT_VERSION:
            raise ConfigError(f"{path}: unsupported format version {header.get('version')}")
        config = GanConfig.from_dict(header["config"])
        modules = _rebuild(header["kind"], config, header["meta"])
        for mod_name, module in modules.items():
            prefix = f"{mod_name}/"
            module.load_state_dict({k[len(prefix) :]: npz[k] for k in npz.files if k.startswith(prefix)})
    norm = header["normalization"]
    return GeneratorModel(
        kind=header["kind"],
        config=config,
        modules=modules,
        normalization=NormalizationParams.from_dict(norm) if norm else None,
        meta=header["meta"],
    )

