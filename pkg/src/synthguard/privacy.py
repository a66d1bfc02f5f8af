"""Differentially private gradient sanitization and epsilon accounting.

Noise is attached to discriminator gradients only; the generator sees the
data solely through the sanitized discriminator, so its parameters inherit
the guarantee by post-processing.

Accounting uses the classical Gaussian mechanism bound per step, composed with
the advanced composition theorem.  No subsampling amplification is claimed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from synthguard.errors import ConfigError, ShapeError
from synthguard.numerics.clip import clip_by_global_norm

SCHEDULES = ("constant", "decay")


@dataclass(frozen=True)
class DpConfig:
    clip_norm: float = 1.0
    noise_multiplier: float = 1.0
    delta: float = 1e-5
    schedule: str = "constant"
    gamma: float = 1.0
    sigma_floor: float = 0.0

    def __post_init__(self):
        if not self.clip_norm > 0:
            raise ConfigError(f"clip_norm must be > 0, got {self.clip_norm}")
        if not self.noise_multiplier >= 0:
            raise ConfigError(f"noise_multiplier must be >= 0, got {self.noise_multiplier}")
        if math.isinf(self.clip_norm) and self.noise_multiplier > 0:
            raise ConfigError("an infinite clip norm only makes sense with zero noise")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not 0.0 <= self.sigma_floor <= self.noise_multiplier:
            raise ConfigError("sigma_floor must lie in [0, noise_multiplier]")

    @classmethod
    def ppgan(cls, noise_multiplier: float, clip_norm: float = 1.0, delta: float = 1e-5) -> DpConfig:
        """Decaying-noise preset: gamma 0.999, floor at a quarter of the start."""
        return cls(clip_norm, noise_multiplier, delta, "decay", 0.999, noise_multiplier / 4.0)


@dataclass(frozen=True)
class PrivacySpend:
    epsilon: float
    delta: float
    steps: int

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(self.epsilon):
            d["epsilon"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> PrivacySpend:
        return cls(float(d["epsilon"]), float(d["delta"]), int(d["steps"]))


def schedule_sigma(cfg: DpConfig, step: int) -> float:
    """Noise multiplier in force at update ``step`` (0-based)."""
    if step < 0:
        raise ConfigError(f"step must be >= 0, got {step}")
    if cfg.schedule == "constant":
        return cfg.noise_multiplier
    return max(cfg.sigma_floor, cfg.noise_multiplier * cfg.gamma**step)


def dp_sanitize(
    per_sample_grads: Sequence[Mapping[str, np.ndarray]],
    cfg: DpConfig,
    step: int,
    rng: np.random.Generator,
) -> dict[str, np.ndarray]:
    """Clip each sample's gradient to ``clip_norm``, average, add Gaussian noise.

    Noise has per-coordinate std ``sigma_t * clip_norm / batch_size``.  No
    random numbers are drawn when ``sigma_t`` is zero.
    """
    if not per_sample_grads:
        raise ShapeError("dp_sanitize needs at least one per-sample gradient")
    batch = len(per_sample_grads)
    names = list(per_sample_grads[0])
    total = {n: np.zeros_like(per_sample_grads[0][n]) for n in names}
    for g in per_sample_grads:
        clipped = clip_by_global_norm(g, cfg.clip_norm)
        for n in names:
            total[n] = total[n] + clipped[n]
    out = {n: total[n] / batch for n in names}
    sigma = schedule_sigma(cfg, step)
    if sigma > 0:
        std = sigma * cfg.clip_norm / batch
        for n in names:
            out[n] = out[n] + rng.normal(0.0, std, size=out[n].shape)
    return out


def gaussian_epsilon_per_step(sigma: float, delta: float) -> float:
    return math.sqrt(2.0 * math.log(1.25 / delta)) / sigma


def estimate_epsilon(steps: int, sigma_effective: float, delta: float) -> PrivacySpend:
    """Total (epsilon, delta) after ``steps`` sanitized updates.

    Zero noise yields ``epsilon = inf``.
    """
    if steps < 0:
        raise ConfigError(f"steps must be >= 0, got {steps}")
    if sigma_effective < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma_effective}")
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    if steps == 0:
        return PrivacySpend(0.0, delta, 0)
    if sigma_effective == 0:
        return PrivacySpend(math.inf, delta, steps)
    eps0 = gaussian_epsilon_per_step(sigma_effective, delta)
    eps = eps0 * math.sqrt(2.0 * steps * math.log(1.0 / delta)) + steps * eps0 * math.expm1(eps0)
    return PrivacySpend(eps, delta, steps)


class PrivacyAccountant:
    """Counts sanitized steps and the smallest noise multiplier used so far."""

    def __init__(self, cfg: DpConfig):
        self.cfg = cfg
        self.steps = 0
        self.min_sigma = math.inf

    def record(self, sigma: float) -> None:
        self.steps += 1
        self.min_sigma = min(self.min_sigma, sigma)

    def spend(self) -> PrivacySpend:
        sigma = 0.0 if self.steps == 0 else self.min_sigma
        return estimate_epsilon(self.steps, sigma, self.cfg.delta)
