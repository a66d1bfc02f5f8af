"""The alternating critic/generator loop shared by every GAN kind."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from synthguard import rng as rng_mod
from synthguard.errors import TrainingDiverged
from synthguard.generators.config import GanConfig
from synthguard.generators.losses import adversarial_losses, gradient_penalty
from synthguard.numerics import autograd as ag
from synthguard.numerics.autograd import Tensor
from synthguard.numerics.clip import clip_weights_elementwise
from synthguard.numerics.layers import Module, bce_with_logits
from synthguard.numerics.optim import Adam
from synthguard.privacy import PrivacyAccountant, PrivacySpend, dp_sanitize, schedule_sigma

GAN_BETA1 = 0.5
GAN_BETA2 = 0.999


@dataclass
class TrainLog:
    d_loss: list[float] = field(default_factory=list)
    g_loss: list[float] = field(default_factory=list)
    spend: list[PrivacySpend | None] = field(default_factory=list)
    pretrain_loss: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.d_loss)

    @property
    def final_spend(self) -> PrivacySpend | None:
        return self.spend[-1] if self.spend else None

    def to_dict(self) -> dict:
        return {
            "d_loss": self.d_loss,
            "g_loss": self.g_loss,
            "spend": [s.to_dict() if s else None for s in self.spend],
            "pretrain_loss": self.pretrain_loss,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TrainLog:
        return cls(
            d_loss=list(d["d_loss"]),
            g_loss=list(d["g_loss"]),
            spend=[PrivacySpend.from_dict(s) if s else None for s in d["spend"]],
            pretrain_loss=list(d.get("pretrain_loss", [])),
        )


RealSampler = Callable[[np.random.Generator, int], np.ndarray]
FakeSampler = Callable[[np.random.Generator, int], Tensor]


def _critic_loss(config: GanConfig, discriminator: Module, real: np.ndarray, fake: np.ndarray, u) -> Tensor:
    d_loss, _ = adversarial_losses(config.loss, discriminator(Tensor(real)), discriminator(Tensor(fake)))
    if config.lipschitz == "gradient_penalty":
        d_loss = d_loss + gradient_penalty(discriminator, real, fake, config.lipschitz_value, u=u)
    return d_loss


def _generator_loss(config: GanConfig, d_fake: Tensor) -> Tensor:
    if config.loss == "wasserstein":
        return -ag.mean(d_fake)
    return bce_with_logits(d_fake, np.ones(d_fake.shape))


def run_adversarial(
    config: GanConfig,
    discriminator: Module,
    generator_params: dict[str, Tensor],
    sample_real: RealSampler,
    sample_fake: FakeSampler,
    rng: np.random.Generator,
    log: TrainLog | None = None,
) -> TrainLog:
    """Train for ``config.epochs`` generator updates.

    Each epoch runs ``config.critic_steps`` critic updates followed by one
    generator update.  ``sample_real`` returns a discriminator-ready batch;
    ``sample_fake`` returns the generator's output for a fresh latent batch
    (recording the graph when gradients are enabled).  Batch sampling,
    latent noise, DP noise and penalty interpolation each use their own
    stream so that toggling DP leaves the other streams untouched.
    """
    log = log if log is not None else TrainLog()
    batch_rng, latent_rng, dp_rng, gp_rng = rng_mod.split(rng, 4)
    d_params = discriminator.parameters()
    d_opt = Adam(d_params, lr=config.learning_rate, beta1=GAN_BETA1, beta2=GAN_BETA2)
    g_opt = Adam(generator_params, lr=config.learning_rate, beta1=GAN_BETA1, beta2=GAN_BETA2)
    dp = config.dp
    accountant = PrivacyAccountant(dp) if dp is not None else None
    batch = config.batch_size
    use_gp = config.lipschitz == "gradient_penalty"

    for epoch in range(config.epochs):
        d_value = math.nan
        for _ in range(config.critic_steps):
            real = sample_real(batch_rng, batch)
            with ag.no_grad():
                fake = sample_fake(latent_rng, real.shape[0]).data
            u = gp_rng.uniform(0.0, 1.0, size=(real.shape[0], 1)) if use_gp else None
            if accountant is None:
                loss = _critic_loss(config, discriminator, real, fake, u)
                grads = ag.backward(loss, d_params)
                d_value = loss.item()
            else:
                per_sample, total = [], 0.0
                for i in range(real.shape[0]):
                    ui = None if u is None else u[i : i + 1]
                    loss_i = _critic_loss(config, discriminator, real[i : i + 1], fake[i : i + 1], ui)
                    per_sample.append(ag.backward(loss_i, d_params))
                    total += loss_i.item()
                step = accountant.steps
                grads = dp_sanitize(per_sample, dp, step, dp_rng)
                accountant.record(schedule_sigma(dp, step))
                d_value = total / real.shape[0]
            d_opt.step(grads)
            if config.lipschitz == "weight_clip":
                clip_weights_elementwise(d_params, config.lipschitz_value)

        fake = sample_fake(latent_rng, batch)
        g_loss = _generator_loss(config, discriminator(fake))
        g_value = g_loss.item()
        if not (math.isfinite(d_value) and math.isfinite(g_value)):
            raise TrainingDiverged(f"non-finite loss (d={d_value}, g={g_value})", epoch)
        g_opt.step(ag.backward(g_loss, generator_params))

        log.d_loss.append(d_value)
        log.g_loss.append(g_value)
        log.spend.append(accountant.spend() if accountant is not None else None)
    return log


def sample_rows(rows: np.ndarray) -> RealSampler:
    """Uniform minibatches (without replacement within a batch) from ``rows``."""
    n = rows.shape[0]

    def sample(rng: np.random.Generator, batch: int) -> np.ndarray:
        idx = rng.choice(n, size=batch, replace=batch > n)
        return rows[idx]

    return sample
