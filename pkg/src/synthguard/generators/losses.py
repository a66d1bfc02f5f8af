"""Adversarial losses and the gradient penalty."""

from __future__ import annotations

import numpy as np

from synthguard.errors import ConfigError, ShapeError
from synthguard.numerics import autograd as ag
from synthguard.numerics.autograd import Tensor
from synthguard.numerics.layers import bce_with_logits


def wasserstein_losses(d_real, d_fake) -> tuple[Tensor, Tensor]:
    """Critic loss ``mean(d_fake) - mean(d_real)`` and generator loss ``-mean(d_fake)``."""
    d_real, d_fake = ag.as_tensor(d_real), ag.as_tensor(d_fake)
    if d_real.size == 0 or d_fake.size == 0:
        raise ShapeError("score batches must be non-empty")
    fake_mean = ag.mean(d_fake)
    return fake_mean - ag.mean(d_real), -fake_mean


def standard_losses(d_real, d_fake) -> tuple[Tensor, Tensor]:
    """Logit-space GAN losses; the generator loss is the non-saturating form."""
    d_real, d_fake = ag.as_tensor(d_real), ag.as_tensor(d_fake)
    if d_real.size == 0 or d_fake.size == 0:
        raise ShapeError("score batches must be non-empty")
    d_loss = bce_with_logits(d_real, np.ones(d_real.shape)) + bce_with_logits(d_fake, np.zeros(d_fake.shape))
    return d_loss, bce_with_logits(d_fake, np.ones(d_fake.shape))


def adversarial_losses(loss: str, d_real, d_fake) -> tuple[Tensor, Tensor]:
    return wasserstein_losses(d_real, d_fake) if loss == "wasserstein" else standard_losses(d_real, d_fake)


def gradient_penalty(
    discriminator,
    real,
    fake,
    lam: float,
    rng: np.random.Generator | None = None,
    *,
    u: np.ndarray | None = None,
    config=None,
) -> Tensor:
    """``lam * mean((||grad_x D(x_hat)|| - 1)^2)`` over random interpolates.

    ``x_hat = u * real + (1 - u) * fake`` with one ``u ~ U(0, 1)`` per row;
    pass ``u`` to fix the interpolation weights.  The result is differentiable
    with respect to the discriminator parameters.
    """
    if config is not None and config.lipschitz != "gradient_penalty":
        raise ConfigError(f"gradient penalty requested but lipschitz={config.lipschitz!r}")
    real = np.asarray(real.data if isinstance(real, Tensor) else real, dtype=np.float64)
    fake = np.asarray(fake.data if isinstance(fake, Tensor) else fake, dtype=np.float64)
    if real.shape != fake.shape or real.ndim != 2:
        raise ShapeError(f"real {real.shape} and fake {fake.shape} batches must be matching 2-D arrays")
    if u is None:
        if rng is None:
            raise ConfigError("gradient_penalty needs an rng or explicit interpolation weights")
        u = rng.uniform(0.0, 1.0, size=(real.shape[0], 1))
    x_hat = Tensor(u * real + (1.0 - u) * fake, requires_grad=True)
    (g,) = ag.grad(ag.tsum(discriminator(x_hat)), [x_hat], create_graph=True)
    norms = ag.sqrt(ag.tsum(g * g, axis=1) + 1e-12)
    gap = norms - 1.0
    return ag.mean(gap * gap) * lam
