"""Norm-bounding utilities for gradients and weights."""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from synthguard.errors import ConfigError
from synthguard.numerics.autograd import Tensor


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))


def clip_by_global_norm(grads: Mapping[str, np.ndarray], clip_norm: float) -> dict[str, np.ndarray]:
    """Scale all gradients by ``clip_norm / norm`` when the joint L2 norm exceeds it."""
    if not clip_norm > 0:
        raise ConfigError(f"clip norm must be positive, got {clip_norm}")
    norm = global_norm(grads)
    if norm <= clip_norm:
        return dict(grads)
    scale = clip_norm / norm
    return {k: g * scale for k, g in grads.items()}


def clip_weights_elementwise(params: Mapping[str, Tensor], c: float) -> Mapping[str, Tensor]:
    """Clamp every entry of every parameter into ``[-c, c]`` (in place)."""
    if not c > 0:
        raise ConfigError(f"weight clip bound must be positive, got {c}")
    for p in params.values():
        p.data = np.clip(p.data, -c, c)
    return params
