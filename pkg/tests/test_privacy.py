import math

import mpmath
import numpy as np
import pytest
from scipy import stats

from synthguard.errors import ConfigError, ShapeError
from synthguard.privacy import (
    DpConfig,
    PrivacyAccountant,
    dp_sanitize,
    estimate_epsilon,
    schedule_sigma,
)


def _epsilon_mpmath(steps, sigma, delta):
    """Independent high-precision evaluation of the composition bound."""
    mpmath.mp.dps = 40
    e0 = mpmath.sqrt(2 * mpmath.log(mpmath.mpf(1.25) / delta)) / sigma
    return float(e0 * mpmath.sqrt(2 * steps * mpmath.log(1 / mpmath.mpf(delta))) + steps * e0 * (mpmath.e**e0 - 1))


def test_sanitize_degenerate_is_plain_mean(rng):
    grads = [{"w": rng.normal(size=(2, 2)) * 0.1, "b": rng.normal(size=2) * 0.1} for _ in range(4)]
    out = dp_sanitize(grads, DpConfig(clip_norm=100.0, noise_multiplier=0.0), 0, rng)
    for k in ("w", "b"):
        np.testing.assert_allclose(out[k], np.mean([g[k] for g in grads], axis=0), rtol=1e-15)


def test_sanitize_infinite_clip_zero_noise_exact(rng):
    grads = [{"w": rng.normal(size=3) * 1e3} for _ in range(5)]
    out = dp_sanitize(grads, DpConfig(clip_norm=math.inf, noise_multiplier=0.0), 0, rng)
    expected = (grads[0]["w"] + grads[1]["w"] + grads[2]["w"] + grads[3]["w"] + grads[4]["w"]) / 5
    np.testing.assert_array_equal(out["w"], expected)


def test_sanitize_single_sample_clipped():
    g = {"w": np.array([1.2, 1.6])}  # norm 2 = 2C
    out = dp_sanitize([g], DpConfig(clip_norm=1.0, noise_multiplier=0.0), 0, np.random.default_rng(0))
    np.testing.assert_allclose(out["w"], [0.6, 0.8], rtol=1e-15)


def test_sanitize_empty_batch():
    with pytest.raises(ShapeError):
        dp_sanitize([], DpConfig(), 0, np.random.default_rng(0))


def test_sanitize_noise_std():
    rng = np.random.default_rng(42)
    cfg = DpConfig(clip_norm=1.0, noise_multiplier=1.0)
    draws = np.array([dp_sanitize([{"w": np.zeros(1)}], cfg, 0, rng)["w"][0] for _ in range(100_000)])
    assert 0.99 <= draws.std() <= 1.01


def test_sanitize_noise_is_gaussian_ks():
    rng = np.random.default_rng(7)
    cfg = DpConfig(clip_norm=0.5, noise_multiplier=1.5)
    batch = [{"w": np.array([0.3, -0.2])}, {"w": np.array([2.0, 1.0])}]
    clean = dp_sanitize(batch, DpConfig(clip_norm=0.5, noise_multiplier=0.0), 0, rng)["w"]
    noise = np.array([dp_sanitize(batch, cfg, 0, rng)["w"] - clean for _ in range(5000)]).reshape(-1)
    std = 1.5 * 0.5 / 2
    res = stats.kstest(noise, "norm", args=(0.0, std))
    critical = 1.628 / math.sqrt(noise.size)
    assert res.statistic < critical


def test_config_validation():
    with pytest.raises(ConfigError):
        DpConfig(clip_norm=0.0)
    with pytest.raises(ConfigError):
        DpConfig(noise_multiplier=-1.0)
    with pytest.raises(ConfigError):
        DpConfig(delta=1.0)
    with pytest.raises(ConfigError):
        DpConfig(schedule="cosine")
    with pytest.raises(ConfigError):
        DpConfig(noise_multiplier=1.0, schedule="decay", gamma=0.5, sigma_floor=2.0)
    with pytest.raises(ConfigError):
        DpConfig(clip_norm=math.inf, noise_multiplier=1.0)


def test_schedule_examples():
    const = DpConfig(noise_multiplier=1.3)
    assert all(schedule_sigma(const, t) == 1.3 for t in (0, 5, 1000))
    decay = DpConfig(noise_multiplier=1.0, schedule="decay", gamma=0.5, sigma_floor=0.0)
    assert schedule_sigma(decay, 2) == pytest.approx(0.25, abs=0)
    floored = DpConfig(noise_multiplier=1.0, schedule="decay", gamma=0.5, sigma_floor=0.1)
    values = [schedule_sigma(floored, t) for t in range(60)]
    assert min(values) >= 0.1
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_ppgan_preset():
    cfg = DpConfig.ppgan(2.0)
    assert cfg.schedule == "decay" and cfg.gamma == 0.999 and cfg.sigma_floor == 0.5


def test_epsilon_zero_steps():
    assert estimate_epsilon(0, 1.0, 1e-5).epsilon == 0.0


def test_epsilon_zero_noise_is_infinite():
    assert math.isinf(estimate_epsilon(10, 0.0, 1e-5).epsilon)


def test_epsilon_worked_value():
    spend = estimate_epsilon(1, 2.0, 1e-5)
    eps0 = math.sqrt(2 * math.log(1.25e5)) / 2
    assert eps0 == pytest.approx(2.423, abs=1e-3)  # exact value 2.42240
    assert spend.epsilon == pytest.approx(_epsilon_mpmath(1, 2, 1e-5), abs=1e-6)


def test_epsilon_decreases_when_sigma_doubles():
    values = [estimate_epsilon(100, s, 1e-5).epsilon for s in (0.5, 1, 2, 4, 8)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_accountant_tracks_min_sigma():
    acc = PrivacyAccountant(DpConfig(noise_multiplier=2.0))
    assert acc.spend().epsilon == 0.0
    for s in (2.0, 1.5, 1.8):
        acc.record(s)
    assert acc.spend() == estimate_epsilon(3, 1.5, 1e-5)
