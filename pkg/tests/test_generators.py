import math

import numpy as np
import pytest

from oracles import central_difference, rel_error
from synthguard import dataset as D
from synthguard.errors import ConfigError, ShapeError
from synthguard.generators import (
    GanConfig,
    default_presets,
    generate_rows,
    gradient_penalty,
    load_model,
    reconstruction_error,
    save_model,
    train_medgan,
    train_simple_gan,
    train_timeseries_gan,
    wasserstein_defaults,
    wasserstein_losses,
)
from synthguard.generators import timeseries as ts
from synthguard.numerics import autograd as ag
from synthguard.numerics.autograd import Tensor
from synthguard.numerics.layers import MLP, Dense
from synthguard.privacy import DpConfig

SMALL = dict(latent_dim=4, batch_size=8, generator_widths=(8,), discriminator_widths=(8,), lstm_hidden=8)


@pytest.fixture(scope="module")
def cohort():
    ds = D.build_sequences(D.load_bundled_cohort(), D.BUNDLED_MAX_LEN)
    return D.normalize(ds)[0]


@pytest.fixture
def tiny_seqs():
    rng = np.random.default_rng(3)
    seqs = []
    for T in (3, 5, 7, 12):
        seqs.append(D.EntitySequence(rng.uniform(-1, 1, 1), rng.uniform(-1, 1, (T, 2)), rng.uniform(-1, 1, T)))
    norm = D.NormalizationParams(np.zeros(4), np.array([3.0, 10.0, 20.0, 30.0]))
    return D.SequenceDataset(tuple(seqs), 12, ("a", "b"), ("sev",), norm)


# --- losses -----------------------------------------------------------------


def test_wasserstein_symmetric():
    x = np.array([0.3, -1.2, 2.0])
    d, g = wasserstein_losses(x, x)
    assert d.item() == 0.0
    assert g.item() == -np.mean(x)


def test_wasserstein_example():
    d, g = wasserstein_losses([1.0, 1.0], [0.0, 0.0])
    assert d.item() == -1.0
    assert g.item() == 0.0


def test_wasserstein_random_against_direct_mean(rng):
    real, fake = rng.normal(size=17), rng.normal(size=23)
    d, g = wasserstein_losses(real, fake)
    assert d.item() == pytest.approx(sum(fake) / 23 - sum(real) / 17, abs=1e-12)
    assert g.item() == pytest.approx(-sum(fake) / 23, abs=1e-12)


def test_wasserstein_empty():
    with pytest.raises(ShapeError):
        wasserstein_losses(np.zeros(0), np.ones(3))


def _linear_critic(w):
    layer = Dense(w.size, 1, np.random.default_rng(0))
    layer.weight.data = w.reshape(-1, 1).astype(float)
    return layer


@pytest.mark.parametrize("norm,expected", [(1.0, 0.0), (2.0, 10.0)])
def test_gradient_penalty_linear(rng, norm, expected):
    w = rng.normal(size=5)
    critic = _linear_critic(norm * w / np.linalg.norm(w))
    real, fake = rng.normal(size=(6, 5)), rng.normal(size=(6, 5))
    gp = gradient_penalty(critic, real, fake, 10.0, rng)
    assert gp.item() == pytest.approx(expected, abs=1e-9)


def test_gradient_penalty_mlp_matches_finite_difference(rng):
    critic = MLP([3, 6, 1], rng)
    real, fake = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    u = rng.uniform(size=(4, 1))
    gp = gradient_penalty(critic, real, fake, 1.0, u=u).item()
    x_hat = u * real + (1 - u) * fake
    norms = []
    for row in x_hat:
        r = row.copy()
        (g,) = central_difference(lambda: critic(Tensor(r[None, :])).item(), [r])
        norms.append(np.linalg.norm(g))
    oracle = np.mean((np.array(norms) - 1.0) ** 2)
    assert abs(gp - oracle) / abs(oracle) < 1e-3


def test_gradient_penalty_rejects_wrong_mechanism(rng):
    critic = MLP([2, 3, 1], rng)
    cfg = GanConfig(**wasserstein_defaults())
    with pytest.raises(ConfigError):
        gradient_penalty(critic, np.zeros((2, 2)), np.ones((2, 2)), 10.0, rng, config=cfg)


def test_gradient_penalty_requires_wasserstein():
    with pytest.raises(ConfigError):
        GanConfig(lipschitz="gradient_penalty", lipschitz_value=10.0)


def test_gradient_penalty_training_runs(rng):
    rows = rng.uniform(-1, 1, (20, 2))
    cfg = GanConfig(epochs=3, loss="wasserstein", lipschitz="gradient_penalty", lipschitz_value=10.0, **SMALL)
    _, log = train_simple_gan(rows, cfg, np.random.default_rng(0))
    assert len(log) == 3 and all(math.isfinite(v) for v in log.d_loss)


# --- simple GAN -------------------------------------------------------------


def test_simple_one_epoch_log(rng):
    _, log = train_simple_gan(rng.uniform(-1, 1, (10, 3)), GanConfig(epochs=1, **SMALL), np.random.default_rng(0))
    assert len(log) == 1 and len(log.g_loss) == 1


def test_simple_deterministic(rng):
    rows = rng.uniform(-1, 1, (30, 3))
    cfg = GanConfig(epochs=5, **SMALL)
    a, _ = train_simple_gan(rows, cfg, np.random.default_rng(9))
    b, _ = train_simple_gan(rows, cfg, np.random.default_rng(9))
    for name in a.modules:
        sa, sb = a.modules[name].state_dict(), b.modules[name].state_dict()
        assert all(np.array_equal(sa[k], sb[k]) for k in sa)


def test_simple_rejects_wrong_kind(rng):
    with pytest.raises(ConfigError):
        train_simple_gan(rng.uniform(size=(4, 2)), GanConfig(kind="medgan", epochs=1), rng)


@pytest.mark.slow
def test_simple_learns_gaussian():
    data = np.random.default_rng(7).normal(5.0, 1.0, (2000, 1))
    norm = D.NormalizationParams(data.min(axis=0), data.max(axis=0))
    model, _ = train_simple_gan(norm.apply(data), GanConfig(epochs=2000, seed=7), np.random.default_rng(7), norm)
    sample = generate_rows(model, 2000, np.random.default_rng(1))[:, 0]
    assert abs(sample.mean() - 5.0) <= 0.2 * 5.0
    assert abs(sample.std() - 1.0) <= 0.5 * 1.0


def test_weight_clip_invariant(rng):
    rows = rng.uniform(-1, 1, (40, 3))
    cfg = GanConfig(epochs=1, **wasserstein_defaults(lipschitz_value=0.05), **SMALL)
    model = None
    for epochs in (1, 2, 3):
        model, _ = train_simple_gan(rows, cfg.replace(epochs=epochs), np.random.default_rng(2))
        for w in model.modules["discriminator"].state_dict().values():
            assert np.all(np.abs(w) <= 0.05)


def test_dp_zero_noise_infinite_clip_matches_plain(rng):
    rows = rng.uniform(-1, 1, (40, 3))
    base = GanConfig(epochs=4, **wasserstein_defaults(), **SMALL)
    dp = base.replace(dp=DpConfig(clip_norm=math.inf, noise_multiplier=0.0))
    a, la = train_simple_gan(rows, base, np.random.default_rng(5))
    b, lb = train_simple_gan(rows, dp, np.random.default_rng(5))
    for name in a.modules:
        sa, sb = a.modules[name].state_dict(), b.modules[name].state_dict()
        for k in sa:
            np.testing.assert_allclose(sa[k], sb[k], rtol=0, atol=1e-12)
    assert lb.final_spend.epsilon == math.inf and la.final_spend is None


def test_dp_spend_monotone(rng):
    rows = rng.uniform(-1, 1, (20, 2))
    cfg = GanConfig(epochs=4, dp=DpConfig.ppgan(1.5), **wasserstein_defaults(), **SMALL)
    _, log = train_simple_gan(rows, cfg, np.random.default_rng(0))
    eps = [s.epsilon for s in log.spend]
    assert len(eps) == 4 and all(b >= a for a, b in zip(eps, eps[1:]))
    assert log.spend[-1].steps == 4 * cfg.critic_steps


# --- medGAN -----------------------------------------------------------------


def test_medgan_autoencoder_memorizes(rng):
    rows = rng.uniform(-0.8, 0.8, (10, 4))
    cfg = GanConfig(kind="medgan", epochs=1500, batch_size=10, code_dim=32, autoencoder_widths=(64,), **{
        k: v for k, v in SMALL.items() if k != "batch_size"
    })
    cfg = cfg.replace(learning_rate=3e-3)
    model, log = train_medgan(rows, cfg, np.random.default_rng(0))
    assert reconstruction_error(model, rows) < 1e-2
    assert len(log.pretrain_loss) == cfg.epochs and len(log) == cfg.epochs


def test_medgan_arity_and_range(rng):
    rows = rng.uniform(-1, 1, (20, 5))
    norm = D.NormalizationParams(np.full(5, -3.0), np.arange(5.0) + 1)
    model, _ = train_medgan(rows, GanConfig(kind="medgan", epochs=2, code_dim=4, **SMALL), rng, norm)
    out = generate_rows(model, 50, np.random.default_rng(0))
    assert out.shape == (50, 5)
    assert np.all(out >= norm.minimum - 1e-12) and np.all(out <= norm.maximum + 1e-12)


# --- time series ------------------------------------------------------------


def test_cell_invocations(tiny_seqs, monkeypatch):
    cfg = GanConfig(kind="timeseries", steps_per_cell=3, **SMALL)
    modules = ts.build_timeseries(cfg, 1, 2, 12, np.random.default_rng(0))
    calls = []
    lstm = modules["feature_lstm"]
    original = type(lstm).__call__
    monkeypatch.setattr(type(lstm), "__call__", lambda self, *a: calls.append(1) or original(self, *a))
    _, steps = ts.unroll(modules, cfg, 1, 2, 12, np.random.default_rng(0), 5)
    assert len(calls) == 4 == ts.cell_invocations(12, 3)
    assert steps.shape == (5, 12, 4)


def test_critic_input_width_is_constant(tiny_seqs):
    real = ts.encode_real(tiny_seqs)
    assert real.shape == (4, 1 + 12 * 5)
    cfg = GanConfig(kind="timeseries", steps_per_cell=5, **SMALL)
    modules = ts.build_timeseries(cfg, 1, 2, 12, np.random.default_rng(0))
    fake = ts.critic_input(*ts.unroll(modules, cfg, 1, 2, 12, np.random.default_rng(1), 3))
    assert fake.shape == (3, real.shape[1])


def test_encode_real_flags_and_mask(tiny_seqs):
    steps = ts.encode_real(tiny_seqs)[0, 1:].reshape(12, 5)
    assert list(steps[:, 3]) == [1, 1, -1] + [0] * 9
    assert list(steps[:, 4]) == [1, 1, 1] + [0] * 9


def test_lengths_from_flags():
    flags = np.array([[1, 1, -1, -1], [1, 1, 1, 1], [-0.1, 1, 1, 1]])
    assert list(ts.lengths_from_flags(flags)) == [3, 4, 1]


def test_timeseries_lengths_bounded_and_exact_total(tiny_seqs):
    cfg = GanConfig(kind="timeseries", epochs=3, steps_per_cell=3, **wasserstein_defaults(), **SMALL)
    model, log = train_timeseries_gan(tiny_seqs, cfg, np.random.default_rng(0))
    assert len(log) == 3
    out = generate_rows(model, 777, np.random.default_rng(4))
    assert out.n_rows == 777
    assert out.lengths.min() >= 1 and out.lengths.max() <= 12
    rows = out.stacked()
    norm = tiny_seqs.normalization
    assert np.all(rows >= norm.minimum - 1e-12) and np.all(rows <= norm.maximum + 1e-12)
    again = generate_rows(model, 777, np.random.default_rng(4))
    assert np.array_equal(rows, again.stacked())


def test_timeseries_empty_dataset(tiny_seqs):
    with pytest.raises(ConfigError):
        train_timeseries_gan(tiny_seqs.with_sequences([]), GanConfig(kind="timeseries"), np.random.default_rng(0))


@pytest.mark.slow
def test_timeseries_cohort_lengths(cohort):
    cfg = default_presets(epochs=500, seed=11)["timeseries"].config
    model, _ = train_timeseries_gan(cohort, cfg, np.random.default_rng(11))
    synth = generate_rows(model, 10_000, np.random.default_rng(11))
    real_mean = cohort.lengths.mean()
    assert abs(synth.lengths.mean() - real_mean) <= 0.4 * real_mean


# --- generate / serialize ---------------------------------------------------


def test_generate_rows_contract(rng):
    rows = rng.uniform(-1, 1, (30, 3))
    norm = D.NormalizationParams(np.array([0.0, -5.0, 10.0]), np.array([1.0, 5.0, 30.0]))
    model, _ = train_simple_gan(rows, GanConfig(epochs=2, **SMALL), rng, norm)
    out = generate_rows(model, 10_000, np.random.default_rng(0))
    assert out.shape == (10_000, 3)
    assert np.all(out >= norm.minimum - 1e-12) and np.all(out <= norm.maximum + 1e-12)
    assert np.array_equal(out, generate_rows(model, 10_000, np.random.default_rng(0)))
    with pytest.raises(ConfigError):
        generate_rows(model, 0, rng)


@pytest.mark.parametrize("kind", ["simple", "medgan", "timeseries"])
def test_save_load_round_trip(tmp_path, tiny_seqs, kind):
    rng = np.random.default_rng(0)
    cfg = GanConfig(kind=kind, epochs=2, code_dim=3, dp=DpConfig(), **wasserstein_defaults(), **SMALL)
    if kind == "timeseries":
        model, _ = train_timeseries_gan(tiny_seqs, cfg, rng)
    else:
        trainer = train_simple_gan if kind == "simple" else train_medgan
        model, _ = trainer(tiny_seqs.stacked(), cfg, rng, tiny_seqs.normalization)
    path = tmp_path / "model.npz"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.config == model.config
    a = generate_rows(model, 64, np.random.default_rng(1))
    b = generate_rows(loaded, 64, np.random.default_rng(1))
    if kind == "timeseries":
        a, b = a.stacked(), b.stacked()
    assert np.array_equal(a, b)


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.npz"
    np.savez(path, __header__=np.array('{"format": "other", "version": 1}'))
    with pytest.raises(ConfigError):
        load_model(path)


def test_presets():
    presets = default_presets(epochs=7)
    assert [p.label for p in presets.values()] == ["SimpleGAN", "MedGAN", "DG", "DPGAN (DG)", "PPGAN"]
    assert all(p.config.epochs == 7 for p in presets.values())
    assert presets["dpgan"].config.dp.schedule == "constant"
    assert presets["ppgan"].config.kind == "simple" and presets["ppgan"].config.loss == "wasserstein"


def test_config_dict_round_trip():
    cfg = default_presets()["ppgan"].config
    assert GanConfig.from_dict(cfg.to_dict()) == cfg
