import numpy as np
import pytest
from scipy import stats

from oracles import advantage_thresholds, auc_pairs, decile_by_sort
from synthguard import dataset as D
from synthguard.attacks import (
    DECILES,
    FULL,
    SLICES,
    AttackInput,
    PrivacyReport,
    SliceSpec,
    attack_grid,
    attack_suite,
    attacker_advantage,
    auc,
    evaluator_attack_input,
    logistic_regression_attack,
    prepare_attack_input,
    slice_by_percentile,
    threshold_attack,
)
from synthguard.errors import ConfigError, ShapeError, SliceTooSmall, StateError
from synthguard.evaluation import EvaluatorConfig, EvaluatorModel, Windows, train_evaluator


def _input(train_losses, test_losses, train_logits=None, test_logits=None):
    tr, te = np.asarray(train_losses, float), np.asarray(test_losses, float)
    tl = np.zeros((tr.size, 1)) if train_logits is None else np.asarray(train_logits, float).reshape(tr.size, -1)
    el = np.zeros((te.size, 1)) if test_logits is None else np.asarray(test_logits, float).reshape(te.size, -1)
    return AttackInput(np.zeros(tr.size), np.zeros(te.size), tr, te, tl, el)


# --- auc / advantage ---------------------------------------------------------


def test_auc_examples():
    assert auc([5, 6, 7], [1, 2]) == 1.0
    assert auc([1, 2, 2, 3], [3, 2, 1, 2]) == 0.5
    assert auc([0.9, 0.8], [0.85, 0.7]) == 0.75 == auc_pairs([0.9, 0.8], [0.85, 0.7])
    assert auc([1, 2], [5, 6]) == 1.0  # side-normalized
    with pytest.raises(ShapeError):
        auc([], [1.0])


def test_advantage_examples():
    assert attacker_advantage([5, 6], [1, 2]) == 1.0
    assert attacker_advantage([1, 2, 2], [2, 1, 2]) == 0.0
    assert attacker_advantage([0.9, 0.8], [0.85, 0.7]) == 0.5 == advantage_thresholds([0.9, 0.8], [0.85, 0.7])
    with pytest.raises(ShapeError):
        attacker_advantage([1.0], [])


def test_auc_and_advantage_match_oracles(rng):
    for _ in range(200):
        m = rng.integers(0, 8, int(rng.integers(1, 9))).astype(float)
        n = rng.integers(0, 8, int(rng.integers(1, 9))).astype(float)
        u = auc_pairs(list(m), list(n))
        assert auc(m, n) == max(u, 1 - u)
        assert attacker_advantage(m, n) == advantage_thresholds(list(m), list(n))


def test_monotone_invariance(rng):
    m, n = rng.normal(size=30), rng.normal(0.5, 1, 40)
    f = lambda x: np.exp(2 * x) + 3  # noqa: E731
    assert auc(f(m), f(n)) == auc(m, n)
    assert attacker_advantage(f(m), f(n)) == attacker_advantage(m, n)
    assert 0.0 <= attacker_advantage(m, n) <= 1.0


# --- slicing -----------------------------------------------------------------


def test_slice_spec_validation():
    with pytest.raises(ConfigError):
        SliceSpec(30, 20)
    assert [s.label for s in DECILES][:2] == ["0-10", "10-20"] and FULL.label == "0-100"


def test_slice_full_is_identity(rng):
    inp = _input(rng.uniform(size=13), rng.uniform(size=9))
    out = slice_by_percentile(inp, FULL)
    assert np.array_equal(out.train_losses, inp.train_losses) and np.array_equal(out.test_losses, inp.test_losses)


def test_slice_matches_sort_oracle(rng):
    for _ in range(50):
        losses = rng.integers(0, 20, 100).astype(float)
        inp = _input(losses[:55], losses[55:])
        expected = decile_by_sort(list(losses), 20, 30)
        assert len(expected) == 10
        try:
            out = slice_by_percentile(inp, SliceSpec(20, 30))
        except SliceTooSmall:
            assert all(i < 55 for i in expected) or all(i >= 55 for i in expected)
            continue
        got = np.r_[out.train_losses, out.test_losses]
        np.testing.assert_array_equal(np.sort(got), np.sort(losses[expected]))
        assert out.train_losses.size == sum(i < 55 for i in expected)


def test_deciles_partition(rng):
    losses = rng.normal(size=237)
    inp = _input(losses[:120], losses[120:])
    pieces = [slice_by_percentile(inp, s) for s in DECILES]
    got = np.sort(np.concatenate([np.r_[p.train_losses, p.test_losses] for p in pieces]))
    np.testing.assert_array_equal(got, np.sort(losses))


def test_slice_empty_side():
    inp = _input(np.arange(10.0), np.arange(10.0) + 100)
    with pytest.raises(SliceTooSmall):
        slice_by_percentile(inp, SliceSpec(0, 10))


# --- attackers ---------------------------------------------------------------


def test_threshold_perfect_separation():
    r = threshold_attack(_input([0.1] * 12, [0.9] * 12))
    assert (r.auc, r.attacker_advantage, r.attack_type) == (1.0, 1.0, "TA")


def test_threshold_null(rng):
    r = threshold_attack(_input(rng.exponential(size=1000), rng.exponential(size=1000)))
    assert 0.5 <= r.auc <= 0.55


def test_threshold_slice_too_small():
    with pytest.raises(SliceTooSmall):
        threshold_attack(_input([0.1] * 9, [0.9] * 30))


def test_logistic_separable(rng):
    inp = _input(rng.uniform(0, 1, 200), rng.uniform(0, 1, 200), rng.normal(-3, 1, 200), rng.normal(3, 1, 200))
    r = logistic_regression_attack(inp, FULL, np.random.default_rng(0))
    assert r.auc >= 0.95 and r.attack_type == "LR"


def test_logistic_null_and_deterministic(rng):
    inp = _input(rng.uniform(size=1000), rng.uniform(size=1000), rng.normal(size=1000), rng.normal(size=1000))
    a = logistic_regression_attack(inp, FULL, np.random.default_rng(4))
    b = logistic_regression_attack(inp, FULL, np.random.default_rng(4))
    assert a == b
    assert 0.5 <= a.auc <= 0.6


# --- evaluator as target -----------------------------------------------------


def _windows(rng, n, d=3):
    return Windows(rng.normal(size=(n, 5, d)), rng.uniform(-1, 1, n))


def test_prepare_contract_and_untrained(rng):
    train, test = _windows(rng, 40), _windows(rng, 25)
    with pytest.raises(StateError):
        prepare_attack_input(EvaluatorModel(3, EvaluatorConfig(), rng), train, test)
    model = train_evaluator(train, EvaluatorConfig(hidden=4, epochs=1), rng)
    inp = prepare_attack_input(model, train, test)
    assert inp.train_losses.shape == (40,) and inp.test_losses.shape == (25,)
    assert inp.train_logits.shape == (40, 1)


def test_memorizing_model_has_lower_member_loss(rng):
    train, test = _windows(rng, 30), _windows(rng, 30)
    model = train_evaluator(train, EvaluatorConfig(epochs=1500, learning_rate=1e-2), np.random.default_rng(0))
    inp = prepare_attack_input(model, train, test)
    assert inp.train_losses.mean() < inp.test_losses.mean()


def test_identical_sets_indistinguishable(rng):
    data = _windows(rng, 300)
    model = train_evaluator(data, EvaluatorConfig(hidden=4, epochs=2), rng)
    inp = prepare_attack_input(model, data, data)
    ks = stats.ks_2samp(inp.train_losses, inp.test_losses).statistic
    assert ks < 1.628 * np.sqrt(2 / 300)


def test_evaluator_attack_input_rows():
    ds = D.build_sequences(D.load_bundled_cohort(), D.BUNDLED_MAX_LEN)
    norm = D.fit_normalization(ds)
    tr, te = D.split(ds.subset(range(8)), 0.5, 0)
    inp = evaluator_attack_input(tr, tr, te, norm, EvaluatorConfig(hidden=4, epochs=1), np.random.default_rng(0))
    assert inp.train_losses.size == tr.n_rows and inp.test_losses.size == te.n_rows


# --- suite -------------------------------------------------------------------


def test_suite_schema_and_best(rng):
    inputs = {
        "Real": _input(rng.exponential(0.5, 300), rng.exponential(1.0, 300), rng.normal(size=300), rng.normal(size=300)),
        "Flat": _input(np.ones(200), np.ones(200)),
    }
    report = attack_suite(inputs, seed=1)
    assert report.to_csv().splitlines()[0] == "Dataset,Percentile,AttackType,AUC,AttackerAdvantage"
    assert [row[0] for row in report.table_rows()] == ["Real", "Flat"]
    assert report.best["Flat"].auc == 0.5
    for name, cells in report.grid.items():
        assert len(cells) >= 2
        best = report.best[name]
        assert all(best.auc >= c.auc for c in cells)
    assert attack_suite(inputs, seed=1).to_csv() == report.to_csv()
    assert PrivacyReport.from_dict(report.to_dict()) == report


def test_suite_skips_small_slices():
    cells = attack_grid(_input(np.arange(30.0), np.arange(30.0) + 0.5), 0, "x")
    assert {c.slice for c in cells} == {FULL}
    assert len(SLICES) == 11


def test_tie_breaking():
    from synthguard.attacks import AttackResult, best_result

    a = AttackResult(0.7, 0.3, "LR", SliceSpec(10, 20))
    b = AttackResult(0.7, 0.3, "TA", SliceSpec(50, 60))
    c = AttackResult(0.7, 0.3, "TA", SliceSpec(20, 30))
    d = AttackResult(0.7, 0.4, "LR", SliceSpec(90, 100))
    assert best_result([a, b, c]) == c
    assert best_result([a, b, c, d]) == d
    assert best_result([]) is None
