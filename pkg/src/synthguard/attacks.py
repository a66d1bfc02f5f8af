"""Membership-inference attacks that need no shadow models.

The evaluator under attack plays the shadow model itself: its per-example
losses and predictions on members (its training rows) and non-members are
handed to a threshold attacker and a logistic-regression attacker, each run
over loss-percentile slices of the pooled examples.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from synthguard import kernels
from synthguard import rng as rng_mod
from synthguard.dataset import NormalizationParams, SequenceDataset
from synthguard.errors import ConfigError, ShapeError, SliceTooSmall, StateError
from synthguard.evaluation.evaluator import EvaluatorConfig, EvaluatorModel, Windows, make_windows, train_evaluator

MIN_SLICE = 10
LR_ITERATIONS = 500
LR_STEP = 0.1
LR_TOLERANCE = 1e-6
THRESHOLD = "TA"
LOGISTIC = "LR"
PRIVACY_HEADER = ("Dataset", "Percentile", "AttackType", "AUC", "AttackerAdvantage")


@dataclass(frozen=True)
class AttackInput:
    """Per-example labels, losses and prediction vectors for members (train) and non-members (test)."""

    train_labels: np.ndarray
    test_labels: np.ndarray
    train_losses: np.ndarray
    test_losses: np.ndarray
    train_logits: np.ndarray
    test_logits: np.ndarray

    def __post_init__(self):
        for side in ("train", "test"):
            n = getattr(self, f"{side}_losses").shape[0]
            if getattr(self, f"{side}_labels").shape[0] != n or getattr(self, f"{side}_logits").shape[0] != n:
                raise ShapeError(f"{side} labels, losses and logits must have equal length")
        if self.train_logits.ndim != 2 or self.test_logits.ndim != 2:
            raise ShapeError("logits must be 2-D (examples x outputs)")

    def take(self, train_idx, test_idx) -> AttackInput:
        return AttackInput(
            self.train_labels[train_idx],
            self.test_labels[test_idx],
            self.train_losses[train_idx],
            self.test_losses[test_idx],
            self.train_logits[train_idx],
            self.test_logits[test_idx],
        )


@dataclass(frozen=True, order=True)
class SliceSpec:
    lo: int
    hi: int

    def __post_init__(self):
        if not 0 <= self.lo < self.hi <= 100:
            raise ConfigError(f"need 0 <= lo < hi <= 100, got [{self.lo}, {self.hi})")

    @property
    def label(self) -> str:
        return f"{self.lo}-{self.hi}"


FULL = SliceSpec(0, 100)
DECILES = tuple(SliceSpec(lo, lo + 10) for lo in range(0, 100, 10))
SLICES = DECILES + (FULL,)


@dataclass(frozen=True)
class AttackResult:
    auc: float
    attacker_advantage: float
    attack_type: str
    slice: SliceSpec
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "attacker_advantage": self.attacker_advantage,
            "attack_type": self.attack_type,
            "slice": self.slice.label,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> AttackResult:
        lo, hi = (int(v) for v in d["slice"].split("-"))
        return cls(d["auc"], d["attacker_advantage"], d["attack_type"], SliceSpec(lo, hi), d["converged"])


def _scores(members, nonmembers) -> tuple[np.ndarray, np.ndarray]:
    m = np.ascontiguousarray(members, dtype=np.float64).reshape(-1)
    n = np.ascontiguousarray(nonmembers, dtype=np.float64).reshape(-1)
    if m.size == 0 or n.size == 0:
        raise ShapeError("member and non-member scores must both be non-empty")
    return m, n


def auc(member_scores, nonmember_scores) -> float:
    """Side-normalized ROC AUC: ``max(u, 1 - u)`` with ``u = P(m > n) + P(m = n) / 2``."""
    u = float(kernels.auc_raw(*_scores(member_scores, nonmember_scores)))
    return max(u, 1.0 - u)


def attacker_advantage(member_scores, nonmember_scores) -> float:
    """``max_t |TPR(t) - FPR(t)|`` with members flagged when their score is ``>= t``."""
    return float(kernels.max_tpr_fpr_gap(*_scores(member_scores, nonmember_scores)))


def prepare_attack_input(model: EvaluatorModel, train: Windows, test: Windows) -> AttackInput:
    """Freeze ``model`` and record what an attacker observes on each example."""
    if not model.trained:
        raise StateError("cannot attack an untrained evaluator")
    out = []
    for data in (train, test):
        pred = model.predict(data.inputs)
        out.append((data.targets.copy(), (pred - data.targets) ** 2, pred[:, None]))
    (ytr, ltr, ptr), (yte, lte, pte) = out
    return AttackInput(ytr, yte, ltr, lte, ptr, pte)


def evaluator_attack_input(
    fit_on: SequenceDataset,
    members: SequenceDataset,
    nonmembers: SequenceDataset,
    normalization: NormalizationParams,
    config: EvaluatorConfig,
    rng: np.random.Generator,
) -> AttackInput:
    """Train an evaluator on ``fit_on`` and observe it on members and non-members.

    For real data ``fit_on`` is ``members``.  For a synthetic dataset the
    evaluator is fit on the synthetic rows, while members are the real rows
    its generator was trained on.
    """
    w = config.window
    model = train_evaluator(make_windows(fit_on, normalization, w), config, rng)
    return prepare_attack_input(model, make_windows(members, normalization, w), make_windows(nonmembers, normalization, w))


def slice_by_percentile(inp: AttackInput, spec: SliceSpec) -> AttackInput:
    """Examples whose pooled loss rank lies in ``[lo, hi)`` percent.

    Ranks come from a stable sort of members followed by non-members, so tied
    losses keep their input order; band edges are ``lo * n // 100``.
    """
    n_train = inp.train_losses.shape[0]
    pooled = np.concatenate([inp.train_losses, inp.test_losses])
    n = pooled.size
    order = np.argsort(pooled, kind="stable")
    chosen = np.sort(order[spec.lo * n // 100 : spec.hi * n // 100])
    train_idx = chosen[chosen < n_train]
    test_idx = chosen[chosen >= n_train] - n_train
    if train_idx.size == 0 or test_idx.size == 0:
        raise SliceTooSmall(f"slice {spec.label} leaves a side empty")
    return inp.take(train_idx, test_idx)


def _sliced(inp: AttackInput, spec: SliceSpec) -> AttackInput:
    part = slice_by_percentile(inp, spec)
    if part.train_losses.size < MIN_SLICE or part.test_losses.size < MIN_SLICE:
        raise SliceTooSmall(
            f"slice {spec.label} has {part.train_losses.size} members and {part.test_losses.size} non-members"
        )
    return part


def threshold_attack(inp: AttackInput, spec: SliceSpec = FULL) -> AttackResult:
    """Members are guessed by low loss; the score is ``-loss``."""
    part = _sliced(inp, spec)
    m, n = -part.train_losses, -part.test_losses
    return AttackResult(auc(m, n), attacker_advantage(m, n), THRESHOLD, spec)


def fit_logistic(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, bool]:
    """Gradient descent on mean log-loss; returns weights, bias and a convergence flag."""
    w = np.zeros(x.shape[1])
    b = 0.0
    prev = math.inf
    converged = False
    for _ in range(LR_ITERATIONS):
        z = x @ w + b
        p = 0.5 * (np.tanh(0.5 * z) + 1.0)
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        if abs(prev - loss) < LR_TOLERANCE:
            converged = True
            break
        prev = loss
        g = p - y
        w -= LR_STEP * (x.T @ g) / y.size
        b -= LR_STEP * float(np.mean(g))
    return w, b, converged


def logistic_regression_attack(inp: AttackInput, spec: SliceSpec, rng: np.random.Generator) -> AttackResult:
    """Logistic regression on ``logits ++ loss``.

    Equal numbers of members and non-members are drawn, each half split
    50/50 into attacker-train and attacker-test; features are standardized
    with attacker-train statistics.
    """
    part = _sliced(inp, spec)
    feats_m = np.column_stack([part.train_logits, part.train_losses])
    feats_n = np.column_stack([part.test_logits, part.test_losses])
    k = min(feats_m.shape[0], feats_n.shape[0])
    half = k // 2
    pm = rng.permutation(feats_m.shape[0])[:k]
    pn = rng.permutation(feats_n.shape[0])[:k]
    x_train = np.vstack([feats_m[pm[:half]], feats_n[pn[:half]]])
    y_train = np.r_[np.ones(half), np.zeros(half)]
    x_test_m, x_test_n = feats_m[pm[half:]], feats_n[pn[half:]]
    mu = x_train.mean(axis=0)
    sd = x_train.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    w, b, converged = fit_logistic((x_train - mu) / sd, y_train)
    sm = ((x_test_m - mu) / sd) @ w + b
    sn = ((x_test_n - mu) / sd) @ w + b
    return AttackResult(auc(sm, sn), attacker_advantage(sm, sn), LOGISTIC, spec, converged)


def _rank_key(r: AttackResult):
    return (r.auc, r.attacker_advantage, r.attack_type == THRESHOLD, -r.slice.lo, -r.slice.hi)


def attack_grid(
    inp: AttackInput, seed: int, dataset: str, types: tuple[str, ...] = (THRESHOLD, LOGISTIC)
) -> list[AttackResult]:
    """Each attacker over the ten deciles and the full range; too-small slices are skipped."""
    results = []
    for spec in SLICES:
        for kind in types:
            try:
                if kind == THRESHOLD:
                    results.append(threshold_attack(inp, spec))
                else:
                    rng = rng_mod.derive(seed, "attack", dataset, spec.label)
                    results.append(logistic_regression_attack(inp, spec, rng))
            except SliceTooSmall:
                pass
    return results


def best_result(results: list[AttackResult]) -> AttackResult | None:
    """Highest AUC; ties go to larger advantage, then TA, then the lowest slice."""
    return max(results, key=_rank_key) if results else None


@dataclass
class PrivacyReport:
    """Best attack per dataset plus every evaluated cell."""

    best: dict[str, AttackResult | None] = field(default_factory=dict)
    grid: dict[str, list[AttackResult]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        # "datasets" keeps the row order; JSON writers may sort the mapping keys
        return {
            "datasets": list(self.best),
            "best": {k: v.to_dict() if v else None for k, v in self.best.items()},
            "grid": {k: [r.to_dict() for r in v] for k, v in self.grid.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> PrivacyReport:
        order = d.get("datasets", list(d["best"]))
        return cls(
            best={k: AttackResult.from_dict(d["best"][k]) if d["best"][k] else None for k in order},
            grid={k: [AttackResult.from_dict(r) for r in d["grid"][k]] for k in order if k in d["grid"]},
        )

    def table_rows(self) -> list[tuple[str, ...]]:
        rows = []
        for name, r in self.best.items():
            if r is None:
                rows.append((name, "none", "none", "nan", "nan"))
            else:
                rows.append((name, r.slice.label, r.attack_type, f"{r.auc:.6f}", f"{r.attacker_advantage:.6f}"))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(PRIVACY_HEADER)
        writer.writerows(self.table_rows())
        return buf.getvalue()


def attack_suite(
    inputs: dict[str, AttackInput], seed: int, types: tuple[str, ...] = (THRESHOLD, LOGISTIC)
) -> PrivacyReport:
    """Run :func:`attack_grid` for each dataset and keep its best cell, in input order."""
    report = PrivacyReport()
    for name, inp in inputs.items():
        cells = attack_grid(inp, seed, name, types)
        report.grid[name] = cells
        report.best[name] = best_result(cells)
    return report
