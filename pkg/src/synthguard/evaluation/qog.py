"""The four predictive scenarios, the 14-row comparison grid and the full QoG report."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from synthguard import rng as rng_mod
from synthguard.dataset import (
    EntitySequence,
    NormalizationParams,
    SequenceDataset,
    average_per_entity,
    split,
)
from synthguard.errors import ConfigError, ZeroVarianceError
from synthguard.evaluation.evaluator import EvaluatorConfig, make_windows, train_evaluator
from synthguard.evaluation.metrics import (
    autocorrelation,
    column_moments_diff,
    f1_macro,
    length_distribution,
    mode_collapse_flag,
    rmse,
)

REAL_ONLY = "RealOnly"
REAL_PLUS_SYNTH = "RealPlusSynth"
TRAIN_SYNTH_TEST_REAL = "TrainSynthTestReal"
SYNTH_ONLY = "SynthOnly"
SCENARIOS = (REAL_ONLY, REAL_PLUS_SYNTH, TRAIN_SYNTH_TEST_REAL, SYNTH_ONLY)

SPLIT_RATIO = 0.7
ACF_MAX_LAG = 50
ACF_AVERAGED_MAX_LAG = 20
JUMP_THRESHOLD = 5.0
QOG_HEADER = ("LSTM", "RMSE", "F1 Score")

# Labels of the five synthetic datasets and the composition of the comparison grid.
SYNTH_LABELS = ("DG", "MedGAN", "SimpleGAN", "DPGAN (DG)", "PPGAN")
GRID = (
    (REAL_ONLY, None),
    *((REAL_PLUS_SYNTH, s) for s in ("DG", "MedGAN", "SimpleGAN", "DPGAN (DG)", "PPGAN")),
    *((TRAIN_SYNTH_TEST_REAL, s) for s in ("DG", "MedGAN", "SimpleGAN")),
    *((SYNTH_ONLY, s) for s in ("MedGAN", "DG", "SimpleGAN", "DPGAN (DG)", "PPGAN")),
)


def row_label(tag: str, synth: str | None) -> str:
    if tag == REAL_ONLY:
        return "Real"
    if tag == REAL_PLUS_SYNTH:
        return f"Real+{synth}"
    if tag == TRAIN_SYNTH_TEST_REAL:
        return f"Train: {synth} - Test: Real"
    return synth


@dataclass(frozen=True)
class EvalScenario:
    tag: str
    label: str
    train: SequenceDataset
    test: SequenceDataset
    normalization: NormalizationParams


@dataclass(frozen=True)
class PredictiveReport:
    label: str
    scenario: str
    rmse: float
    f1: float

    def to_dict(self) -> dict:
        return {"label": self.label, "scenario": self.scenario, "rmse": self.rmse, "f1": self.f1}


def resolve_scenario(
    tag: str,
    real: SequenceDataset,
    normalization: NormalizationParams,
    synth: SequenceDataset | None = None,
    synth_label: str | None = None,
    seed: int = 0,
) -> EvalScenario:
    """Assemble train/test data for one scenario; all datasets in the original scale."""
    if tag not in SCENARIOS:
        raise ConfigError(f"unknown scenario {tag!r}")
    if tag != REAL_ONLY and synth is None:
        raise ConfigError(f"scenario {tag} needs a synthetic dataset")
    real_train, real_test = split(real, SPLIT_RATIO, seed)
    if tag == REAL_ONLY:
        train, test = real_train, real_test
    elif tag == REAL_PLUS_SYNTH:
        merged = real.with_sequences(real.sequences + synth.sequences)
        train, test = split(merged, SPLIT_RATIO, seed)
    elif tag == TRAIN_SYNTH_TEST_REAL:
        train, test = synth, real_test
    else:
        train, test = split(synth, SPLIT_RATIO, seed)
    return EvalScenario(tag, row_label(tag, synth_label), train, test, normalization)


def label_classes(normalized_labels: np.ndarray, norm: NormalizationParams) -> np.ndarray:
    """Integer MMST classes of labels given on the normalized scale."""
    lo, hi = norm.minimum[-1], norm.maximum[-1]
    return np.rint((normalized_labels + 1.0) * 0.5 * (hi - lo) + lo).astype(int)


def run_predictive_eval(scenario: EvalScenario, config: EvaluatorConfig, rng: np.random.Generator) -> PredictiveReport:
    """Train the evaluator on the scenario's train split, score it on its test split.

    RMSE is measured on the normalized label scale; F1 on integer MMST classes.
    """
    if len(scenario.train) == 0 or len(scenario.test) == 0:
        raise ConfigError(f"scenario {scenario.label!r} has an empty split")
    norm = scenario.normalization
    train = make_windows(scenario.train, norm, config.window)
    test = make_windows(scenario.test, norm, config.window)
    model = train_evaluator(train, config, rng)
    pred = model.predict(test.inputs)
    f1 = f1_macro(label_classes(pred, norm), label_classes(test.targets, norm))
    return PredictiveReport(scenario.label, scenario.tag, rmse(pred, test.targets), f1)


def predictive_grid(
    real: SequenceDataset,
    synthetic: dict[str, SequenceDataset],
    normalization: NormalizationParams,
    config: EvaluatorConfig,
    seed: int,
) -> list[PredictiveReport]:
    """All 14 rows, in table order.  A missing synthetic dataset is an error."""
    missing = sorted({s for _, s in GRID if s is not None} - set(synthetic))
    if missing:
        raise ConfigError(f"predictive grid is missing synthetic datasets: {missing}")
    reports = []
    for tag, synth_label in GRID:
        synth = synthetic[synth_label] if synth_label else None
        scenario = resolve_scenario(tag, real, normalization, synth, synth_label, seed)
        reports.append(run_predictive_eval(scenario, config, rng_mod.derive(seed, "qog", scenario.label)))
    return reports


def sequences_from_rows(
    rows: np.ndarray, template: SequenceDataset, jump: float = JUMP_THRESHOLD
) -> SequenceDataset:
    """Cut flat generated rows into sequences.

    A new sequence starts whenever the label moves by more than ``jump`` from
    the previous row, or the current one reaches ``template.max_len``.  Each
    sequence takes the attributes of its first row.  This is a heuristic:
    flat generators carry no sequence boundary of their own.
    """
    rows = np.asarray(rows, dtype=np.float64)
    a, f = template.n_attributes, template.n_features
    if rows.ndim != 2 or rows.shape[1] != a + f + 1:
        raise ConfigError(f"rows of width {rows.shape[-1]} do not match {len(template.columns)} columns")
    label = rows[:, -1]
    breaks = np.flatnonzero(np.abs(np.diff(label)) > jump) + 1
    seqs = []
    for chunk in np.split(rows, breaks):
        for lo in range(0, chunk.shape[0], template.max_len):
            part = chunk[lo : lo + template.max_len]
            seqs.append(EntitySequence(part[0, :a].copy(), part[:, a : a + f].copy(), part[:, -1].copy()))
    return template.with_sequences(seqs)


def _acf_or_none(values: np.ndarray, max_lag: int) -> list[float] | None:
    lag = min(max_lag, values.size - 1)
    if lag < 1:
        return None
    try:
        return autocorrelation(values, lag).coefficients.tolist()
    except ZeroVarianceError:
        return None


@dataclass
class QogReport:
    """Everything the quality-of-generation suite measures for one run."""

    predictive: list[PredictiveReport] = field(default_factory=list)
    acf: dict[str, list[float] | None] = field(default_factory=dict)
    acf_averaged: dict[str, list[float] | None] = field(default_factory=dict)
    lengths: dict[str, dict[int, int]] = field(default_factory=dict)
    lengths_heuristic: dict[str, bool] = field(default_factory=dict)
    moments: dict[str, dict] = field(default_factory=dict)
    mode_collapse: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "predictive": [r.to_dict() for r in self.predictive],
            "acf": self.acf,
            "acf_averaged": self.acf_averaged,
            "lengths": {k: {str(n): c for n, c in v.items()} for k, v in self.lengths.items()},
            "lengths_heuristic": self.lengths_heuristic,
            "moments": self.moments,
            "mode_collapse": self.mode_collapse,
        }

    @classmethod
    def from_dict(cls, d: dict) -> QogReport:
        return cls(
            predictive=[PredictiveReport(**r) for r in d["predictive"]],
            acf=dict(d["acf"]),
            acf_averaged=dict(d["acf_averaged"]),
            lengths={k: {int(n): c for n, c in v.items()} for k, v in d["lengths"].items()},
            lengths_heuristic=dict(d["lengths_heuristic"]),
            moments=dict(d["moments"]),
            mode_collapse=dict(d["mode_collapse"]),
        )

    def table_rows(self) -> list[tuple[str, str, str]]:
        return [(r.label, f"{r.rmse:.6f}", f"{r.f1:.6f}") for r in self.predictive]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(QOG_HEADER)
        writer.writerows(self.table_rows())
        return buf.getvalue()


def describe_datasets(
    real: SequenceDataset,
    synthetic: dict[str, SequenceDataset],
    normalization: NormalizationParams,
    heuristic: set[str] | frozenset[str] = frozenset(),
) -> QogReport:
    """Autocorrelation, lengths, moments and mode collapse for every dataset.

    ``heuristic`` names the synthetic datasets whose sequences were cut by
    :func:`sequences_from_rows`.
    """
    report = QogReport()
    real_norm = normalization.apply(real.stacked())
    for label, ds in (("Real", real), *synthetic.items()):
        labels = ds.labels()
        report.acf[label] = _acf_or_none(labels, ACF_MAX_LAG)
        averaged = average_per_entity(ds).values[:, -1]
        report.acf_averaged[label] = _acf_or_none(averaged, ACF_AVERAGED_MAX_LAG)
        report.lengths[label] = length_distribution(ds)
        report.lengths_heuristic[label] = label in heuristic
        if label != "Real":
            table = column_moments_diff(real_norm, normalization.apply(ds.stacked()), ds.columns)
            report.moments[label] = table.to_dict()
            collapsed, share = mode_collapse_flag(labels)
            report.mode_collapse[label] = {"collapsed": collapsed, "share": round(share, 3)}
    return report


def run_qog(
    real: SequenceDataset,
    synthetic: dict[str, SequenceDataset],
    normalization: NormalizationParams,
    config: EvaluatorConfig,
    seed: int,
    heuristic: set[str] | frozenset[str] = frozenset(),
) -> QogReport:
    report = describe_datasets(real, synthetic, normalization, heuristic)
    report.predictive = predictive_grid(real, synthetic, normalization, config, seed)
    return report
