"""Quality-of-generation metrics: error scores, autocorrelation and distribution checks."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from synthguard import kernels
from synthguard.dataset import SequenceDataset
from synthguard.errors import ConfigError, ShapeError, ZeroVarianceError


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ShapeError("inputs must be non-empty")
    return a, b


def rmse(predictions, targets) -> float:
    p, t = _pair(predictions, targets)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def f1_macro(predicted, true) -> float:
    """Macro F1 over the classes present in ``true``.

    A class's F1 is 0 when both its precision and recall are 0.
    """
    predicted = np.asarray(predicted).reshape(-1)
    true = np.asarray(true).reshape(-1)
    if predicted.shape != true.shape:
        raise ShapeError(f"length mismatch: {predicted.size} vs {true.size}")
    if true.size == 0:
        raise ShapeError("inputs must be non-empty")
    scores = []
    for cls in np.unique(true):
        tp = np.sum((predicted == cls) & (true == cls))
        fp = np.sum((predicted == cls) & (true != cls))
        fn = np.sum((predicted != cls) & (true == cls))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


@dataclass(frozen=True)
class AcfSeries:
    coefficients: np.ndarray  # r_0 .. r_K

    @property
    def max_lag(self) -> int:
        return self.coefficients.size - 1

    def __getitem__(self, lag: int) -> float:
        return float(self.coefficients[lag])


def autocorrelation(series, max_lag: int) -> AcfSeries:
    x = np.ascontiguousarray(series, dtype=np.float64).reshape(-1)
    if max_lag < 1 or x.size <= max_lag:
        raise ConfigError(f"need 1 <= max_lag < len(series), got max_lag={max_lag}, len={x.size}")
    if np.all(x == x[0]):
        raise ZeroVarianceError("autocorrelation of a constant series is undefined")
    return AcfSeries(np.asarray(kernels.acf(x, max_lag)))


def length_distribution(ds: SequenceDataset) -> dict[int, int]:
    """Sequence length -> count, sorted by length."""
    if len(ds) == 0:
        raise ConfigError("length_distribution needs a non-empty dataset")
    counts = Counter(int(n) for n in ds.lengths)
    return dict(sorted(counts.items()))


@dataclass(frozen=True)
class MomentsTable:
    columns: tuple[str, ...]
    mean_real: np.ndarray
    std_real: np.ndarray
    mean_synth: np.ndarray
    std_synth: np.ndarray
    summary: float

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "mean_real": self.mean_real.tolist(),
            "std_real": self.std_real.tolist(),
            "mean_synth": self.mean_synth.tolist(),
            "std_synth": self.std_synth.tolist(),
            "summary": self.summary,
        }


def column_moments_diff(real, synth, columns=None) -> MomentsTable:
    """Per-column moments; the summary averages ``|dmean| + |dstd|`` over columns.

    Both inputs must already share the [-1, 1] normalized scale.
    """
    real = np.asarray(real, dtype=np.float64)
    synth = np.asarray(synth, dtype=np.float64)
    if real.ndim != 2 or synth.ndim != 2 or real.shape[1] != synth.shape[1]:
        raise ShapeError(f"column arity mismatch: {real.shape} vs {synth.shape}")
    if real.shape[0] == 0 or synth.shape[0] == 0:
        raise ShapeError("inputs must be non-empty")
    mr, sr = real.mean(axis=0), real.std(axis=0)
    ms, ss = synth.mean(axis=0), synth.std(axis=0)
    summary = float(np.mean(np.abs(mr - ms) + np.abs(sr - ss)))
    names = tuple(columns) if columns is not None else tuple(f"col{i}" for i in range(real.shape[1]))
    return MomentsTable(names, mr, sr, ms, ss, summary)


def mode_collapse_flag(values, threshold: float = 0.9) -> tuple[bool, float]:
    """``(share > threshold, share)`` where ``share`` is the modal integer bin's fraction."""
    v = np.rint(np.asarray(values, dtype=np.float64).reshape(-1))
    if v.size == 0:
        raise ShapeError("values must be non-empty")
    _, counts = np.unique(v, return_counts=True)
    share = float(counts.max() / v.size)
    return share > threshold, share
