"""Entity-keyed event tables and the sequence datasets built from them.

The on-disk format is a delimited text table with a header line.  Required
columns are ``entity_id``, ``date`` (ISO-8601) and ``user_mmst``; every other
column is a real-valued feature.  Columns listed as attributes are static per
entity and end up in :attr:`EntitySequence.attributes` instead of the
time-varying feature matrix.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from synthguard import rng as rng_mod
from synthguard.errors import ConfigError, IngestError, ParseError, SchemaError

ENTITY = "entity_id"
DATE = "date"
LABEL = "user_mmst"
MMST_MAX = 30.0

_BUNDLED = Path(__file__).with_name("data") / "cohort.csv"
BUNDLED_ATTRIBUTES = ("severity",)
BUNDLED_MAX_LEN = 150


class EmptyTable(IngestError):
    pass


@dataclass(frozen=True)
class EventSchema:
    """Expected columns of an event file.

    ``feature_names=None`` accepts every non-key column as a feature.
    """

    feature_names: tuple[str, ...] | None = None
    attribute_names: tuple[str, ...] = ()
    delimiter: str = ","


@dataclass(frozen=True)
class RawEventTable:
    entity_ids: np.ndarray  # (n,) object
    dates: np.ndarray  # (n,) datetime64[D]
    features: np.ndarray  # (n, F)
    user_mmst: np.ndarray  # (n,)
    feature_names: tuple[str, ...]
    attribute_names: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.entity_ids)
        if not (len(self.dates) == n == len(self.user_mmst) == self.features.shape[0]):
            raise SchemaError("column lengths disagree")
        if self.features.shape[1] != len(self.feature_names) or not self.feature_names:
            raise SchemaError("need at least one feature column matching feature_names")
        unknown = set(self.attribute_names) - set(self.feature_names)
        if unknown:
            raise SchemaError(f"attribute columns not among features: {sorted(unknown)}")

    def __len__(self) -> int:
        return len(self.entity_ids)

    @property
    def n_entities(self) -> int:
        return len(set(self.entity_ids.tolist()))

    def sorted(self) -> RawEventTable:
        order = sorted(range(len(self)), key=lambda i: (self.entity_ids[i], self.dates[i]))
        order = np.asarray(order, dtype=np.intp)
        return replace(
            self,
            entity_ids=self.entity_ids[order],
            dates=self.dates[order],
            features=self.features[order],
            user_mmst=self.user_mmst[order],
        )


@dataclass(frozen=True)
class NormalizationParams:
    """Per-column min/max over the flat layout ``attributes + features + label``."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        if self.minimum.shape != self.maximum.shape or np.any(self.minimum > self.maximum):
            raise ConfigError("normalization bounds must satisfy min <= max per column")

    def apply(self, rows: np.ndarray) -> np.ndarray:
        span = self.maximum - self.minimum
        const = span == 0
        safe = np.where(const, 1.0, span)
        out = 2.0 * (rows - self.minimum) / safe - 1.0
        return np.where(const, 0.0, out)

    def invert(self, rows: np.ndarray) -> np.ndarray:
        span = self.maximum - self.minimum
        return (rows + 1.0) * 0.5 * span + self.minimum

    def to_dict(self) -> dict:
        return {"minimum": self.minimum.tolist(), "maximum": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> NormalizationParams:
        return cls(np.asarray(d["minimum"], dtype=float), np.asarray(d["maximum"], dtype=float))


@dataclass(frozen=True)
class EntitySequence:
    attributes: np.ndarray  # (A,)
    features: np.ndarray  # (T, F)
    labels: np.ndarray  # (T,)

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise SchemaError("features and labels must have the same number of steps")

    @property
    def length(self) -> int:
        return self.labels.shape[0]

    def rows(self) -> np.ndarray:
        """(T, A + F + 1) with the attributes repeated on every step."""
        attrs = np.broadcast_to(self.attributes, (self.length, self.attributes.size))
        return np.column_stack([attrs, self.features, self.labels])


@dataclass(frozen=True)
class SequenceDataset:
    sequences: tuple[EntitySequence, ...]
    max_len: int
    feature_names: tuple[str, ...]
    attribute_names: tuple[str, ...] = ()
    normalization: NormalizationParams | None = None

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def columns(self) -> tuple[str, ...]:
        return self.attribute_names + self.feature_names + (LABEL,)

    @property
    def n_attributes(self) -> int:
        return len(self.attribute_names)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([s.length for s in self.sequences], dtype=int)

    @property
    def n_rows(self) -> int:
        return int(self.lengths.sum())

    def stacked(self) -> np.ndarray:
        """All sequences stacked on top of each other as flat rows."""
        if not self.sequences:
            return np.zeros((0, len(self.columns)))
        return np.concatenate([s.rows() for s in self.sequences], axis=0)

    def labels(self) -> np.ndarray:
        return np.concatenate([s.labels for s in self.sequences]) if self.sequences else np.zeros(0)

    def subset(self, indices: Sequence[int]) -> SequenceDataset:
        return replace(self, sequences=tuple(self.sequences[i] for i in indices))

    def with_sequences(self, sequences: Sequence[EntitySequence]) -> SequenceDataset:
        return replace(self, sequences=tuple(sequences))

    def map_rows(self, fn) -> SequenceDataset:
        a, f = self.n_attributes, self.n_features
        seqs = []
        for s in self.sequences:
            r = fn(s.rows())
            seqs.append(EntitySequence(r[0, :a].copy(), r[:, a : a + f].copy(), r[:, a + f].copy()))
        return replace(self, sequences=tuple(seqs))


@dataclass(frozen=True)
class AveragedTable:
    columns: tuple[str, ...]
    values: np.ndarray  # (n_entities, n_columns)

    def __len__(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]


# ---------------------------------------------------------------------------
# ingest / write
# ---------------------------------------------------------------------------


def ingest_events(path: str | os.PathLike, schema: EventSchema | None = None) -> RawEventTable:
    """Parse an event file and return its rows sorted by (entity_id, date)."""
    schema = schema or EventSchema()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyTable(f"{path}: no header line") from None
        missing = [c for c in (ENTITY, DATE, LABEL) if c not in header]
        if schema.feature_names is not None:
            missing += [c for c in schema.feature_names if c not in header]
        missing += [c for c in schema.attribute_names if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}")
        if schema.feature_names is not None:
            features = tuple(schema.feature_names)
        else:
            features = tuple(c for c in header if c not in (ENTITY, DATE, LABEL))
        if not features:
            raise SchemaError(f"{path}: no feature columns")
        pos = {name: header.index(name) for name in header}
        feat_idx = [pos[c] for c in features]

        ids, dates, mmst, rows = [], [], [], []
        for line_no, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) != len(header):
                raise ParseError(f"expected {len(header)} cells, got {len(raw)}", line_no)
            ids.append(raw[pos[ENTITY]].strip())
            try:
                dates.append(np.datetime64(dt.date.fromisoformat(raw[pos[DATE]].strip()), "D"))
            except ValueError as exc:
                raise ParseError(f"bad date {raw[pos[DATE]]!r}: {exc}", line_no) from None
            try:
                mmst.append(float(raw[pos[LABEL]]))
                rows.append([float(raw[i]) for i in feat_idx])
            except ValueError as exc:
                raise ParseError(str(exc), line_no) from None
    if not ids:
        raise EmptyTable(f"{path}: no data rows")
    table = RawEventTable(
        entity_ids=np.array(ids, dtype=object),
        dates=np.array(dates, dtype="datetime64[D]"),
        features=np.array(rows, dtype=np.float64),
        user_mmst=np.array(mmst, dtype=np.float64),
        feature_names=features,
        attribute_names=tuple(schema.attribute_names),
    )
    return table.sorted()


def write_events(table: RawEventTable, path: str | os.PathLike, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([ENTITY, DATE, *table.feature_names, LABEL])
        for i in range(len(table)):
            w.writerow(
                [table.entity_ids[i], str(table.dates[i])]
                + [repr(float(v)) for v in table.features[i]]
                + [repr(float(table.user_mmst[i]))]
            )


def load_bundled_cohort() -> RawEventTable:
    """The 56-entity synthetic cohort shipped with the package."""
    return ingest_events(_BUNDLED, EventSchema(attribute_names=BUNDLED_ATTRIBUTES))


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------


def build_sequences(table: RawEventTable, max_len: int) -> SequenceDataset:
    """One sequence per entity, truncated to its first ``max_len`` events."""
    if max_len < 1:
        raise ConfigError(f"max_len must be >= 1, got {max_len}")
    table = table.sorted()
    attr_idx = [table.feature_names.index(a) for a in table.attribute_names]
    feat_idx = [i for i, n in enumerate(table.feature_names) if n not in table.attribute_names]
    ids = table.entity_ids
    boundaries = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1], True])
    seqs = []
    for lo, hi in zip(boundaries[:-1], boundaries[1:]):
        hi = min(hi, lo + max_len)
        feats = table.features[lo:hi]
        seqs.append(
            EntitySequence(
                attributes=feats[0, attr_idx].copy(),
                features=feats[:, feat_idx].copy(),
                labels=table.user_mmst[lo:hi].copy(),
            )
        )
    return SequenceDataset(
        sequences=tuple(seqs),
        max_len=max_len,
        feature_names=tuple(table.feature_names[i] for i in feat_idx),
        attribute_names=tuple(table.attribute_names),
    )


def fit_normalization(ds: SequenceDataset) -> NormalizationParams:
    rows = ds.stacked()
    return NormalizationParams(rows.min(axis=0), rows.max(axis=0))


def normalize(ds: SequenceDataset, params: NormalizationParams | None = None) -> tuple[SequenceDataset, NormalizationParams]:
    """Min-max map every column to [-1, 1]; constant columns map to 0.

    Pass ``params`` to reuse bounds fitted on another dataset.
    """
    if ds.normalization is not None:
        raise ConfigError("dataset is already normalized")
    params = params or fit_normalization(ds)
    out = ds.map_rows(params.apply)
    return replace(out, normalization=params), params


def inverse_normalize(ds: SequenceDataset, params: NormalizationParams | None = None) -> SequenceDataset:
    params = params or ds.normalization
    if params is None:
        raise ConfigError("no normalization parameters to invert")
    if params.minimum.size != len(ds.columns):
        raise ConfigError(f"params cover {params.minimum.size} columns, dataset has {len(ds.columns)}")
    return replace(ds.map_rows(params.invert), normalization=None)


def _fingerprint(seq: EntitySequence) -> bytes:
    h = hashlib.sha256()
    for arr in (seq.attributes, seq.features, seq.labels):
        h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        h.update(b"|")
    return h.digest()


def split(ds: SequenceDataset, ratio: float, seed: int) -> tuple[SequenceDataset, SequenceDataset]:
    """Partition sequences into (train, test) with ``round(ratio * n)`` train sequences.

    The assignment depends only on sequence contents and ``seed``, not on the
    order sequences appear in ``ds``.
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must be in (0, 1), got {ratio}")
    n = len(ds)
    canonical = sorted(range(n), key=lambda i: _fingerprint(ds.sequences[i]))
    perm = rng_mod.derive(seed, "split").permutation(n)
    shuffled = [canonical[i] for i in perm]
    n_train = int(round(ratio * n))
    if n >= 2:
        n_train = min(max(n_train, 1), n - 1)
    return ds.subset(sorted(shuffled[:n_train])), ds.subset(sorted(shuffled[n_train:]))


def average_per_entity(ds: SequenceDataset) -> AveragedTable:
    """One row per sequence holding the column means over that sequence."""
    if len(ds) == 0:
        raise ConfigError("cannot average an empty dataset")
    values = np.stack([s.rows().mean(axis=0) for s in ds.sequences])
    return AveragedTable(columns=ds.columns, values=values)


# ---------------------------------------------------------------------------
# synthetic cohort
# ---------------------------------------------------------------------------

_FEATURE_ROLES = ("task_duration", "interactions", "accuracy")


def make_synthetic_cohort(seed: int, n_entities: int = 56, max_len: int = 160, n_features: int = 3) -> RawEventTable:
    """Deterministic stand-in cohort of cognitively impaired users.

    Each entity gets a static ``severity`` in [0, 1], an integer MMST series
    in [0, 30] that declines along a noisy random walk, and ``n_features``
    series mixing a sinusoid, noise and a severity-dependent trend.  Lengths
    lie in ``[3, max_len]``.
    """
    if n_entities < 2:
        raise ConfigError("need at least two entities")
    if max_len < 3:
        raise ConfigError("max_len must be >= 3")
    if n_features < 1:
        raise ConfigError("need at least one feature")
    rng = rng_mod.derive(seed, "cohort")
    names = ("severity",) + tuple(
        _FEATURE_ROLES[k] if k < len(_FEATURE_ROLES) else f"feature_{k}" for k in range(n_features)
    )
    width = len(str(n_entities))
    ids, dates, feats, mmst = [], [], [], []
    base = np.datetime64("2020-01-01", "D")
    for e in range(n_entities):
        severity = rng.beta(2.0, 2.0)
        length = 3 + int(round((max_len - 3) * rng.beta(4.0, 1.5)))
        start = base + int(rng.integers(0, 365))
        gaps = rng.integers(1, 8, size=length)
        gaps[0] = 0
        day = start + np.cumsum(gaps)

        level = 29.0 - 18.0 * severity + rng.normal(0.0, 1.5)
        drift = 0.02 + 0.06 * severity
        latent = np.empty(length)
        for t in range(length):
            level += -drift + rng.normal(0.0, 0.35)
            latent[t] = level
        score = np.clip(np.round(latent), 0.0, MMST_MAX) + 0.0

        cols = [np.full(length, round(float(severity), 4))]
        tt = np.arange(length)
        for k in range(n_features):
            period = rng.uniform(6.0, 20.0)
            phase = rng.uniform(0.0, 2 * np.pi)
            amp = rng.uniform(0.5, 1.5)
            trend = (1.0 + k) * severity * tt / max_len
            base_level = 5.0 + 3.0 * k + 4.0 * severity * (1 if k % 2 == 0 else -1)
            series = base_level + amp * np.sin(2 * np.pi * tt / period + phase) + trend + rng.normal(0.0, 0.3, size=length)
            cols.append(np.round(series, 4))
        ids.extend([f"u{e:0{width}d}"] * length)
        dates.append(day)
        feats.append(np.column_stack(cols))
        mmst.append(score)
    return RawEventTable(
        entity_ids=np.array(ids, dtype=object),
        dates=np.concatenate(dates).astype("datetime64[D]"),
        features=np.concatenate(feats),
        user_mmst=np.concatenate(mmst),
        feature_names=names,
        attribute_names=("severity",),
    ).sorted()
