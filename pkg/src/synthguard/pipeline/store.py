"""On-disk artifacts and the content-addressed stage cache."""

from __future__ import annotations

import json
import os
import shutil
from pathlib import Path

import numpy as np

from synthguard.dataset import EntitySequence, NormalizationParams, SequenceDataset
from synthguard.errors import IoError


def save_sequences(ds: SequenceDataset, path: str | os.PathLike) -> None:
    header = {
        "max_len": ds.max_len,
        "feature_names": list(ds.feature_names),
        "attribute_names": list(ds.attribute_names),
        "normalization": ds.normalization.to_dict() if ds.normalization is not None else None,
    }
    lengths = ds.lengths
    a, f = ds.n_attributes, ds.n_features
    with open(path, "wb") as fh:
        np.savez(
            fh,
            __header__=np.array(json.dumps(header, sort_keys=True)),
            lengths=lengths,
            attributes=np.array([s.attributes for s in ds.sequences]).reshape(len(ds), a),
            features=np.concatenate([s.features for s in ds.sequences]) if len(ds) else np.zeros((0, f)),
            labels=ds.labels(),
        )


def load_sequences(path: str | os.PathLike) -> SequenceDataset:
    with np.load(path, allow_pickle=False) as npz:
        header = json.loads(str(npz["__header__"]))
        lengths, attrs, feats, labels = npz["lengths"], npz["attributes"], npz["features"], npz["labels"]
    bounds = np.r_[0, np.cumsum(lengths)]
    seqs = tuple(
        EntitySequence(attrs[i].copy(), feats[lo:hi].copy(), labels[lo:hi].copy())
        for i, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:]))
    )
    norm = header["normalization"]
    return SequenceDataset(
        seqs,
        header["max_len"],
        tuple(header["feature_names"]),
        tuple(header["attribute_names"]),
        NormalizationParams.from_dict(norm) if norm else None,
    )


def write_text(path: str | os.PathLike, text: str) -> None:
    """Write atomically so an interrupted run never leaves a half-written file."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_json(path: str | os.PathLike, obj) -> None:
    write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: str | os.PathLike):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


class StageCache:
    """Directories keyed by ``(stage, key)`` under ``root``.

    An entry counts as present only once its ``DONE`` marker exists, which is
    written after every artifact of the stage.
    """

    MARKER = "DONE"

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def path(self, stage: str, key: str) -> Path:
        return self.root / stage / key

    def has(self, stage: str, key: str) -> bool:
        return (self.path(stage, key) / self.MARKER).exists()

    def begin(self, stage: str, key: str) -> Path:
        p = self.path(stage, key)
        if p.exists():
            shutil.rmtree(p)
        try:
            p.mkdir(parents=True)
        except OSError as exc:
            raise IoError(f"cannot create cache directory {p}: {exc}") from exc
        return p

    def commit(self, stage: str, key: str) -> None:
        (self.path(stage, key) / self.MARKER).write_text("", encoding="utf-8")

    def clear(self, stage: str) -> None:
        shutil.rmtree(self.root / stage, ignore_errors=True)
