"""Stage-by-stage execution of the full experiment, with caching.

Stages run in order ``ingest -> train -> generate -> evaluate -> attack ->
report``.  Each stage's output is cached under ``<out>/cache/<stage>/<key>``
where ``key`` hashes the stage's config subtree, the seed and the keys of the
stages it reads from, so editing one part of the config only re-runs what
depends on it.
"""

from __future__ import annotations

import csv
import io
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from synthguard import __version__
from synthguard import dataset as D
from synthguard import rng as rng_mod
from synthguard.attacks import PrivacyReport, attack_suite, evaluator_attack_input
from synthguard.errors import ConfigError, StageError, SynthGuardError
from synthguard.evaluation.qog import SYNTH_LABELS, QogReport, run_qog, sequences_from_rows
from synthguard.generators import GanConfig, TrainLog, generate_rows, load_model, save_model
from synthguard.generators.flat import train_medgan, train_simple_gan
from synthguard.generators.timeseries import train_timeseries_gan
from synthguard.pipeline import store
from synthguard.pipeline.config import MODEL_LABELS, MODEL_NAMES, PipelineConfig, config_hash, dump_ini, subtree_hash

STAGES = ("ingest", "train", "generate", "evaluate", "attack", "report")
PRIVACY_ORDER = ("Real", "MedGAN", "SimpleGAN", "DG", "DPGAN (DG)", "PPGAN")
GAN_SPLIT_RATIO = 0.7
LOG = logging.getLogger("synthguard.pipeline")


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get("SYNTHGUARD_THREADS", "").strip()
    limit = int(cap) if cap else (os.cpu_count() or 1)
    if limit < 1:
        raise ConfigError("SYNTHGUARD_THREADS must be >= 1")
    return max(1, min(limit, n_tasks))


# -- bundle -------------------------------------------------------------------


@dataclass
class EvalBundle:
    qog_report: QogReport
    privacy_report: PrivacyReport
    train_logs: dict[str, TrainLog] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "qog_report": self.qog_report.to_dict(),
            "privacy_report": self.privacy_report.to_dict(),
            "train_logs": {k: v.to_dict() for k, v in self.train_logs.items()},
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvalBundle:
        return cls(
            QogReport.from_dict(d["qog_report"]),
            PrivacyReport.from_dict(d["privacy_report"]),
            {k: TrainLog.from_dict(v) for k, v in d["train_logs"].items()},
            dict(d["provenance"]),
        )


# -- training worker (top level so it can cross process boundaries) ------------


def _train_one(name: str, config: dict, ingest_dir: str, target_dir: str, seed: int) -> None:
    cfg = GanConfig.from_dict(config)
    real = store.load_sequences(Path(ingest_dir) / "gan_train.npz")
    norm = D.NormalizationParams.from_dict(store.read_json(Path(ingest_dir) / "normalization.json"))
    normalized, _ = D.normalize(real, norm)
    rng = rng_mod.derive(seed, "train", name)
    started = time.perf_counter()
    if cfg.kind == "timeseries":
        model, log = train_timeseries_gan(normalized, cfg, rng)
    elif cfg.kind == "medgan":
        model, log = train_medgan(normalized.stacked(), cfg, rng, norm)
    else:
        model, log = train_simple_gan(normalized.stacked(), cfg, rng, norm)
    target = Path(target_dir)
    save_model(model, target / "model.npz")
    store.write_json(target / "log.json", log.to_dict())
    store.write_json(
        target / "meta.json",
        {"trained_at": datetime.now(timezone.utc).isoformat(), "seconds": round(time.perf_counter() - started, 3)},
    )


# -- pipeline -------------------------------------------------------------------


class Pipeline:
    def __init__(self, cfg: PipelineConfig, only: tuple[str, ...] | None = None):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.cache = store.StageCache(self.out / "cache")
        if only:
            unknown = set(only) - set(cfg.models)
            if unknown:
                raise ConfigError(f"--only names models not in the config: {sorted(unknown)}")
        self.only = tuple(only) if only else tuple(cfg.models)
        self._results: dict[str, object] = {}

    # keys

    def _key(self, stage: str, *parts) -> str:
        return subtree_hash([stage, self.cfg.seed, *parts])

    def ingest_key(self) -> str:
        return self._key("ingest", {**self.cfg.to_dict()["data"], "max_len": self.cfg.max_len})

    def train_key(self, name: str) -> str:
        return self._key("train", self.ingest_key(), name, self.cfg.models[name].to_dict())

    def generate_key(self, name: str) -> str:
        return self._key("generate", self.train_key(name), self.cfg.n_generate)

    def _all_generate_keys(self) -> dict[str, str]:
        self._require_all_models()
        return {n: self.generate_key(n) for n in MODEL_NAMES}

    def evaluate_key(self) -> str:
        return self._key("evaluate", self.ingest_key(), self._all_generate_keys(), self.cfg.evaluator.to_dict())

    def attack_key(self) -> str:
        return self._key(
            "attack", self.ingest_key(), self._all_generate_keys(), self.cfg.evaluator.to_dict(), self.cfg.attack_types
        )

    def _require_all_models(self) -> None:
        missing = [n for n in MODEL_NAMES if n not in self.cfg.models]
        if missing:
            raise ConfigError(f"evaluation needs all five models; config lacks {missing}")

    # stages

    def _stage(self, name: str, fn):
        # later stages call earlier ones; run each at most once per instance
        if name in self._results:
            return self._results[name]
        LOG.info("stage %s: start", name)
        started = time.perf_counter()
        try:
            result = fn()
        except StageError:
            raise
        except (SynthGuardError, OSError, ValueError, ArithmeticError) as exc:
            LOG.error("stage %s failed: %s: %s", name, type(exc).__name__, exc)
            raise StageError(name, exc) from exc
        LOG.info("stage %s: done in %.1fs", name, time.perf_counter() - started)
        self._results[name] = result
        return result

    def _load_table(self) -> D.RawEventTable:
        src = self.cfg.data
        if src.input:
            return D.ingest_events(src.input, D.EventSchema(attribute_names=src.attributes))
        if src.cohort_seed is not None:
            return D.make_synthetic_cohort(src.cohort_seed, src.cohort_entities)
        return D.load_bundled_cohort()

    def ingest(self) -> Path:
        def run():
            key = self.ingest_key()
            if self.cache.has("ingest", key):
                LOG.info("ingest: cached %s", key)
                return self.cache.path("ingest", key)
            path = self.cache.begin("ingest", key)
            real = D.build_sequences(self._load_table(), self.cfg.max_len)
            norm = D.fit_normalization(real)
            gan_train, holdout = D.split(real, GAN_SPLIT_RATIO, self.cfg.seed)
            store.save_sequences(real, path / "real.npz")
            store.save_sequences(gan_train, path / "gan_train.npz")
            store.save_sequences(holdout, path / "holdout.npz")
            store.write_json(path / "normalization.json", norm.to_dict())
            self.cache.commit("ingest", key)
            LOG.info("ingest: %d sequences, %d rows", len(real), real.n_rows)
            return path

        return self._stage("ingest", run)

    def real_data(self):
        path = self.ingest()
        norm = D.NormalizationParams.from_dict(store.read_json(path / "normalization.json"))
        return (
            store.load_sequences(path / "real.npz"),
            store.load_sequences(path / "gan_train.npz"),
            store.load_sequences(path / "holdout.npz"),
            norm,
        )

    def train(self) -> dict[str, Path]:
        ingest_dir = self.ingest()

        def run():
            todo, paths = [], {}
            for name in self.only:
                key = self.train_key(name)
                paths[name] = self.cache.path("train", key)
                if self.cache.has("train", key):
                    LOG.info("train %s: cached %s", name, key)
                else:
                    self.cache.begin("train", key)
                    todo.append((name, key))
            jobs = [
                (name, self.cfg.models[name].to_dict(), str(ingest_dir), str(paths[name]), self.cfg.seed)
                for name, _ in todo
            ]
            workers = worker_count(len(jobs))
            if workers == 1:
                for job in jobs:
                    LOG.info("train %s: start", job[0])
                    _train_one(*job)
            elif jobs:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    futures = [pool.submit(_train_one, *job) for job in jobs]
                    for f in futures:
                        f.result()
            for name, key in todo:
                self.cache.commit("train", key)
                LOG.info("train %s: done", name)
            return paths

        return self._stage("train", run)

    def generate(self) -> dict[str, Path]:
        train_paths = self.train()

        def run():
            real, _, _, _ = self.real_data()
            paths = {}
            for name in self.only:
                key = self.generate_key(name)
                path = paths[name] = self.cache.path("generate", key)
                if self.cache.has("generate", key):
                    LOG.info("generate %s: cached %s", name, key)
                    continue
                self.cache.begin("generate", key)
                model = load_model(train_paths[name] / "model.npz")
                out = generate_rows(model, self.cfg.n_generate, rng_mod.derive(self.cfg.seed, "generate", name))
                heuristic = not isinstance(out, D.SequenceDataset)
                synth = sequences_from_rows(out, real) if heuristic else out
                store.save_sequences(synth, path / "synthetic.npz")
                store.write_json(path / "meta.json", {"heuristic_lengths": heuristic, "rows": synth.n_rows})
                self.cache.commit("generate", key)
                LOG.info("generate %s: %d rows in %d sequences", name, synth.n_rows, len(synth))
            for name, path in paths.items():
                _write_synthetic_csv(store.load_sequences(path / "synthetic.npz"), self.out / "synthetic" / f"{name}.csv")
            return paths

        return self._stage("generate", run)

    def synthetic(self) -> tuple[dict[str, D.SequenceDataset], set[str]]:
        """Synthetic datasets keyed by display label, and the labels cut heuristically."""
        paths = self.generate()
        data, heuristic = {}, set()
        for name in MODEL_NAMES:
            label = MODEL_LABELS[name]
            data[label] = store.load_sequences(paths[name] / "synthetic.npz")
            if store.read_json(paths[name] / "meta.json")["heuristic_lengths"]:
                heuristic.add(label)
        return {label: data[label] for label in SYNTH_LABELS}, heuristic

    def evaluate(self) -> QogReport:
        self._require_all_models()
        synth, heuristic = self.synthetic()

        def run():
            key = self.evaluate_key()
            if self.cache.has("evaluate", key):
                LOG.info("evaluate: cached %s", key)
                return QogReport.from_dict(store.read_json(self.cache.path("evaluate", key) / "qog_report.json"))
            path = self.cache.begin("evaluate", key)
            real, _, _, norm = self.real_data()
            report = run_qog(real, synth, norm, self.cfg.evaluator, self.cfg.seed, heuristic)
            store.write_json(path / "qog_report.json", report.to_dict())
            self.cache.commit("evaluate", key)
            return report

        return self._stage("evaluate", run)

    def attack(self) -> PrivacyReport:
        self._require_all_models()
        synth, _ = self.synthetic()

        def run():
            key = self.attack_key()
            if self.cache.has("attack", key):
                LOG.info("attack: cached %s", key)
                return PrivacyReport.from_dict(store.read_json(self.cache.path("attack", key) / "privacy_report.json"))
            path = self.cache.begin("attack", key)
            _, gan_train, holdout, norm = self.real_data()
            inputs = {}
            for label in PRIVACY_ORDER:
                fit_on = gan_train if label == "Real" else synth[label]
                rng = rng_mod.derive(self.cfg.seed, "attack-target", label)
                inputs[label] = evaluator_attack_input(fit_on, gan_train, holdout, norm, self.cfg.evaluator, rng)
                LOG.info("attack: target for %s ready", label)
            report = attack_suite(inputs, self.cfg.seed, self.cfg.attack_types)
            store.write_json(path / "privacy_report.json", report.to_dict())
            self.cache.commit("attack", key)
            return report

        return self._stage("attack", run)

    def train_logs(self) -> tuple[dict[str, TrainLog], dict[str, dict]]:
        paths = self.train()
        logs, meta = {}, {}
        for name in self.only:
            logs[name] = TrainLog.from_dict(store.read_json(paths[name] / "log.json"))
            meta[name] = store.read_json(paths[name] / "meta.json")
        return logs, meta

    def provenance(self, train_meta: dict[str, dict]) -> dict:
        return {
            "config_hash": config_hash(self.cfg),
            "seed": self.cfg.seed,
            "version": __version__,
            "trained_at": {k: v["trained_at"] for k, v in train_meta.items()},
            "stage_keys": {
                "ingest": self.ingest_key(),
                "train": {n: self.train_key(n) for n in self.only},
                "generate": {n: self.generate_key(n) for n in self.only},
                "evaluate": self.evaluate_key(),
                "attack": self.attack_key(),
            },
        }

    def report(self) -> EvalBundle:
        qog = self.evaluate()
        privacy = self.attack()

        def run():
            logs, meta = self.train_logs()
            bundle = EvalBundle(qog, privacy, logs, self.provenance(meta))
            emit_reports(bundle, self.out)
            store.write_text(self.out / "config.ini", dump_ini(self.cfg))
            return bundle

        return self._stage("report", run)

    def run(self, upto: str = "report"):
        if upto not in STAGES:
            raise ConfigError(f"unknown stage {upto!r}; choose from {STAGES}")
        return getattr(self, upto)()


def _write_synthetic_csv(ds: D.SequenceDataset, path: Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("sequence", "step", *ds.columns))
    for i, seq in enumerate(ds.sequences):
        for t, row in enumerate(seq.rows()):
            writer.writerow((i, t, *(repr(float(v)) for v in row)))
    store.write_text(path, buf.getvalue())


# -- reports ----------------------------------------------------------------------


def emit_reports(bundle: EvalBundle, out_dir: str | os.PathLike, plots: bool = True) -> list[Path]:
    """JSON and CSV tables, the bundle itself, and ACF line plots when matplotlib is present."""
    out = Path(out_dir)
    written = []
    for name, text in (
        ("qog_report.csv", bundle.qog_report.to_csv()),
        ("privacy_report.csv", bundle.privacy_report.to_csv()),
    ):
        store.write_text(out / name, text)
        written.append(out / name)
    for name, obj in (
        ("qog_report.json", bundle.qog_report.to_dict()),
        ("privacy_report.json", bundle.privacy_report.to_dict()),
        ("bundle.json", bundle.to_dict()),
    ):
        store.write_json(out / name, obj)
        written.append(out / name)
    if plots:
        from synthguard.pipeline.plots import plot_acf

        for series, fname, title in (
            (bundle.qog_report.acf, "acf_user_mmst.svg", "Autocorrelation of user_mmst"),
            (bundle.qog_report.acf_averaged, "acf_user_mmst_averaged.svg", "Autocorrelation of user_mmst (per-entity means)"),
        ):
            path = plot_acf(series, out / fname, title)
            if path is not None:
                written.append(path)
    return written


def load_bundle(out_dir: str | os.PathLike) -> EvalBundle:
    return EvalBundle.from_dict(store.read_json(Path(out_dir) / "bundle.json"))
