"""Pipeline configuration and its INI representation.

Layout::

    [pipeline]        seed, out, n_generate, max_len, models
    [data]            input (empty = bundled cohort), attributes, cohort_seed, cohort_entities
    [evaluator]       EvaluatorConfig fields
    [attack]          types
    [model.<name>]    GanConfig fields, plus dp = on|off and dp_<field> keys
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

from synthguard.errors import ConfigError
from synthguard.evaluation.evaluator import EvaluatorConfig
from synthguard.generators.config import GanConfig, default_presets
from synthguard.privacy import DpConfig

MODEL_NAMES = ("simple", "medgan", "timeseries", "dpgan", "ppgan")
MODEL_LABELS = {name: preset.label for name, preset in default_presets().items()}
ATTACK_TYPES = ("TA", "LR")
DEMO_EPOCHS = 500
DEMO_N_GENERATE = 2000
FULL_EPOCHS = 10_000
FULL_N_GENERATE = 10_000
BUNDLED_MAX_LEN = 150

_TUPLE_FIELDS = ("generator_widths", "discriminator_widths", "autoencoder_widths")


@dataclass(frozen=True)
class DataSource:
    """Either a CSV path or, when ``input`` is empty, a cohort.

    ``cohort_seed = None`` means the bundled cohort file; otherwise a fresh
    synthetic cohort is generated with that seed.  ``attributes`` names the
    static columns of a CSV input.
    """

    input: str = ""
    attributes: tuple[str, ...] = ()
    cohort_seed: int | None = None
    cohort_entities: int = 56


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    out: str = "runs/default"
    n_generate: int = FULL_N_GENERATE
    max_len: int = BUNDLED_MAX_LEN
    models: dict[str, GanConfig] = field(default_factory=dict)
    data: DataSource = field(default_factory=DataSource)
    evaluator: EvaluatorConfig = field(default_factory=EvaluatorConfig)
    attack_types: tuple[str, ...] = ATTACK_TYPES

    def __post_init__(self):
        if self.n_generate < 1:
            raise ConfigError("n_generate must be >= 1")
        if self.max_len < 1:
            raise ConfigError("max_len must be >= 1")
        unknown = set(self.models) - set(MODEL_NAMES)
        if unknown:
            raise ConfigError(f"unknown models {sorted(unknown)}; choose from {MODEL_NAMES}")
        bad = set(self.attack_types) - set(ATTACK_TYPES)
        if bad or not self.attack_types:
            raise ConfigError(f"attack types must be a non-empty subset of {ATTACK_TYPES}")

    def replace(self, **changes) -> PipelineConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "out": self.out,
            "n_generate": self.n_generate,
            "max_len": self.max_len,
            "models": {k: v.to_dict() for k, v in self.models.items()},
            "data": {**asdict(self.data), "attributes": list(self.data.attributes)},
            "evaluator": self.evaluator.to_dict(),
            "attack_types": list(self.attack_types),
        }


def preset_config(demo: bool = False, seed: int = 0, out: str = "runs/default") -> PipelineConfig:
    """The five-model line-up; ``demo`` shrinks epochs and the generated row count."""
    epochs = DEMO_EPOCHS if demo else FULL_EPOCHS
    models = {name: p.config for name, p in default_presets(epochs=epochs, seed=seed).items()}
    return PipelineConfig(
        seed=seed,
        out=out,
        n_generate=DEMO_N_GENERATE if demo else FULL_N_GENERATE,
        models=models,
    )


def with_seed(cfg: PipelineConfig, seed: int) -> PipelineConfig:
    return cfg.replace(seed=seed, models={k: v.replace(seed=seed) for k, v in cfg.models.items()})


def subtree_hash(obj) -> str:
    """Stable short digest of any JSON-serializable value."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _json_default(o):
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    raise TypeError(f"not serializable: {type(o)}")


def config_hash(cfg: PipelineConfig) -> str:
    return subtree_hash(cfg.to_dict())


# -- INI --------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _model_section(cfg: GanConfig) -> dict[str, str]:
    out = {}
    for f in fields(GanConfig):
        if f.name == "dp":
            continue
        out[f.name] = _fmt(getattr(cfg, f.name))
    out["dp"] = "on" if cfg.dp is not None else "off"
    if cfg.dp is not None:
        for f in fields(DpConfig):
            out[f"dp_{f.name}"] = _fmt(getattr(cfg.dp, f.name))
    return out


def dump_ini(cfg: PipelineConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser["pipeline"] = {
        "seed": _fmt(cfg.seed),
        "out": cfg.out,
        "n_generate": _fmt(cfg.n_generate),
        "max_len": _fmt(cfg.max_len),
        "models": _fmt(list(cfg.models)),
    }
    parser["data"] = {k: _fmt(v) for k, v in asdict(cfg.data).items()}
    parser["evaluator"] = {k: _fmt(v) for k, v in cfg.evaluator.to_dict().items()}
    parser["attack"] = {"types": _fmt(cfg.attack_types)}
    for name, model in cfg.models.items():
        parser[f"model.{name}"] = _model_section(model)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _typed(raw: str, kind):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"cannot read {raw!r} as {kind.__name__}") from None
    return raw


_GAN_TYPES = {
    "kind": str, "latent_dim": int, "epochs": int, "batch_size": int, "learning_rate": float,
    "code_dim": int, "lstm_hidden": int, "loss": str, "lipschitz": str, "lipschitz_value": float,
    "steps_per_cell": int, "seed": int,
}  # fmt: skip
_DP_TYPES = {
    "clip_norm": float, "noise_multiplier": float, "delta": float, "schedule": str, "gamma": float, "sigma_floor": float
}  # fmt: skip


def _read_model(name: str, section: configparser.SectionProxy, base: GanConfig | None) -> GanConfig:
    values = base.to_dict() if base is not None else GanConfig().to_dict()
    dp_values = dict(values.get("dp") or {})
    dp_on = values.get("dp") is not None
    for key, raw in section.items():
        if key in _GAN_TYPES:
            values[key] = _typed(raw, _GAN_TYPES[key])
        elif key in _TUPLE_FIELDS:
            values[key] = tuple(_typed(v, int) for v in raw.split(",") if v.strip())
        elif key == "n_critic":
            values[key] = _typed(raw, int) if raw.strip() else None
        elif key == "dp":
            dp_on = _typed(raw, bool)
        elif key.startswith("dp_") and key[3:] in _DP_TYPES:
            dp_values[key[3:]] = _typed(raw, _DP_TYPES[key[3:]])
        else:
            raise ConfigError(f"[model.{name}]: unknown key {key!r}")
    values["dp"] = dp_values if dp_on else None
    return GanConfig.from_dict(values)


def parse_ini(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Read an INI document; anything it leaves out comes from ``base``."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = base or preset_config()
    known = {"pipeline", "data", "evaluator", "attack"}
    for section in parser.sections():
        if section not in known and not section.startswith("model."):
            raise ConfigError(f"unknown config section [{section}]")

    changes: dict = {}
    if parser.has_section("pipeline"):
        sec = parser["pipeline"]
        for key, raw in sec.items():
            if key in ("seed", "n_generate", "max_len"):
                changes[key] = _typed(raw, int)
            elif key == "out":
                changes[key] = raw.strip()
            elif key == "models":
                wanted = [m.strip() for m in raw.split(",") if m.strip()]
                unknown = set(wanted) - set(MODEL_NAMES)
                if unknown:
                    raise ConfigError(f"unknown models {sorted(unknown)}")
                defaults = preset_config(seed=changes.get("seed", cfg.seed)).models
                changes["models"] = {m: cfg.models.get(m, defaults[m]) for m in wanted}
            else:
                raise ConfigError(f"[pipeline]: unknown key {key!r}")
    if parser.has_section("data"):
        d = asdict(cfg.data)
        for key, raw in parser["data"].items():
            if key == "input":
                d[key] = raw.strip()
            elif key == "attributes":
                d[key] = tuple(a.strip() for a in raw.split(",") if a.strip())
            elif key == "cohort_seed":
                d[key] = _typed(raw, int) if raw.strip() else None
            elif key == "cohort_entities":
                d[key] = _typed(raw, int)
            else:
                raise ConfigError(f"[data]: unknown key {key!r}")
        changes["data"] = DataSource(**d)
    if parser.has_section("evaluator"):
        e = cfg.evaluator.to_dict()
        for key, raw in parser["evaluator"].items():
            if key not in e:
                raise ConfigError(f"[evaluator]: unknown key {key!r}")
            e[key] = _typed(raw, float if key == "learning_rate" else int)
        changes["evaluator"] = EvaluatorConfig(**e)
    if parser.has_section("attack"):
        for key, raw in parser["attack"].items():
            if key != "types":
                raise ConfigError(f"[attack]: unknown key {key!r}")
            changes["attack_types"] = tuple(t.strip() for t in raw.split(",") if t.strip())
    models = dict(changes.get("models", cfg.models))
    for section in parser.sections():
        if section.startswith("model."):
            name = section[len("model.") :]
            if name not in MODEL_NAMES:
                raise ConfigError(f"unknown model section [{section}]")
            models[name] = _read_model(name, parser[section], models.get(name))
    changes["models"] = models
    return cfg.replace(**changes)
