"""Sweep configuration and its flat ``key = value`` file format.

One setting per line, ``#`` starts a comment, lists are comma separated::

    sigma_list = 0, 1, 2, 3, 4, 5, 6, 8
    seeds = 0, 1, 2, 3, 4
    models = vae, jepa, pca_5_8
    env.T = 10000
    train.steps = 4000
    model.pca_5_8.kind = pca
    model.pca_5_8.slice_start = 4

Keys: ``env.<field>`` for every EnvParams field except ``sigma`` and
``seed``; ``train.<field>`` for every ModelConfig field (defaults shared by
all models); ``model.<name>.<field>`` per-model overrides plus ``kind``;
and the top-level keys in ``TOP_LEVEL``. Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .env import EnvParams
from .models import KINDS, ModelConfig

ENV_KEYS = tuple(f.name for f in dataclasses.fields(EnvParams) if f.name not in ("sigma", "seed"))
TRAIN_KEYS = tuple(f.name for f in dataclasses.fields(ModelConfig))
TOP_LEVEL = ("sigma_list", "seeds", "models", "output_dir", "workers", "intercept",
             "scatter_sigmas", "record_timing")

# named model entries that are not bare kinds
ALIASES = {
    "pca_1_4": ("pca", {"slice_start": 0}),
    "pca_5_8": ("pca", {"slice_start": 4}),
}

DEFAULT_MODELS = ("vae", "jepa", "predvae", "latentpredvae", "predenc", "randproj",
                  "pca_1_4", "pca_5_8", "gatedpredae")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    name: str
    kind: str
    overrides: tuple[tuple[str, object], ...] = ()

    def config(self, base: ModelConfig) -> ModelConfig:
        return base.with_overrides(**dict(self.overrides))


def _default_specs() -> tuple[ModelSpec, ...]:
    return tuple(_resolve_model(name, {}) for name in DEFAULT_MODELS)


@dataclass(frozen=True)
class SweepConfig:
    env: dict = field(default_factory=dict)  # EnvParams overrides, minus sigma/seed
    sigma_list: tuple[float, ...] = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    models: tuple[ModelSpec, ...] = field(default_factory=_default_specs)
    train: ModelConfig = field(default_factory=ModelConfig)
    output_dir: str = "runs/default"
    workers: int = 1
    intercept: bool = False
    scatter_sigmas: tuple[float, ...] = (0.0, 6.0)
    record_timing: bool = False

    def __post_init__(self):
        unknown = set(self.env) - set(ENV_KEYS)
        if unknown:
            raise ConfigError(f"env: unknown key(s) {sorted(unknown)}")
        full = {k: getattr(EnvParams(), k) for k in ENV_KEYS}
        full.update(self.env)
        object.__setattr__(self, "env", full)
        validate(self)

    def env_params(self, sigma: float, seed: int) -> EnvParams:
        return EnvParams(**self.env, sigma=sigma, seed=seed)

    def model_config(self, spec: ModelSpec) -> ModelConfig:
        return spec.config(self.train)


def validate(cfg: SweepConfig) -> None:
    s = list(cfg.sigma_list)
    if not s:
        raise ConfigError("sigma_list: must be non-empty")
    if any(x < 0 for x in s):
        raise ConfigError("sigma_list: values must be non-negative")
    if any(b <= a for a, b in zip(s, s[1:])):
        raise ConfigError("sigma_list: must be strictly increasing")
    if not cfg.seeds:
        raise ConfigError("seeds: must be non-empty")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        raise ConfigError("seeds: must be distinct")
    if any(x < 0 or x >= 2**64 for x in cfg.seeds):
        raise ConfigError("seeds: must be unsigned 64-bit integers")
    if not cfg.models:
        raise ConfigError("models: must be non-empty")
    names = [m.name for m in cfg.models]
    if len(set(names)) != len(names):
        raise ConfigError("models: names must be distinct")
    if cfg.workers < 1:
        raise ConfigError("workers: must be >= 1")
    unknown = set(cfg.env) - set(ENV_KEYS)
    if unknown:
        raise ConfigError(f"env: unknown key(s) {sorted(unknown)}")
    try:
        EnvParams(**cfg.env, sigma=s[0], seed=0)
        for m in cfg.models:
            m.config(cfg.train)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def _resolve_model(name: str, overrides: dict) -> ModelSpec:
    overrides = dict(overrides)
    kind = overrides.pop("kind", None)
    if kind is None:
        if name in ALIASES:
            kind, base = ALIASES[name]
            overrides = {**base, **overrides}
        elif name in KINDS:
            kind = name
        else:
            raise ConfigError(f"models: {name!r} is not a model kind; set model.{name}.kind")
    if kind not in KINDS:
        raise ConfigError(f"model.{name}.kind: unknown kind {kind!r}")
    unknown = set(overrides) - set(TRAIN_KEYS)
    if unknown:
        raise ConfigError(f"model.{name}: unknown key(s) {sorted(unknown)}")
    return ModelSpec(name, kind, tuple(sorted(overrides.items())))


# --- text format ------------------------------------------------------------

def _parse_scalar(text: str, like):
    text = text.strip()
    if isinstance(like, bool):
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def _parse_list(text: str, conv) -> tuple:
    return tuple(conv(p.strip()) for p in text.split(",") if p.strip())


def loads(text: str) -> SweepConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    defaults = SweepConfig()
    env_defaults = EnvParams()
    kw: dict = {}
    env: dict = {}
    train: dict = {}
    per_model: dict[str, dict] = {}
    try:
        for key, value in raw.items():
            if key.startswith("env."):
                name = key[4:]
                if name not in ENV_KEYS:
                    raise ConfigError(f"unknown key {key!r}")
                env[name] = _parse_scalar(value, getattr(env_defaults, name))
            elif key.startswith("train."):
                name = key[6:]
                if name not in TRAIN_KEYS:
                    raise ConfigError(f"unknown key {key!r}")
                train[name] = _parse_scalar(value, getattr(defaults.train, name))
            elif key.startswith("model."):
                parts = key.split(".")
                if len(parts) != 3:
                    raise ConfigError(f"unknown key {key!r}")
                _, mname, fname = parts
                if fname != "kind" and fname not in TRAIN_KEYS:
                    raise ConfigError(f"unknown key {key!r}")
                like = "" if fname == "kind" else getattr(defaults.train, fname)
                per_model.setdefault(mname, {})[fname] = _parse_scalar(value, like)
            elif key in ("sigma_list", "scatter_sigmas"):
                kw[key] = _parse_list(value, float)
            elif key == "seeds":
                kw[key] = _parse_list(value, int)
            elif key == "models":
                kw[key] = _parse_list(value, str)
            elif key in TOP_LEVEL:
                kw[key] = _parse_scalar(value, getattr(defaults, key))
            else:
                raise ConfigError(f"unknown key {key!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{key}: {exc}") from exc

    names = kw.pop("models", None) or tuple(m.name for m in defaults.models)
    stray = set(per_model) - set(names)
    if stray:
        raise ConfigError(f"model overrides for models not listed in 'models': {sorted(stray)}")
    kw["models"] = tuple(_resolve_model(n, per_model.get(n, {})) for n in names)
    try:
        kw["train"] = ModelConfig(**train)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return SweepConfig(env=env, **kw)


def load(path) -> SweepConfig:
    return loads(Path(path).read_text())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dumps(cfg: SweepConfig) -> str:
    """Serialise with every default spelled out (used for the metadata echo)."""
    lines = [
        "sigma_list = " + ", ".join(_fmt(float(s)) for s in cfg.sigma_list),
        "seeds = " + ", ".join(str(s) for s in cfg.seeds),
        "models = " + ", ".join(m.name for m in cfg.models),
        f"output_dir = {cfg.output_dir}",
        f"workers = {cfg.workers}",
        f"intercept = {_fmt(cfg.intercept)}",
        "scatter_sigmas = " + ", ".join(_fmt(float(s)) for s in cfg.scatter_sigmas),
        f"record_timing = {_fmt(cfg.record_timing)}",
    ]
    lines += [f"env.{k} = {_fmt(cfg.env[k])}" for k in ENV_KEYS]
    lines += [f"train.{k} = {_fmt(getattr(cfg.train, k))}" for k in TRAIN_KEYS]
    for m in cfg.models:
        lines.append(f"model.{m.name}.kind = {m.kind}")
        lines += [f"model.{m.name}.{k} = {_fmt(v)}" for k, v in m.overrides]
    return "\n".join(lines) + "\n"


def parse_config(path) -> SweepConfig:
    """``path`` may be a file or the word ``default`` for the shipped config."""
    if str(path) == "default":
        return SweepConfig()
    return load(path)
