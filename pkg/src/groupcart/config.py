"""Experiment configuration: an INI-style file whose every key a CLI flag can override.

Example::

    [data]
    source = synthetic
    synthetic = n=5000 bias=0.4 seed=3

    [split]
    seed = 7
    repeats = 20

    [ensemble]
    size = 20
    mode = plain
    domination = binary
    objectives = accuracy f1 aod di

    [output]
    out = results
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .data import (
    GERMAN_ENCODINGS,
    GERMAN_PROTECTED,
    Dataset,
    Encoding,
    ProtectedSpec,
    SplitPlan,
    german_credit_path,
    load_csv,
    make_synthetic_biased,
)
from .ensemble import DEFAULT_OBJECTIVES, EnsembleConfig
from .errors import ConfigError
from .tree import TreeHyper

SEED_ENV = "GROUPCART_SEED"
BUILTIN_GERMAN = "german"
SYNTHETIC = "synthetic"


def _words(text: str) -> list[str]:
    return [w for w in re.split(r"[\s,]+", text.strip()) if w]


def _items(text: str) -> list[str]:
    return [w.strip() for w in re.split(r"[;\n]", text) if w.strip()]


def parse_synthetic(text: str) -> dict:
    """``n=5000 bias=0.4 seed=3`` -> keyword arguments for the generator."""
    out = {"n": 1000, "bias": 0.4, "seed": 0}
    for word in _words(text):
        key, sep, value = word.partition("=")
        if not sep or key not in out:
            raise ConfigError(f"bad synthetic parameter {word!r}; expected n=, bias=, seed=")
        try:
            out[key] = float(value) if key == "bias" else int(value)
        except ValueError:
            raise ConfigError(f"bad synthetic parameter {word!r}") from None
    return out


@dataclass
class ExperimentConfig:
    source: str = SYNTHETIC
    synthetic: dict = field(default_factory=lambda: parse_synthetic(""))
    target: str | None = None
    favorable: str | None = None
    protected: list[ProtectedSpec] = field(default_factory=list)
    encodings: dict[str, Encoding] = field(default_factory=dict)
    plan: SplitPlan = field(default_factory=SplitPlan)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    methods: tuple[str, ...] = ("cart", "groupcart")
    sizes: tuple[int, ...] = (5, 10, 20)
    jobs: int = 1
    out: Path = Path("results")
    precision: int = 1
    name: str | None = None
    repeat_index: int = 0

    @property
    def dataset_name(self) -> str:
        if self.name:
            return self.name
        if self.source in (SYNTHETIC, BUILTIN_GERMAN):
            return self.source
        return Path(self.source).stem

    def declarations(self) -> dict:
        """Everything needed to reload the same data, as plain strings."""
        return {
            "source": self.source,
            "synthetic": dict(self.synthetic),
            "target": self.target,
            "favorable": self.favorable,
            "protected": [str(p) for p in self.protected],
            "encodings": {
                k: e.kind + (": " + " | ".join(e.levels) if e.levels else "") for k, e in sorted(self.encodings.items())
            },
        }


def read_file(path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return {s: dict(parser[s]) for s in parser.sections()}


def _int(value, key):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _float(value, key):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {value!r}") from None


def build(file_values: dict | None = None, overrides: dict | None = None, environ=None) -> ExperimentConfig:
    """Merge file values (``{section: {key: value}}``) with flag overrides.

    ``overrides`` uses flat keys (``seed``, ``repeats``, ``data``, ...); a
    value of None means "not given". The seed falls back to the
    ``GROUPCART_SEED`` environment variable, then 0.
    """
    f = file_values or {}
    o = {k: v for k, v in (overrides or {}).items() if v is not None}
    environ = os.environ if environ is None else environ

    def get(section, key, flag=None):
        if flag and flag in o:
            return o[flag]
        return f.get(section, {}).get(key)

    cfg = ExperimentConfig()
    source = get("data", "source", "data")
    if source is not None:
        cfg.source = str(source)
    synth = get("data", "synthetic", "synthetic")
    if cfg.source.startswith(SYNTHETIC + ":"):
        synth = cfg.source.partition(":")[2].replace(",", " ")
        cfg.source = SYNTHETIC
    if synth is not None:
        cfg.synthetic = parse_synthetic(synth)
    cfg.target = get("data", "target", "target")
    cfg.favorable = get("data", "favorable", "favorable")
    cfg.name = get("data", "name", "name")

    protected = o.get("protected") or _items(f.get("data", {}).get("protected", ""))
    cfg.protected = [p if isinstance(p, ProtectedSpec) else ProtectedSpec.parse(p) for p in protected]
    encodings = {k: Encoding.parse(v) for k, v in f.get("encoding", {}).items()}
    for item in o.get("encoding") or []:
        col, sep, spec = item.partition("=")
        if not sep:
            raise ConfigError(f"encoding must look like column=onehot or column=ordinal:a|b, got {item!r}")
        encodings[col.strip()] = Encoding.parse(spec)
    cfg.encodings = encodings

    if cfg.source == BUILTIN_GERMAN:
        cfg.target = cfg.target or "creditability"
        cfg.favorable = cfg.favorable or "good"
        cfg.protected = cfg.protected or list(GERMAN_PROTECTED)
        cfg.encodings = {**GERMAN_ENCODINGS, **cfg.encodings}

    seed = get("split", "seed", "seed")
    if seed is None:
        seed = environ.get(SEED_ENV, 0)
    repeats = get("split", "repeats", "repeats")
    cfg.plan = SplitPlan(seed=_int(seed, "seed"), repeats=_int(repeats if repeats is not None else 20, "repeats"))
    ri = get("split", "repeat_index", "repeat_index")
    cfg.repeat_index = _int(ri, "repeat_index") if ri is not None else 0

    hyper_kwargs = {}
    for key, conv in (("max_depth", _int), ("min_samples_leaf", _int), ("min_gain", _float)):
        v = get("tree", key, key)
        if v is not None:
            hyper_kwargs[key] = conv(v, key)
    size = get("ensemble", "size", "ensemble_size")
    objectives = get("ensemble", "objectives", "objectives")
    proportions = get("ensemble", "proportions", "proportions")
    voting = get("ensemble", "voting", "voting") or "soft"
    if voting not in ("soft", "hard"):
        raise ConfigError(f"voting must be soft or hard, got {voting!r}")
    if isinstance(objectives, str):
        objectives = _words(objectives)
    if isinstance(proportions, str):
        proportions = [_float(p, "proportions") for p in _words(proportions)]
    cfg.ensemble = EnsembleConfig(
        size_n=_int(size, "ensemble size") if size is not None else 20,
        mode=get("ensemble", "mode", "mode") or "plain",
        domination=get("ensemble", "domination", "domination") or "binary",
        objectives=tuple(objectives or DEFAULT_OBJECTIVES),
        proportions=tuple(proportions) if proportions else None,
        soft_voting=voting == "soft",
        hyper=TreeHyper(**hyper_kwargs),
    )

    methods = get("experiment", "methods", "methods")
    if methods is not None:
        cfg.methods = tuple(_words(methods) if isinstance(methods, str) else methods)
    sizes = get("experiment", "sizes", "sizes")
    if sizes is not None:
        cfg.sizes = tuple(_int(s, "sizes") for s in (_words(sizes) if isinstance(sizes, str) else sizes))
    jobs = get("experiment", "jobs", "jobs")
    if jobs is not None:
        cfg.jobs = _int(jobs, "jobs")
    out = get("output", "out", "out")
    if out is not None:
        cfg.out = Path(out)
    precision = get("output", "precision", "precision")
    if precision is not None:
        cfg.precision = _int(precision, "precision")
    return cfg


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.source == SYNTHETIC:
        s = cfg.synthetic
        return make_synthetic_biased(int(s["n"]), float(s["bias"]), int(s["seed"]))
    path = german_credit_path() if cfg.source == BUILTIN_GERMAN else Path(cfg.source)
    if cfg.target is None or cfg.favorable is None:
        raise ConfigError("CSV data needs --target and --favorable")
    if not cfg.protected:
        raise ConfigError("CSV data needs at least one --protected name=priv:unpriv")
    return load_csv(path, cfg.target, cfg.favorable, cfg.protected, cfg.encodings)


def from_declarations(decl: dict) -> ExperimentConfig:
    """Inverse of :meth:`ExperimentConfig.declarations` (used to reload a bundle's data)."""
    cfg = ExperimentConfig()
    cfg.source = decl["source"]
    cfg.synthetic = dict(decl.get("synthetic") or cfg.synthetic)
    cfg.target = decl.get("target")
    cfg.favorable = decl.get("favorable")
    cfg.protected = [ProtectedSpec.parse(p) for p in decl.get("protected", [])]
    cfg.encodings = {k: Encoding.parse(v) for k, v in decl.get("encodings", {}).items()}
    return cfg
