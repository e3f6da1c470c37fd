"""Pareto-selected ensembles of fairness-aware trees.

Member ``i`` of an ``N``-member pool puts weight ``i/N`` on the protected
attribute penalty and ``1 - i/N`` on class information gain. Members are
scored on validation data, the non-dominated subset is kept, and the
survivors vote.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import ConfigError, DataError, UsageError
from .metrics import FAIRNESS_METRICS, PERFORMANCE_METRICS, evaluate
from .moo import MAXIMIZE, MINIMIZE, Candidate, ObjectiveSpec, d2h, nd_sort, to_minimization
from .tree import FairTree, TreeHyper, WeightConfig, fit

EPSILON_GUARD = 1e-10
DEFAULT_OBJECTIVES = ("accuracy", "f1", "aod", "di")
METRIC_NAMES = PERFORMANCE_METRICS + FAIRNESS_METRICS


def objective_specs(metrics: Sequence[str], pa_names: Sequence[str]) -> tuple[ObjectiveSpec, ...]:
    """One spec per performance metric and one per (fairness metric, protected attribute).

    Fairness objectives are named ``metric`` when there is a single protected
    attribute and ``metric:attribute`` otherwise.
    """
    specs = []
    for m in metrics:
        if m in PERFORMANCE_METRICS:
            specs.append(ObjectiveSpec(m, MAXIMIZE, 1.0))
        elif m in FAIRNESS_METRICS:
            for pa in pa_names:
                name = m if len(pa_names) == 1 else f"{m}:{pa}"
                specs.append(ObjectiveSpec(name, MINIMIZE, 0.0))
        else:
            raise ConfigError(f"unknown objective {m!r}; choose from {', '.join(METRIC_NAMES)}")
    return tuple(specs)


def _lookup(report, spec_name, pa_names):
    metric, _, pa = spec_name.partition(":")
    if metric in PERFORMANCE_METRICS:
        return report.get(metric)
    return report.get(metric, pa or pa_names[0])


def objective_vector(report, specs, pa_names) -> tuple[float, ...]:
    return tuple(float(_lookup(report, s.name, pa_names)) for s in specs)


@dataclass(frozen=True)
class EnsembleConfig:
    size_n: int = 20
    mode: str = "plain"
    domination: str = "binary"
    objectives: tuple[str, ...] = DEFAULT_OBJECTIVES
    # Split of the protected budget i/N across attributes; None means equal shares.
    proportions: tuple[float, ...] | None = None
    soft_voting: bool = True
    hyper: TreeHyper = field(default_factory=TreeHyper)

    def __post_init__(self):
        if self.size_n < 2:
            raise ConfigError("ensemble size must be at least 2")
        if self.mode not in ("plain", "adaboost"):
            raise ConfigError(f"mode must be plain or adaboost, got {self.mode!r}")
        if self.domination not in ("binary", "continuous"):
            raise ConfigError(f"domination must be binary or continuous, got {self.domination!r}")
        if not self.objectives:
            raise ConfigError("at least one objective is required")
        for m in self.objectives:
            if m not in METRIC_NAMES:
                raise ConfigError(f"unknown objective {m!r}")
        object.__setattr__(self, "objectives", tuple(self.objectives))

    @property
    def fractions(self) -> list[float]:
        return [i / self.size_n for i in range(1, self.size_n + 1)]


@dataclass(frozen=True)
class Member:
    tree: FairTree
    lam: float
    objectives: tuple[float, ...]
    alpha: float | None = None
    error: float | None = None


@dataclass(frozen=True)
class EnsembleModel:
    members: tuple[Member, ...]
    frontier_ids: tuple[int, ...]
    voting: str
    specs: tuple[ObjectiveSpec, ...]
    protected: tuple[str, ...]
    mode: str = "plain"
    domination: str = "binary"
    soft: bool = True

    def __post_init__(self):
        if not self.frontier_ids:
            raise DataError("ensemble frontier is empty")
        if any(i < 0 or i >= len(self.members) for i in self.frontier_ids):
            raise DataError("frontier refers to a missing member")

    @property
    def frontier(self) -> list[Member]:
        return [self.members[i] for i in self.frontier_ids]

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.members[0].tree.feature_names

    def member_d2h(self, i: int) -> float:
        return d2h(self.members[i].objectives, self.specs)

    def predict(self, X) -> np.ndarray:
        if self.voting == "weighted":
            return predict_weighted(self, X)
        return predict_majority(self, X, soft=self.soft)

    # Bundle I/O -------------------------------------------------------

    def save(self, directory, metadata: dict | None = None) -> None:
        """Write ``manifest.json`` plus one ``tree_XX.txt`` per member into ``directory``."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        width = max(2, len(str(len(self.members) - 1)))
        files = []
        for i, m in enumerate(self.members):
            name = f"tree_{i:0{width}d}.txt"
            (out / name).write_text(m.tree.to_text(), encoding="utf-8")
            files.append(name)
        manifest = {
            "format": "groupcart-ensemble 1",
            "mode": self.mode,
            "n": len(self.members),
            "domination": self.domination,
            "voting": self.voting,
            "soft": self.soft,
            "protected": list(self.protected),
            "objectives": [[s.name, s.direction, s.optimum] for s in self.specs],
            "lambdas": [repr(m.lam) for m in self.members],
            "alphas": [None if m.alpha is None else repr(m.alpha) for m in self.members],
            "errors": [None if m.error is None else repr(m.error) for m in self.members],
            "validation": [[repr(v) for v in m.objectives] for m in self.members],
            "frontier_ids": list(self.frontier_ids),
            "trees": files,
            "metadata": metadata or {},
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, directory) -> tuple["EnsembleModel", dict]:
        base = Path(directory)
        try:
            manifest = json.loads((base / "manifest.json").read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"no model bundle at {base}") from None
        if manifest.get("format") != "groupcart-ensemble 1":
            raise DataError(f"{base}: not a groupcart model bundle")

        def num(v):
            return None if v is None else float(v)

        members = []
        for k, name in enumerate(manifest["trees"]):
            tree = FairTree.from_text((base / name).read_text(encoding="utf-8"))
            members.append(
                Member(
                    tree,
                    float(manifest["lambdas"][k]),
                    tuple(float(v) for v in manifest["validation"][k]),
                    num(manifest["alphas"][k]),
                    num(manifest["errors"][k]),
                )
            )
        model = cls(
            tuple(members),
            tuple(manifest["frontier_ids"]),
            manifest["voting"],
            tuple(ObjectiveSpec(*s) for s in manifest["objectives"]),
            tuple(manifest["protected"]),
            manifest["mode"],
            manifest["domination"],
            manifest["soft"],
        )
        return model, manifest.get("metadata", {})


# --------------------------------------------------------------------- voting


def predict_majority(model: EnsembleModel, X, soft: bool = True) -> np.ndarray:
    """Average the frontier's leaf positive fractions (or hard votes); ties go to 1."""
    frontier = model.frontier
    if soft:
        votes = np.mean([m.tree.positive_fraction(X) for m in frontier], axis=0)
    else:
        votes = np.mean([m.tree.predict(X) for m in frontier], axis=0)
    return (votes >= 0.5).astype(np.int64)


def predict_weighted(model: EnsembleModel, X) -> np.ndarray:
    """Sign of the alpha-weighted sum of +/-1 frontier votes; zero goes to 1."""
    frontier = model.frontier
    if any(m.alpha is None for m in frontier):
        raise UsageError("weighted voting needs an alpha for every frontier member")
    score = sum(m.alpha * (2 * m.tree.predict(X) - 1) for m in frontier)
    return (np.asarray(score) >= 0).astype(np.int64)


# --------------------------------------------------------------------- training


def _pa_names(train: Dataset, pa_specs) -> list[str]:
    specs = train.protected if pa_specs is None else pa_specs
    names = [getattr(p, "name", p) for p in specs]
    if not names:
        raise ConfigError("at least one protected attribute is required")
    for n in names:
        train.feature_index(n)
    return names


def _check_valid(valid: Dataset, pa_names):
    if valid.row_count == 0:
        raise DataError("validation set is empty")
    single_class = np.unique(valid.target).size < 2
    for pa in pa_names:
        if single_class and np.unique(valid.column(pa)).size < 2:
            raise DataError(
                f"validation set has a single class and a single {pa!r} group; fairness objectives are undefined"
            )


def evaluate_member(tree, valid: Dataset, specs, pa_names) -> tuple[float, ...]:
    """Validation objective values of ``tree`` in the order of ``specs``."""
    return objective_vector(evaluate(tree, valid, pa_names), specs, pa_names)


def _frontier(vectors, specs, domination) -> tuple[int, ...]:
    pool = [Candidate(i, tuple(to_minimization(v, specs))) for i, v in enumerate(vectors)]
    return tuple(c.id for c in nd_sort(pool, domination))


def _weights(cfg: EnsembleConfig, pa_names, lam) -> WeightConfig:
    return WeightConfig.for_fraction(lam, pa_names, cfg.proportions)


def train_groupcart(train: Dataset, valid: Dataset, cfg: EnsembleConfig | None = None, pa_specs=None) -> EnsembleModel:
    cfg = cfg or EnsembleConfig()
    pa_names = _pa_names(train, pa_specs)
    _check_valid(valid, pa_names)
    specs = objective_specs(cfg.objectives, pa_names)
    members = []
    for lam in cfg.fractions:
        tree = fit(train, _weights(cfg, pa_names, lam), cfg.hyper)
        members.append(Member(tree, lam, evaluate_member(tree, valid, specs, pa_names)))
    frontier = _frontier([m.objectives for m in members], specs, cfg.domination)
    return EnsembleModel(
        tuple(members), frontier, "majority", specs, tuple(pa_names), "plain", cfg.domination, cfg.soft_voting
    )


def boost_alpha(error: float) -> float:
    """Model weight ``0.5 * ln((1 - error) / (error + 1e-10))``.

    At ``error >= 1`` the numerator is clamped to the guard so the weight
    stays finite.
    """
    numerator = max(1.0 - error, EPSILON_GUARD)
    return 0.5 * math.log(numerator / (error + EPSILON_GUARD))


def boost_update(weights, missed, alpha: float) -> np.ndarray:
    """Up-weight misclassified rows by ``exp(alpha)`` and renormalize to sum 1."""
    w = np.asarray(weights, dtype=np.float64) * np.exp(alpha * np.asarray(missed, dtype=np.float64))
    return w / w.sum()


@dataclass
class BoostState:
    instance_weights: np.ndarray
    model_weights: list[float] = field(default_factory=list)
    error_rates: list[float] = field(default_factory=list)
    weight_sums: list[float] = field(default_factory=list)
    epsilon_guard: float = EPSILON_GUARD


def train_adaboost(
    train: Dataset, valid: Dataset, cfg: EnsembleConfig | None = None, pa_specs=None, state: BoostState | None = None
) -> EnsembleModel:
    """Boosted pool: member ``i`` is fit on the weights left by member ``i - 1``.

    Pass a :class:`BoostState` to inspect the per-iteration weights and errors.
    """
    cfg = replace(cfg or EnsembleConfig(), mode="adaboost")
    pa_names = _pa_names(train, pa_specs)
    _check_valid(valid, pa_names)
    specs = objective_specs(cfg.objectives, pa_names)
    n = train.row_count
    if state is None:
        state = BoostState(np.full(n, 1.0 / n))
    else:
        state.instance_weights = np.full(n, 1.0 / n)
    members = []
    for lam in cfg.fractions:
        w = state.instance_weights
        tree = fit(train, _weights(cfg, pa_names, lam), cfg.hyper, sample_weight=w)
        missed = tree.predict(train.columns) != train.target
        error = float(np.sum(w[missed]))
        alpha = boost_alpha(error)
        state.instance_weights = boost_update(w, missed, alpha)
        state.model_weights.append(alpha)
        state.error_rates.append(error)
        state.weight_sums.append(float(state.instance_weights.sum()))
        members.append(Member(tree, lam, evaluate_member(tree, valid, specs, pa_names), alpha, error))
    frontier = _frontier([m.objectives for m in members], specs, cfg.domination)
    return EnsembleModel(
        tuple(members), frontier, "weighted", specs, tuple(pa_names), "adaboost", cfg.domination, cfg.soft_voting
    )


def train(train_data: Dataset, valid: Dataset, cfg: EnsembleConfig | None = None, pa_specs=None) -> EnsembleModel:
    cfg = cfg or EnsembleConfig()
    if cfg.mode == "adaboost":
        return train_adaboost(train_data, valid, cfg, pa_specs)
    return train_groupcart(train_data, valid, cfg, pa_specs)
