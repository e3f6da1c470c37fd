"""Repeated-split experiments comparing CART, GroupCART and boosted GroupCART."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, SplitPlan, min_max_scale, split
from .ensemble import EnsembleConfig, objective_specs, objective_vector, train_adaboost, train_groupcart
from .errors import ConfigError
from .metrics import FAIRNESS_METRICS, PERFORMANCE_METRICS, MetricReport, evaluate
from .moo import d2h
from .stats import RankTable, TrialSeries, scott_knott
from .tree import WeightConfig, fit

METHODS = ("cart", "groupcart", "groupcart_adaboost")
REPORT_METRICS = PERFORMANCE_METRICS + FAIRNESS_METRICS + ("d2h",)


def metric_direction(metric: str) -> str:
    return "maximize" if metric in PERFORMANCE_METRICS else "minimize"


@dataclass(frozen=True)
class Cell:
    report: MetricReport
    d2h: float
    frontier_size: int

    def value(self, metric: str, pa: str) -> float:
        if metric == "d2h":
            return self.d2h
        return self.report.get(metric, pa)


def _base_method(name: str) -> str:
    base = name.split("@", 1)[0]
    if base not in METHODS:
        raise ConfigError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return base


def train_method(name: str, train: Dataset, valid: Dataset, cfg: EnsembleConfig, pa_names):
    """``(model, frontier size)`` for a method name; ``name@label`` aliases a method."""
    base = _base_method(name)
    if base == "cart":
        return fit(train, WeightConfig(), cfg.hyper), 1
    if base == "groupcart":
        model = train_groupcart(train, valid, replace(cfg, mode="plain"), pa_names)
    else:
        model = train_adaboost(train, valid, replace(cfg, mode="adaboost"), pa_names)
    return model, len(model.frontier_ids)


def score_on(model, test: Dataset, cfg: EnsembleConfig, pa_names, frontier_size: int) -> Cell:
    report = evaluate(model, test, pa_names)
    specs = objective_specs(cfg.objectives, pa_names)
    return Cell(report, d2h(objective_vector(report, specs, pa_names), specs), frontier_size)


def _run_repeat(args):
    scaled, plan, cfg, methods, pa_names, r = args
    train, valid, test = split(scaled, plan, r)
    out = {}
    for name in methods:
        model, size = train_method(name, train, valid, cfg, pa_names)
        out[name] = score_on(model, test, cfg, pa_names, size)
    return out


def _map(fn, jobs_args, jobs: int):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, jobs_args))
    return [fn(a) for a in jobs_args]


@dataclass
class TrialReport:
    methods: tuple[str, ...]
    protected: tuple[str, ...]
    repeats: int
    cells: dict = field(default_factory=dict)

    def series(self, method: str, metric: str, pa: str) -> list[float]:
        return [self.cells[(r, method)].value(metric, pa) for r in range(self.repeats)]

    def median(self, method: str, metric: str, pa: str) -> float:
        return float(np.median(self.series(method, metric, pa)))

    def ranks(self, metric: str, pa: str) -> RankTable:
        series = [TrialSeries(m, self.series(m, metric, pa)) for m in self.methods]
        return scott_knott(series, metric_direction(metric))


def compare(
    data: Dataset,
    plan: SplitPlan,
    cfg: EnsembleConfig,
    methods=("cart", "groupcart"),
    pa_names=None,
    jobs: int = 1,
) -> TrialReport:
    """Run every method on the same ``plan.repeats`` splits of the min-max scaled ``data``."""
    methods = tuple(methods)
    if not methods:
        raise ConfigError("at least one method is required")
    if len(set(methods)) != len(methods):
        raise ConfigError("method names must be unique")
    for m in methods:
        _base_method(m)
    pa_names = tuple(pa_names or [p.name for p in data.protected])
    scaled = min_max_scale(data)
    args = [(scaled, plan, cfg, methods, pa_names, r) for r in range(plan.repeats)]
    report = TrialReport(methods, pa_names, plan.repeats)
    for r, cells in enumerate(_map(_run_repeat, args, jobs)):
        for name, cell in cells.items():
            report.cells[(r, name)] = cell
    return report


@dataclass(frozen=True)
class SweepRow:
    size: int
    frontier_size: float
    flip_rate: dict[str, float]
    d2h: float
    stop: bool = False


def _sweep_repeat(args):
    scaled, plan, cfg, sizes, pa_names, r = args
    train, valid, test = split(scaled, plan, r)
    out = []
    for size in sizes:
        c = replace(cfg, size_n=size)
        model, fsize = train_method("groupcart_adaboost" if cfg.mode == "adaboost" else "groupcart", train, valid, c, pa_names)
        out.append(score_on(model, test, c, pa_names, fsize))
    return out


def sweep(data: Dataset, plan: SplitPlan, cfg: EnsembleConfig, sizes=(5, 10, 20), pa_names=None, jobs: int = 1):
    """Median frontier size, flip rate and d2h per ensemble size.

    The first size whose median flip rate is 0 for every protected attribute
    is flagged as the stopping size.
    """
    sizes = tuple(int(s) for s in sizes)
    if not sizes or list(sizes) != sorted(set(sizes)):
        raise ConfigError("sizes must be strictly ascending")
    pa_names = tuple(pa_names or [p.name for p in data.protected])
    scaled = min_max_scale(data)
    args = [(scaled, plan, cfg, sizes, pa_names, r) for r in range(plan.repeats)]
    per_repeat = _map(_sweep_repeat, args, jobs)
    rows, stopped = [], False
    for k, size in enumerate(sizes):
        cells = [rep[k] for rep in per_repeat]
        fr = {pa: float(np.median([c.report.get("fr", pa) for c in cells])) for pa in pa_names}
        stop = not stopped and all(v == 0 for v in fr.values())
        stopped = stopped or stop
        rows.append(
            SweepRow(
                size,
                float(np.median([c.frontier_size for c in cells])),
                fr,
                float(np.median([c.d2h for c in cells])),
                stop,
            )
        )
    return rows
