"""Performance metrics, group-fairness metrics and the situation-testing flip rate.

Fairness differences are reported as absolute values so that every
fairness metric is "smaller is better". Disparate impact is reported as its
deviation from parity, ``|1 - P(yhat=1|PA=0) / P(yhat=1|PA=1)|``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset
from .errors import DataError, UsageError

PERFORMANCE_METRICS = ("accuracy", "precision", "recall", "f1")
FAIRNESS_METRICS = ("aod", "eod", "spd", "di", "fr")


def _ratio(num, den) -> float:
    return num / den if den else 0.0


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def tpr(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def fpr(self) -> float:
        return _ratio(self.fp, self.fp + self.tn)

    @property
    def positive_rate(self) -> float:
        return _ratio(self.tp + self.fp, self.total)


def _binary(values, what):
    arr = np.asarray(values)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise UsageError(f"{what} must contain only 0/1")
    return arr.astype(np.int64)


def confusion(y_true, y_pred) -> ConfusionMatrix:
    y_true = _binary(y_true, "y_true")
    y_pred = _binary(y_pred, "y_pred")
    if y_true.shape != y_pred.shape:
        raise UsageError(f"length mismatch: {y_true.size} labels vs {y_pred.size} predictions")
    if y_true.size == 0:
        raise UsageError("confusion matrix of zero instances")
    return ConfusionMatrix(
        tp=int(np.sum((y_true == 1) & (y_pred == 1))),
        tn=int(np.sum((y_true == 0) & (y_pred == 0))),
        fp=int(np.sum((y_true == 0) & (y_pred == 1))),
        fn=int(np.sum((y_true == 1) & (y_pred == 0))),
    )


def performance(cm: ConfusionMatrix) -> tuple[float, float, float, float]:
    """(accuracy, precision, recall, f1); empty denominators give 0."""
    if cm.total < 1:
        raise UsageError("performance of an empty confusion matrix")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    return accuracy, precision, recall, f1


@dataclass(frozen=True)
class GroupOutcomes:
    privileged: ConfusionMatrix
    unprivileged: ConfusionMatrix

    @classmethod
    def from_predictions(cls, y_true, y_pred, group) -> "GroupOutcomes":
        y_true = np.asarray(y_true)
        y_pred = np.asarray(y_pred)
        group = np.asarray(group)
        priv = group == 1
        if not priv.any() or priv.all():
            raise DataError("both protected groups must be non-empty")
        return cls(confusion(y_true[priv], y_pred[priv]), confusion(y_true[~priv], y_pred[~priv]))

    @property
    def sizes(self) -> tuple[int, int]:
        return self.privileged.total, self.unprivileged.total

    @property
    def favorable_counts(self) -> tuple[int, int]:
        p, u = self.privileged, self.unprivileged
        return p.tp + p.fp, u.tp + u.fp


def disparate_impact_deviation(rate_unpriv: float, rate_priv: float) -> float:
    if rate_priv == 0:
        return 0.0 if rate_unpriv == 0 else 1.0
    return abs(1.0 - rate_unpriv / rate_priv)


def group_fairness(g: GroupOutcomes) -> tuple[float, float, float, float]:
    """(aod, eod, spd, di_deviation) for one protected attribute."""
    p, u = g.privileged, g.unprivileged
    if p.total < 1 or u.total < 1:
        raise DataError("both protected groups must be non-empty")
    aod = abs(((u.fpr - p.fpr) + (u.tpr - p.tpr)) / 2)
    eod = abs(u.tpr - p.tpr)
    spd = abs(u.positive_rate - p.positive_rate)
    di = disparate_impact_deviation(u.positive_rate, p.positive_rate)
    return aod, eod, spd, di


def _predict(model, X):
    if hasattr(model, "predict"):
        return np.asarray(model.predict(X))
    return np.asarray(model(X))


def flip_rate(model, test: Dataset, pa) -> float:
    """Fraction of ``test`` rows whose prediction changes when ``pa`` is complemented.

    ``model`` is anything with ``predict(X)`` (or a callable) over the rows of
    ``test.columns``; ``pa`` is a protected attribute name or spec.
    """
    name = getattr(pa, "name", pa)
    if test.row_count == 0:
        return 0.0
    j = test.feature_index(name)
    X = test.columns
    if not np.isin(X[:, j], (0.0, 1.0)).all():
        raise DataError(f"protected attribute {name!r} is not binary in the test data")
    flipped = X.copy()
    flipped[:, j] = 1.0 - flipped[:, j]
    changed = _predict(model, X) != _predict(model, flipped)
    return float(np.count_nonzero(changed)) / test.row_count


@dataclass(frozen=True)
class FairnessScores:
    aod: float
    eod: float
    spd: float
    di: float
    fr: float


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    fairness: dict[str, FairnessScores] = field(default_factory=dict)

    def get(self, metric: str, pa: str | None = None) -> float:
        if metric in PERFORMANCE_METRICS:
            return getattr(self, metric)
        if metric not in FAIRNESS_METRICS:
            raise UsageError(f"unknown metric {metric!r}")
        if pa is None:
            if len(self.fairness) != 1:
                raise UsageError(f"metric {metric!r} needs a protected attribute name")
            pa = next(iter(self.fairness))
        return getattr(self.fairness[pa], metric)

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(model, d: Dataset, pas=None, predictions=None) -> MetricReport:
    """Full report of ``model`` on ``d`` for each protected attribute in ``pas``."""
    pas = [getattr(p, "name", p) for p in (d.protected if pas is None else pas)]
    y_pred = _predict(model, d.columns) if predictions is None else np.asarray(predictions)
    acc, prec, rec, f1 = performance(confusion(d.target, y_pred))
    fairness = {}
    for name in pas:
        g = GroupOutcomes.from_predictions(d.target, y_pred, d.column(name))
        aod, eod, spd, di = group_fairness(g)
        fairness[name] = FairnessScores(aod, eod, spd, di, flip_rate(model, d, name))
    return MetricReport(acc, prec, rec, f1, fairness)
