"""Scott-Knott rank clustering gated by Cliff's delta."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UsageError

SMALL_EFFECT = 0.147


@dataclass(frozen=True)
class TrialSeries:
    method_name: str
    values: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise UsageError(f"series {self.method_name!r} is empty")
        if not np.all(np.isfinite(values)):
            raise UsageError(f"series {self.method_name!r} has non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def median(self) -> float:
        return float(np.median(self.values))


@dataclass(frozen=True)
class RankTable:
    ranks: dict[str, int]
    direction: str

    def __getitem__(self, name):
        return self.ranks[name]


def cliffs_delta(a, b) -> float:
    """P(x > y) - P(x < y) over all pairs x from ``a``, y from ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise UsageError("Cliff's delta needs two non-empty lists")
    below = np.searchsorted(b, a, side="left")  # y < x
    above = b.size - np.searchsorted(b, a, side="right")  # y > x
    return float((below.sum() - above.sum()) / (a.size * b.size))


def _best_cut(groups: list[np.ndarray]) -> int | None:
    """Index k maximizing E(delta) for the split groups[:k] | groups[k:]."""
    sizes = np.array([g.size for g in groups], dtype=np.float64)
    sums = np.array([g.sum() for g in groups])
    n, total = sizes.sum(), sums.sum()
    mu = total / n
    best, best_k = -np.inf, None
    for k in range(1, len(groups)):
        n1, s1 = sizes[:k].sum(), sums[:k].sum()
        n2, s2 = n - n1, total - s1
        e = n1 / n * (s1 / n1 - mu) ** 2 + n2 / n * (s2 / n2 - mu) ** 2
        if e > best:
            best, best_k = e, k
    return best_k


def _divide(groups: list[np.ndarray]) -> list[list[int]]:
    """Recursively split consecutive positions; returns clusters of positions."""
    def rec(lo, hi):
        if hi - lo < 2:
            return [list(range(lo, hi))]
        k = _best_cut(groups[lo:hi])
        left = np.concatenate(groups[lo : lo + k])
        right = np.concatenate(groups[lo + k : hi])
        if abs(cliffs_delta(left, right)) < SMALL_EFFECT:
            return [list(range(lo, hi))]
        return rec(lo, lo + k) + rec(lo + k, hi)

    return rec(0, len(groups))


def scott_knott(series: Sequence[TrialSeries], direction: str = "maximize") -> RankTable:
    """Rank ``series`` into clusters; rank 1 holds the best medians for ``direction``.

    Series are ordered by median (mean, then name, breaks ties, so the result
    does not depend on input order), the cut maximizing the between-group squared mean
    difference is taken, and it is kept only when the pooled halves differ by
    at least a small Cliff's delta effect.
    """
    if direction not in ("maximize", "minimize"):
        raise UsageError(f"direction must be maximize or minimize, got {direction!r}")
    if not series:
        raise UsageError("nothing to rank")
    names = [s.method_name for s in series]
    if len(set(names)) != len(names):
        raise UsageError("series names must be unique")
    ordered = sorted(series, key=lambda s: (s.median, float(np.mean(s.values)), s.method_name))
    clusters = _divide([np.asarray(s.values) for s in ordered])
    if direction == "maximize":
        clusters = clusters[::-1]
    ranks = {}
    for r, cluster in enumerate(clusters, start=1):
        for pos in cluster:
            ranks[ordered[pos].method_name] = r
    return RankTable({n: ranks[n] for n in names}, direction)
