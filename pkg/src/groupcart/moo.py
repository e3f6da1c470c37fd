"""Objective vectors, binary and continuous domination, non-dominated sorting, d2h."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import UsageError

MAXIMIZE = "maximize"
MINIMIZE = "minimize"


@dataclass(frozen=True)
class ObjectiveSpec:
    name: str
    direction: str
    optimum: float

    def __post_init__(self):
        if self.direction not in (MAXIMIZE, MINIMIZE):
            raise UsageError(f"direction must be maximize or minimize, got {self.direction!r}")
        if not math.isfinite(self.optimum):
            raise UsageError("optimum must be finite")


@dataclass(frozen=True)
class Candidate:
    id: Any
    objectives: tuple[float, ...]


def _aligned(v, specs):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (len(specs),):
        raise UsageError(f"{v.size} objective values for {len(specs)} objectives")
    return v


def to_minimization(v, specs: Sequence[ObjectiveSpec]) -> np.ndarray:
    """Distance-from-optimum form: lower is better for every entry."""
    v = _aligned(v, specs)
    out = np.empty_like(v)
    for j, s in enumerate(specs):
        out[j] = s.optimum - v[j] if s.direction == MAXIMIZE else v[j] - s.optimum
    return out


def binary_dominates(a, b) -> bool:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size == 0:
        raise UsageError("objective vectors must be non-empty and of equal length")
    return bool(np.all(a <= b) and np.any(a < b))


def cdom_loss(a, b) -> float:
    """Exponential loss of ``a`` against ``b`` (both min-max normalized, lower is better)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size == 0:
        raise UsageError("objective vectors must be non-empty and of equal length")
    return float(np.sum(-np.exp(b - a)) / a.size)


def continuous_dominates(a, b) -> bool:
    return cdom_loss(a, b) < cdom_loss(b, a)


def normalize_pool(matrix) -> np.ndarray:
    """Min-max scale each column over the pool; zero-range columns become 0."""
    m = np.asarray(matrix, dtype=np.float64)
    lo = m.min(axis=0)
    span = m.max(axis=0) - lo
    out = (m - lo) / np.where(span > 0, span, 1.0)
    out[:, span == 0] = 0.0
    return out


def domination_matrix(matrix, mode: str = "binary") -> np.ndarray:
    """``D[i, j]`` is True when row i dominates row j."""
    m = np.asarray(matrix, dtype=np.float64)
    if mode == "binary":
        le = np.all(m[:, None, :] <= m[None, :, :], axis=2)
        lt = np.any(m[:, None, :] < m[None, :, :], axis=2)
        return le & lt
    if mode == "continuous":
        z = normalize_pool(m)
        diff = z[None, :, :] - z[:, None, :]  # b - a for a=i, b=j
        loss_ij = -np.exp(diff).mean(axis=2)
        return loss_ij < loss_ij.T
    raise UsageError(f"unknown domination mode {mode!r}")


def nd_sort(pool: Sequence[Candidate], mode: str = "binary") -> list[Candidate]:
    """Candidates that no other pool member dominates, in input order.

    Objectives must already be in minimization form. Continuous domination
    is not transitive and can leave every candidate dominated; in that case
    the candidates with the fewest dominators are returned.
    """
    if not pool:
        raise UsageError("cannot sort an empty pool")
    m = np.array([c.objectives for c in pool], dtype=np.float64)
    if m.ndim != 2 or m.shape[1] == 0:
        raise UsageError("candidates must share a non-empty objective length")
    dominated_by = domination_matrix(m, mode).sum(axis=0)
    fewest = dominated_by.min()
    return [c for c, k in zip(pool, dominated_by) if k == fewest]


def d2h(v, specs: Sequence[ObjectiveSpec]) -> float:
    """Euclidean distance to the ideal vector, each value clipped into [0, 1] first."""
    v = np.clip(_aligned(v, specs), 0.0, 1.0)
    opt = np.array([s.optimum for s in specs], dtype=np.float64)
    return float(np.sqrt(np.sum((opt - v) ** 2)))
