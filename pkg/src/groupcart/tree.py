"""Fairness-aware CART.

A candidate split is scored as

    igc_weight * IG(target) - sum_a igs_weight[a] * IG(protected a)

where IG is the usual entropy information gain and the protected attribute
values stand in for the labels when computing its gain. With all protected
weight at zero this is plain information-gain CART.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .data import Dataset
from .errors import DataError, UsageError

# Scores closer than this are ties; ties go to the lowest feature index, then the lowest threshold.
TIE_TOLERANCE = 1e-12


# --------------------------------------------------------------------- impurity


def entropy(labels) -> float:
    """Shannon entropy (base 2) of a label list."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise UsageError("entropy of an empty label list")
    _, counts = np.unique(labels, return_counts=True)
    h = 0.0
    for c in counts:
        p = c / labels.size
        h -= p * math.log2(p)
    return h + 0.0


def info_gain(parent_labels, left_labels, right_labels) -> float:
    n_l, n_r = len(left_labels), len(right_labels)
    if n_l == 0 or n_r == 0:
        raise UsageError("information gain needs two non-empty children")
    n = len(parent_labels)
    if n != n_l + n_r:
        raise UsageError("children do not partition the parent")
    return entropy(parent_labels) - (n_l / n) * entropy(left_labels) - (n_r / n) * entropy(right_labels)


def _binary_entropy(p):
    p = np.asarray(p, dtype=np.float64)
    q = 1.0 - p
    inner = (p > 0) & (q > 0)
    ps = np.where(inner, p, 0.5)
    qs = np.where(inner, q, 0.5)
    return np.where(inner, -(ps * np.log2(ps) + qs * np.log2(qs)), 0.0)


# --------------------------------------------------------------------- configuration


@dataclass(frozen=True)
class WeightConfig:
    """Weight on class information gain plus one penalty weight per protected attribute."""

    igc_weight: float = 1.0
    igs_weights: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        igs = {str(k): float(v) for k, v in dict(self.igs_weights).items()}
        if self.igc_weight < 0 or any(v < 0 for v in igs.values()):
            raise UsageError("weights must be non-negative")
        total = self.igc_weight + sum(igs.values())
        if total <= 0:
            raise UsageError("at least one weight must be positive")
        object.__setattr__(self, "igc_weight", float(self.igc_weight) / total)
        object.__setattr__(self, "igs_weights", {k: v / total for k, v in igs.items()})

    @classmethod
    def for_fraction(cls, lam: float, pa_names: Sequence[str], proportions=None) -> "WeightConfig":
        """``1 - lam`` on the class, ``lam`` shared across protected attributes.

        ``proportions`` (mapping or sequence aligned with ``pa_names``) sets how
        ``lam`` divides between attributes; the default is an equal split.
        """
        if not 0.0 <= lam <= 1.0:
            raise UsageError(f"weight fraction must be in [0, 1], got {lam}")
        pa_names = list(pa_names)
        if lam > 0 and not pa_names:
            raise UsageError("a positive protected weight needs at least one protected attribute")
        if proportions is None:
            props = [1.0] * len(pa_names)
        elif isinstance(proportions, Mapping):
            props = [float(proportions.get(a, 0.0)) for a in pa_names]
        else:
            props = [float(p) for p in proportions]
        if len(props) != len(pa_names) or (pa_names and sum(props) <= 0):
            raise UsageError("protected-attribute proportions do not match the attributes")
        total = sum(props) or 1.0
        return cls(1.0 - lam, {a: lam * p / total for a, p in zip(pa_names, props)})

    @property
    def igs_total(self) -> float:
        return sum(self.igs_weights.values())

    def __hash__(self):
        return hash((self.igc_weight, tuple(sorted(self.igs_weights.items()))))


@dataclass(frozen=True)
class TreeHyper:
    max_depth: int = 8
    min_samples_leaf: int = 5
    # None picks 1e-12 for pure CART and -inf once any protected weight is set.
    min_gain: float | None = None

    def __post_init__(self):
        if self.max_depth < 0 or self.min_samples_leaf < 1:
            raise UsageError("max_depth must be >= 0 and min_samples_leaf >= 1")

    def resolved_min_gain(self, w: WeightConfig) -> float:
        if self.min_gain is not None:
            return self.min_gain
        return -math.inf if w.igs_total > 0 else 1e-12


# --------------------------------------------------------------------- nodes


@dataclass(frozen=True)
class Leaf:
    predicted_label: int
    positive_fraction: float
    n: int


@dataclass(frozen=True)
class Internal:
    feature: str
    threshold: float
    left: "TreeNode"
    right: "TreeNode"
    chosen_gain: float
    index: int
    n: int


TreeNode = Union[Leaf, Internal]


def split_score(y, left_mask, w: WeightConfig, protected: Mapping[str, Sequence] | None = None) -> float:
    """Score of partitioning a node's rows by ``left_mask`` (True goes left).

    ``protected`` maps each attribute named in ``w.igs_weights`` to its 0/1
    values on the same rows.
    """
    y = np.asarray(y)
    left_mask = np.asarray(left_mask, dtype=bool)
    score = w.igc_weight * info_gain(y, y[left_mask], y[~left_mask])
    protected = protected or {}
    for name, weight in w.igs_weights.items():
        if weight == 0:
            continue
        if name not in protected:
            raise UsageError(f"missing values for protected attribute {name!r}")
        a = np.asarray(protected[name])
        score -= weight * info_gain(a, a[left_mask], a[~left_mask])
    return score


def _midpoint(lo: float, hi: float) -> float:
    mid = (lo + hi) / 2.0
    # Adjacent floats can round the midpoint up onto hi, which would send hi left.
    return lo if mid >= hi else mid


# --------------------------------------------------------------------- tree


@dataclass(frozen=True)
class FairTree:
    root: TreeNode
    weights: WeightConfig
    hyper: TreeHyper
    feature_names: tuple[str, ...]

    # Traversal helpers -------------------------------------------------

    def nodes(self):
        stack = [(self.root, 0)]
        while stack:
            node, depth = stack.pop()
            yield node, depth
            if isinstance(node, Internal):
                stack.append((node.right, depth + 1))
                stack.append((node.left, depth + 1))

    def leaves(self) -> list[Leaf]:
        return [n for n, _ in self.nodes() if isinstance(n, Leaf)]

    @property
    def depth(self) -> int:
        return max(d for _, d in self.nodes())

    def split_features(self) -> list[str]:
        return [n.feature for n, _ in self.nodes() if isinstance(n, Internal)]

    def count_splits(self, feature: str) -> int:
        return sum(1 for f in self.split_features() if f == feature)

    # Prediction -------------------------------------------------------

    def _matrix(self, X) -> np.ndarray:
        if isinstance(X, Dataset):
            if X.feature_names == self.feature_names:
                return X.columns
            missing = [f for f in self.feature_names if f not in X.feature_names]
            if missing:
                raise UsageError(f"data lacks features used by the tree: {missing}")
            return X.columns[:, [X.feature_index(f) for f in self.feature_names]]
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        needed = max((n.index for n, _ in self.nodes() if isinstance(n, Internal)), default=-1)
        if X.shape[1] <= needed:
            raise UsageError(f"rows have {X.shape[1]} values, tree needs feature index {needed}")
        return X

    def _leaf_values(self, X):
        X = self._matrix(X)
        labels = np.empty(X.shape[0], dtype=np.int64)
        fractions = np.empty(X.shape[0], dtype=np.float64)
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if isinstance(node, Leaf):
                labels[rows] = node.predicted_label
                fractions[rows] = node.positive_fraction
                continue
            go_left = X[rows, node.index] <= node.threshold
            stack.append((node.left, rows[go_left]))
            stack.append((node.right, rows[~go_left]))
        return labels, fractions

    def predict(self, X) -> np.ndarray:
        return self._leaf_values(X)[0]

    def positive_fraction(self, X) -> np.ndarray:
        """Training positive fraction of the leaf each row reaches."""
        return self._leaf_values(X)[1]

    def predict_row(self, row) -> int:
        """Route one row (sequence aligned with ``feature_names`` or a name mapping)."""
        node = self.root
        while isinstance(node, Internal):
            if isinstance(row, Mapping):
                if node.feature not in row:
                    raise UsageError(f"row lacks feature {node.feature!r}")
                value = row[node.feature]
            else:
                if node.index >= len(row):
                    raise UsageError(f"row lacks feature {node.feature!r}")
                value = row[node.index]
            node = node.left if value <= node.threshold else node.right
        return node.predicted_label

    # Serialization ----------------------------------------------------

    def to_text(self) -> str:
        lines = [
            "groupcart-tree 1",
            "features " + json.dumps(list(self.feature_names)),
            "weights " + json.dumps({"igc": self.weights.igc_weight, "igs": self.weights.igs_weights}),
            "hyper "
            + json.dumps(
                {
                    "max_depth": self.hyper.max_depth,
                    "min_samples_leaf": self.hyper.min_samples_leaf,
                    "min_gain": None if self.hyper.min_gain is None else repr(self.hyper.min_gain),
                }
            ),
        ]
        for node, depth in self.nodes():
            pad = "  " * depth
            if isinstance(node, Leaf):
                lines.append(f"{pad}leaf label={node.predicted_label} fraction={node.positive_fraction!r} n={node.n}")
            else:
                lines.append(
                    f"{pad}split index={node.index} threshold={node.threshold!r} "
                    f"gain={node.chosen_gain!r} n={node.n} feature={json.dumps(node.feature)}"
                )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FairTree":
        lines = text.splitlines()
        if not lines or lines[0] != "groupcart-tree 1":
            raise DataError("not a groupcart tree file")
        names = tuple(json.loads(lines[1].partition(" ")[2]))
        wdict = json.loads(lines[2].partition(" ")[2])
        hdict = json.loads(lines[3].partition(" ")[2])
        min_gain = None if hdict["min_gain"] is None else float(hdict["min_gain"])
        weights = WeightConfig(wdict["igc"], wdict["igs"])
        hyper = TreeHyper(hdict["max_depth"], hdict["min_samples_leaf"], min_gain)
        body = lines[4:]
        pos = 0

        def parse(depth):
            nonlocal pos
            line = body[pos]
            pos += 1
            indent = len(line) - len(line.lstrip(" "))
            if indent != 2 * depth:
                raise DataError(f"bad indentation in tree text: {line!r}")
            m = _LEAF_RE.fullmatch(line.strip())
            if m:
                return Leaf(int(m["label"]), float(m["fraction"]), int(m["n"]))
            m = _SPLIT_RE.fullmatch(line.strip())
            if not m:
                raise DataError(f"unparseable tree line: {line!r}")
            left = parse(depth + 1)
            right = parse(depth + 1)
            return Internal(
                json.loads(m["feature"]), float(m["threshold"]), left, right,
                float(m["gain"]), int(m["index"]), int(m["n"]),
            )

        root = parse(0)
        return cls(root, weights, hyper, names)


_LEAF_RE = re.compile(r"leaf label=(?P<label>[01]) fraction=(?P<fraction>\S+) n=(?P<n>\d+)")
_SPLIT_RE = re.compile(
    r"split index=(?P<index>\d+) threshold=(?P<threshold>\S+) gain=(?P<gain>\S+) "
    r"n=(?P<n>\d+) feature=(?P<feature>.*)"
)


# --------------------------------------------------------------------- induction


class _Grower:
    def __init__(self, names, X, y, sw, P, igs, w, hyper):
        self.names = names
        self.X = X
        self.y = y.astype(np.float64)
        self.sw = sw
        self.P = P
        self.igs = igs
        self.w = w
        self.hyper = hyper
        self.min_gain = hyper.resolved_min_gain(w)

    def leaf(self, rows):
        sw = self.sw[rows]
        frac = float(np.dot(sw, self.y[rows]) / sw.sum())
        return Leaf(1 if frac >= 0.5 else 0, frac, int(rows.size))

    def best_split(self, rows):
        """(score, feature index, threshold) of the best admissible split, or None."""
        m = self.hyper.min_samples_leaf
        n = rows.size
        Xn = self.X[rows]
        order = np.argsort(Xn, axis=0, kind="stable")
        xs = np.take_along_axis(Xn, order, axis=0)
        sw = self.sw[rows][order]
        wl = np.cumsum(sw, axis=0)[:-1]
        total = sw.sum(axis=0)
        wr = total - wl
        frac_l = wl / total
        frac_r = wr / total

        def gain(labels):
            lab = labels[rows][order] * sw
            pos_l = np.cumsum(lab, axis=0)[:-1]
            pos_total = pos_l[-1] + lab[-1]
            parent = _binary_entropy(np.clip(pos_total / total, 0.0, 1.0))
            with np.errstate(invalid="ignore", divide="ignore"):
                p_l = np.clip(pos_l / wl, 0.0, 1.0)
                p_r = np.clip((pos_total - pos_l) / wr, 0.0, 1.0)
            return parent - frac_l * _binary_entropy(p_l) - frac_r * _binary_entropy(p_r)

        score = self.w.igc_weight * gain(self.y) if self.w.igc_weight else np.zeros_like(wl)
        for k, coef in enumerate(self.igs):
            if coef:
                score = score - coef * gain(self.P[:, k])

        sizes = np.arange(1, n)[:, None]
        valid = (xs[:-1] < xs[1:]) & (sizes >= m) & (n - sizes >= m)
        if not valid.any():
            return None
        score = np.where(valid, score, -np.inf)
        best = score.max()
        tied = score >= best - TIE_TOLERANCE
        f = int(np.argmax(tied.any(axis=0)))
        i = int(np.argmax(tied[:, f]))
        return float(score[i, f]), f, _midpoint(float(xs[i, f]), float(xs[i + 1, f]))

    def grow(self, rows, depth):
        y = self.y[rows]
        if depth >= self.hyper.max_depth or rows.size < 2 * self.hyper.min_samples_leaf or y.min() == y.max():
            return self.leaf(rows)
        found = self.best_split(rows)
        if found is None or found[0] < self.min_gain:
            return self.leaf(rows)
        score, f, thr = found
        go_left = self.X[rows, f] <= thr
        return Internal(
            self.names[f], thr,
            self.grow(rows[go_left], depth + 1),
            self.grow(rows[~go_left], depth + 1),
            score, f, int(rows.size),
        )


def fit(train: Dataset, w: WeightConfig | None = None, hyper: TreeHyper | None = None, sample_weight=None) -> FairTree:
    """Grow a tree greedily top-down on ``train``.

    ``sample_weight`` (optional, non-negative) replaces counts with weight
    sums in every class and protected-attribute probability estimate; the
    minimum leaf size is still counted in rows.
    """
    w = w or WeightConfig()
    hyper = hyper or TreeHyper()
    pa_names = list(w.igs_weights)
    for name in pa_names:
        if name not in train.feature_names:
            raise DataError(f"protected attribute {name!r} not in training data")
    n = train.row_count
    if n == 0:
        raise DataError("cannot fit a tree on zero rows")
    if sample_weight is None:
        sw = np.ones(n)
    else:
        sw = np.asarray(sample_weight, dtype=np.float64)
        if sw.shape != (n,) or (sw < 0).any() or sw.sum() <= 0:
            raise UsageError("sample_weight must be non-negative, one per row, with positive sum")
    P = np.column_stack([train.column(a) for a in pa_names]) if pa_names else np.zeros((n, 0))
    for k, a in enumerate(pa_names):
        if not np.isin(P[:, k], (0.0, 1.0)).all():
            raise DataError(f"protected attribute {a!r} is not binary")
    igs = [w.igs_weights[a] for a in pa_names]
    grower = _Grower(train.feature_names, train.columns, train.target, sw, P, igs, w, hyper)
    root = grower.grow(np.arange(n), 0)
    return FairTree(root, w, hyper, train.feature_names)
