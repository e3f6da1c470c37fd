"""Tabular datasets: loading, min-max scaling, seeded splitting and a synthetic generator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

WILDCARD = "*"


def _same_value(raw: str, declared: str) -> bool:
    raw, declared = raw.strip(), declared.strip()
    if raw == declared:
        return True
    try:
        return float(raw) == float(declared)
    except ValueError:
        return False


@dataclass(frozen=True)
class ProtectedSpec:
    """A binary protected attribute: ``privileged_value`` maps to 1, ``unprivileged_value`` to 0.

    ``unprivileged_value`` may be ``"*"`` to mean every value other than the
    privileged one.
    """

    name: str
    privileged_value: str = "1"
    unprivileged_value: str = "0"

    def __post_init__(self):
        if _same_value(str(self.privileged_value), str(self.unprivileged_value)):
            raise ConfigError(
                f"protected attribute {self.name!r}: privileged and unprivileged values are equal"
            )
        object.__setattr__(self, "privileged_value", str(self.privileged_value))
        object.__setattr__(self, "unprivileged_value", str(self.unprivileged_value))

    @classmethod
    def parse(cls, text: str) -> "ProtectedSpec":
        """Parse ``name=privileged:unprivileged`` (the CLI form)."""
        name, sep, values = text.partition("=")
        priv, sep2, unpriv = values.partition(":")
        if not sep or not sep2 or not name.strip():
            raise ConfigError(f"protected attribute must look like name=priv:unpriv, got {text!r}")
        return cls(name.strip(), priv.strip(), unpriv.strip())

    def encode(self, raw: str) -> int | None:
        if _same_value(raw, self.privileged_value):
            return 1
        if self.unprivileged_value == WILDCARD or _same_value(raw, self.unprivileged_value):
            return 0
        return None

    def __str__(self):
        return f"{self.name}={self.privileged_value}:{self.unprivileged_value}"


@dataclass(frozen=True)
class Encoding:
    """How a categorical column becomes numeric.

    ``onehot`` expands into one 0/1 column per level (named ``col=level``);
    ``ordinal`` maps each level to its position in ``levels``. One-hot levels
    default to the sorted distinct values found in the file.
    """

    kind: str
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("onehot", "ordinal"):
            raise ConfigError(f"unknown encoding kind {self.kind!r}")
        if self.kind == "ordinal" and not self.levels:
            raise ConfigError("ordinal encoding needs an explicit level order")
        if self.levels is not None:
            object.__setattr__(self, "levels", tuple(self.levels))

    @classmethod
    def parse(cls, text: str) -> "Encoding":
        """Parse ``onehot``, ``onehot: a | b`` or ``ordinal: low | mid | high``."""
        kind, _, rest = text.partition(":")
        levels = tuple(s.strip() for s in rest.split("|")) if rest.strip() else None
        return cls(kind.strip(), levels)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable feature matrix (rows are instances) with a binary target.

    Protected attributes are ordinary feature columns holding 0/1 after
    canonicalization; ``protected`` records which columns they are and how
    the raw values were mapped.
    """

    feature_names: tuple[str, ...]
    columns: np.ndarray
    target: np.ndarray
    protected: tuple[ProtectedSpec, ...] = ()
    target_name: str = "target"
    label_values: tuple[str, str] = ("0", "1")
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = tuple(self.feature_names)
        X = np.array(self.columns, dtype=np.float64, copy=True)
        y = np.array(self.target, copy=True)
        if X.ndim != 2:
            X = X.reshape(len(y), len(names))
        if X.shape != (len(y), len(names)):
            raise DataError(f"matrix shape {X.shape} does not match {len(y)} rows x {len(names)} features")
        if len(set(names)) != len(names):
            raise DataError("duplicate feature names")
        if not np.all(np.isfinite(X)):
            raise DataError("feature matrix contains missing or non-finite values")
        if y.size and not np.isin(y, (0, 1)).all():
            raise DataError("target must contain only 0/1")
        y = y.astype(np.int64)
        index = {n: i for i, n in enumerate(names)}
        for spec in self.protected:
            if spec.name not in index:
                raise DataError(f"protected attribute {spec.name!r} is not a feature")
            if not np.isin(X[:, index[spec.name]], (0.0, 1.0)).all():
                raise DataError(f"protected attribute {spec.name!r} is not binary")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "columns", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "protected", tuple(self.protected))
        object.__setattr__(self, "label_values", tuple(self.label_values))
        object.__setattr__(self, "_index", index)

    @property
    def row_count(self) -> int:
        return self.columns.shape[0]

    @property
    def X(self) -> np.ndarray:
        return self.columns

    def __len__(self):
        return self.row_count

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.protected == other.protected
            and self.target_name == other.target_name
            and self.label_values == other.label_values
            and np.array_equal(self.columns, other.columns)
            and np.array_equal(self.target, other.target)
        )

    __hash__ = None

    def feature_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ConfigError(f"unknown column {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.columns[:, self.feature_index(name)]

    def protected_spec(self, name: str) -> ProtectedSpec:
        for spec in self.protected:
            if spec.name == name:
                return spec
        raise ConfigError(f"{name!r} is not a declared protected attribute")

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return self.replace(columns=self.columns[rows], target=self.target[rows])

    def replace(self, **changes) -> "Dataset":
        fields = dict(
            feature_names=self.feature_names,
            columns=self.columns,
            target=self.target,
            protected=self.protected,
            target_name=self.target_name,
            label_values=self.label_values,
        )
        fields.update(changes)
        return Dataset(**fields)


# --------------------------------------------------------------------- loading


def load_csv(
    path,
    target_column: str,
    favorable_raw: str,
    protected: Sequence[ProtectedSpec],
    encodings: Mapping[str, Encoding] | None = None,
) -> Dataset:
    """Read a headed CSV file into a :class:`Dataset`.

    Columns not covered by ``encodings`` or ``protected`` must be numeric.
    The target becomes 1 where it equals ``favorable_raw`` and 0 elsewhere.
    """
    encodings = dict(encodings or {})
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise ConfigError(f"data file not found: {path}") from None
    if not rows:
        raise DataError(f"{path}: empty file, header row required")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"{path}: line {lineno} has {len(r)} cells, header has {len(header)}")

    wanted = [target_column] + [p.name for p in protected] + list(encodings)
    for name in wanted:
        if name not in header:
            raise ConfigError(f"column {name!r} not found in {path}")
    pa_by_name = {p.name: p for p in protected}
    if target_column in pa_by_name:
        raise ConfigError(f"column {target_column!r} cannot be both target and protected")

    def cell(row_i, col_i):
        value = body[row_i][col_i].strip()
        if value == "":
            raise DataError(f"{path}: missing value at row {row_i + 1}, column {header[col_i]!r}")
        return value

    names: list[str] = []
    blocks: list[np.ndarray] = []
    n = len(body)
    for j, col in enumerate(header):
        if col == target_column:
            continue
        raw = [cell(i, j) for i in range(n)]
        if col in pa_by_name:
            spec = pa_by_name[col]
            coded = []
            for i, v in enumerate(raw):
                c = spec.encode(v)
                if c is None:
                    raise DataError(
                        f"{path}: protected column {col!r} has value {v!r} at row {i + 1} "
                        f"outside the declared mapping {spec}"
                    )
                coded.append(c)
            names.append(col)
            blocks.append(np.asarray(coded, dtype=np.float64)[:, None])
        elif col in encodings:
            enc = encodings[col]
            levels = enc.levels if enc.levels is not None else tuple(sorted(set(raw)))
            pos = {lv: k for k, lv in enumerate(levels)}
            codes = np.empty(n, dtype=np.int64)
            for i, v in enumerate(raw):
                if v not in pos:
                    raise DataError(f"{path}: value {v!r} at row {i + 1}, column {col!r} is not a declared level")
                codes[i] = pos[v]
            if enc.kind == "ordinal":
                names.append(col)
                blocks.append(codes.astype(np.float64)[:, None])
            else:
                names.extend(f"{col}={lv}" for lv in levels)
                blocks.append((codes[:, None] == np.arange(len(levels))[None, :]).astype(np.float64))
        else:
            values = np.empty(n, dtype=np.float64)
            for i, v in enumerate(raw):
                try:
                    values[i] = float(v)
                except ValueError:
                    raise DataError(
                        f"{path}: cannot parse {v!r} at row {i + 1}, column {col!r} "
                        "(declare an encoding for categorical columns)"
                    ) from None
                if not math.isfinite(values[i]):
                    raise DataError(f"{path}: non-finite value at row {i + 1}, column {col!r}")
            names.append(col)
            blocks.append(values[:, None])

    t = header.index(target_column)
    raw_target = [cell(i, t) for i in range(n)]
    target = np.array([1 if _same_value(v, favorable_raw) else 0 for v in raw_target], dtype=np.int64)
    unfavorable = next((v for v in raw_target if not _same_value(v, favorable_raw)), "0")
    X = np.hstack(blocks) if blocks else np.zeros((n, 0))
    return Dataset(
        feature_names=tuple(names),
        columns=X,
        target=target,
        protected=tuple(protected),
        target_name=target_column,
        label_values=(unfavorable, str(favorable_raw)),
    )


def write_csv(d: Dataset, path) -> None:
    """Write ``d`` so that :func:`load_csv` with the same declarations reproduces it."""
    pa_col = {d.feature_index(p.name): p for p in d.protected}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(d.feature_names) + [d.target_name])
        for x, y in zip(d.columns, d.target):
            out = []
            for j, v in enumerate(x):
                if j in pa_col:
                    p = pa_col[j]
                    if v == 1:
                        out.append(p.privileged_value)
                    elif p.unprivileged_value == WILDCARD:
                        out.append("~" + p.privileged_value)
                    else:
                        out.append(p.unprivileged_value)
                else:
                    out.append(repr(float(v)))
            out.append(d.label_values[int(y)])
            w.writerow(out)


GERMAN_ENCODINGS = {
    name: Encoding("onehot")
    for name in (
        "status_of_existing_checking_account",
        "credit_history",
        "purpose",
        "savings_account_and_bonds",
        "present_employment_since",
        "other_debtors_or_guarantors",
        "property",
        "other_installment_plans",
        "housing",
        "job",
        "telephone",
        "foreign_worker",
    )
}
GERMAN_PROTECTED = (ProtectedSpec("sex", "male", "female"),)


def german_credit_path() -> Path:
    return Path(str(resources.files("groupcart") / "datasets" / "german.csv"))


def load_german() -> Dataset:
    """Statlog German credit data (1,000 rows, 20 attributes), favorable label ``good``.

    The bundled copy replaces the combined personal-status/sex attribute by
    a plain ``sex`` column; every categorical attribute is one-hot encoded.
    """
    return load_csv(german_credit_path(), "creditability", "good", GERMAN_PROTECTED, GERMAN_ENCODINGS)


# --------------------------------------------------------------------- scaling


def fit_min_max(d: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-column (min, max); protected columns get (0, 1) so they pass through."""
    if d.row_count == 0:
        lo = np.zeros(len(d.feature_names))
        return lo, lo + 1.0
    lo = d.columns.min(axis=0).copy()
    hi = d.columns.max(axis=0).copy()
    for p in d.protected:
        j = d.feature_index(p.name)
        lo[j], hi[j] = 0.0, 1.0
    return lo, hi


def apply_min_max(d: Dataset, lo, hi) -> Dataset:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    span = hi - lo
    constant = span == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        X = (d.columns - lo) / np.where(constant, 1.0, span)
    X[:, constant] = 0.0
    return d.replace(columns=X)


def min_max_scale(d: Dataset) -> Dataset:
    """Map every non-constant column affinely onto [0, 1]; constant columns become 0."""
    return apply_min_max(d, *fit_min_max(d))


# --------------------------------------------------------------------- splitting


@dataclass(frozen=True)
class SplitPlan:
    seed: int = 0
    repeats: int = 20
    train_fraction: float = 0.70
    valid_fraction: float = 0.10
    test_fraction: float = 0.20

    def __post_init__(self):
        total = self.train_fraction + self.valid_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"split fractions sum to {total}, expected 1")
        if min(self.train_fraction, self.valid_fraction, self.test_fraction) < 0:
            raise ConfigError("split fractions must be non-negative")
        if self.repeats < 1:
            raise ConfigError("repeats must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def rng(self, repeat_index: int) -> np.random.Generator:
        """PCG64 stream keyed on (seed, repeat_index) through numpy's SeedSequence."""
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, repeat_index])))

    def sizes(self, n: int) -> tuple[int, int, int]:
        n_train = math.floor(Fraction(str(self.train_fraction)) * n)
        n_valid = math.floor(Fraction(str(self.valid_fraction)) * n)
        return n_train, n_valid, n - n_train - n_valid

    def indices(self, n: int, repeat_index: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n_train, n_valid, _ = self.sizes(n)
        perm = self.rng(repeat_index).permutation(n)
        return (
            np.sort(perm[:n_train]),
            np.sort(perm[n_train : n_train + n_valid]),
            np.sort(perm[n_train + n_valid :]),
        )


def split(d: Dataset, plan: SplitPlan, repeat_index: int) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint train/valid/test partition of ``d`` for one repeat."""
    if d.row_count < 10:
        raise DataError(f"need at least 10 rows to split, got {d.row_count}")
    return tuple(d.take(ix) for ix in plan.indices(d.row_count, repeat_index))


# --------------------------------------------------------------------- synthetic


def make_synthetic_biased(n: int, bias_strength: float, seed: int = 0) -> Dataset:
    """Seeded dataset with a protected attribute ``A`` whose label rates differ by ``bias_strength``.

    Generator (PCG64 seeded with ``seed``):

    * ``A ~ Bernoulli(0.5)``; ``A = 1`` is the privileged group.
    * a group-independent score ``U ~ Uniform(0, 1)``.
    * ``Y = 1`` iff ``U > 0.5 - bias_strength * (A - 0.5)``; the group
      thresholds differ by ``bias_strength``, hence so do the label rates.
    * four numeric features ``c_u * U + c_a * (A - 0.5) + N(0, s^2)``:

      ====  ====  ====  ====
      name  c_u   c_a   s
      ====  ====  ====  ====
      x1    1.0   0.0   0.20
      x2    1.0   0.8   0.10
      x3    1.0   0.4   0.15
      x4    1.0   0.2   0.15
      ====  ====  ====  ====

    ``x1`` is independent of ``A``; ``x2``-``x4`` are progressively weaker
    proxies that also track the group-shifted threshold.
    """
    if n < 100:
        raise DataError(f"synthetic datasets need n >= 100, got {n}")
    if not 0.0 <= bias_strength <= 1.0:
        raise DataError("bias_strength must be in [0, 1]")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    a = (rng.random(n) < 0.5).astype(np.float64)
    u = rng.random(n)
    y = (u > 0.5 - bias_strength * (a - 0.5)).astype(np.int64)
    cols = [a]
    for c_u, c_a, s in ((1.0, 0.0, 0.20), (1.0, 0.8, 0.10), (1.0, 0.4, 0.15), (1.0, 0.2, 0.15)):
        cols.append(c_u * u + c_a * (a - 0.5) + rng.normal(0.0, s, n))
    return Dataset(
        feature_names=("A", "x1", "x2", "x3", "x4"),
        columns=np.column_stack(cols),
        target=y,
        protected=(ProtectedSpec("A", "1", "0"),),
        target_name="y",
        label_values=("0", "1"),
    )
