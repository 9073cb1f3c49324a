"""Datasets: synthetic generators, CSV I/O, min-max scaling, noise and holes.

Missing feature values are stored as NaN.  Targets are never missing.

All generators draw from ``numpy.random.default_rng(seed)`` (PCG64), so a
given seed reproduces a dataset bit for bit.  Synthetic features live in
[0, 1); synthetic targets are divided by the analytic maximum of the
generating function, which keeps them in [0, 1] with a seed-independent scale.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InputError

MISSING_TOKENS = ("", "nan")


@dataclass(frozen=True, eq=False)
class Scaler:
    """Per-column affine maps ``(v - min) / (max - min)`` for features and target."""

    x_min: np.ndarray
    x_max: np.ndarray
    y_min: float
    y_max: float

    def __post_init__(self):
        x_min = np.asarray(self.x_min, dtype=float).reshape(-1)
        x_max = np.asarray(self.x_max, dtype=float).reshape(-1)
        if x_min.shape != x_max.shape:
            raise InputError("scaler bounds have mismatched lengths")
        if np.any(x_max <= x_min) or not self.y_max > self.y_min:
            raise InputError("scaler needs max > min for every column")
        object.__setattr__(self, "x_min", x_min)
        object.__setattr__(self, "x_max", x_max)
        object.__setattr__(self, "y_min", float(self.y_min))
        object.__setattr__(self, "y_max", float(self.y_max))

    @property
    def y_range(self) -> float:
        return self.y_max - self.y_min

    def bounds(self, column):
        """(min, max) for a feature index, or for the target when column is None."""
        if column is None:
            return self.y_min, self.y_max
        return self.x_min[column], self.x_max[column]

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min.tolist(),
            "x_max": self.x_max.tolist(),
            "y_min": self.y_min,
            "y_max": self.y_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.array(d["x_min"]), np.array(d["x_max"]), d["y_min"], d["y_max"])


@dataclass(eq=False)
class Dataset:
    column_names: list
    X: np.ndarray
    y: np.ndarray
    scaler: Scaler | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.X.ndim != 2:
            raise InputError(f"X must be 2-D, got shape {self.X.shape}")
        if self.X.shape[0] != self.y.shape[0]:
            raise InputError(f"X has {self.X.shape[0]} rows, y has {self.y.shape[0]}")
        if len(self.column_names) != self.X.shape[1] + 1:
            raise InputError("column_names must list every feature followed by the target")
        if not np.all(np.isfinite(self.y)):
            raise InputError("targets must all be known and finite")
        self.column_names = list(self.column_names)

    @property
    def M(self) -> int:
        return self.X.shape[0]

    @property
    def D(self) -> int:
        return self.X.shape[1]

    @property
    def feature_names(self) -> list:
        return self.column_names[:-1]

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.X)

    def complete_rows(self) -> np.ndarray:
        return np.flatnonzero(~self.missing_mask.any(axis=1))

    def has_missing(self) -> bool:
        return bool(self.missing_mask.any())

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return replace(self, X=self.X[rows].copy(), y=self.y[rows].copy())

    def copy(self) -> "Dataset":
        return replace(self, X=self.X.copy(), y=self.y.copy())


def _names(d):
    return [f"x{i + 1}" for i in range(d)] + ["y"]


def _check_counts(n, d=1):
    if int(n) != n or n < 1:
        raise InputError(f"sample count must be a positive integer, got {n}")
    if int(d) != d or d < 1:
        raise InputError(f"dimension must be a positive integer, got {d}")


def _synthetic(X, y_raw, y_max) -> Dataset:
    d = X.shape[1]
    scaler = Scaler(np.zeros(d), np.ones(d), 0.0, y_max)
    return Dataset(_names(d), X, y_raw / y_max, scaler)


def gen_additive(n: int, d: int = 3, seed=None) -> Dataset:
    """f(x) = x1 + ... + xd, uniform features, target divided by d."""
    _check_counts(n, d)
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    return _synthetic(X, X.sum(axis=1), float(d))


def power_function(X):
    return X[:, 0] ** 3 + X[:, 1] + X[:, 2] ** 5


def gen_power(n: int, seed=None) -> Dataset:
    """f = x^3 + y + z^5."""
    _check_counts(n)
    X = np.random.default_rng(seed).random((n, 3))
    return _synthetic(X, power_function(X), 3.0)


def coupled_function(X):
    x, y, z = X[:, 0], X[:, 1], X[:, 2]
    return x + 0.2 * x * y + y + z


def gen_coupled(n: int, seed=None) -> Dataset:
    """f = x + 0.2xy + y + z."""
    _check_counts(n)
    X = np.random.default_rng(seed).random((n, 3))
    return _synthetic(X, coupled_function(X), 3.2)


def quartic_g(x):
    """0.5((3.5(x-0.5))^4 - (5.5(x-0.5))^2 + 1.6); up to four preimages on [0, 1]."""
    t = np.asarray(x, dtype=float) - 0.5
    return 0.5 * ((3.5 * t) ** 4 - (5.5 * t) ** 2 + 1.6)


# g is even about 0.5 with a single interior minimum in u = (x-0.5)^2 beyond
# the [0, 0.25] range of u, so its maximum on [0, 1] sits at the endpoints
QUARTIC_MAX = float(quartic_g(0.0)) + 2.0


def gen_quartic(n: int, seed=None) -> Dataset:
    """f = g(x) + y + z with the quartic g above."""
    _check_counts(n)
    X = np.random.default_rng(seed).random((n, 3))
    return _synthetic(X, quartic_g(X[:, 0]) + X[:, 1] + X[:, 2], QUARTIC_MAX)


def gen_uneven(n_normal: int, n_uniform: int, seed=None, d: int = 3, mean=0.1, std=0.01) -> Dataset:
    """Additive target over features drawn from a normal/uniform mixture.

    Each column independently gets ``n_normal`` draws from N(mean, std)
    clipped into [0, 1) plus ``n_uniform`` uniform draws, shuffled.
    """
    if n_normal < 0 or n_uniform < 0:
        raise InputError("mixture counts must be non-negative")
    _check_counts(n_normal + n_uniform, d)
    rng = np.random.default_rng(seed)
    n = n_normal + n_uniform
    X = np.empty((n, d))
    upper = np.nextafter(1.0, 0.0)
    for j in range(d):
        col = np.concatenate([
            np.clip(rng.normal(mean, std, n_normal), 0.0, upper),
            rng.random(n_uniform),
        ])
        X[:, j] = rng.permutation(col)
    return _synthetic(X, X.sum(axis=1), float(d))


GENERATORS = {
    "additive": gen_additive,
    "power": gen_power,
    "coupled": gen_coupled,
    "quartic": gen_quartic,
    "uneven": gen_uneven,
}


def add_noise(data: Dataset, sigma: float, seed=None) -> Dataset:
    """Add N(0, sigma^2) noise to the target.

    ``sigma`` is in raw target units; when the dataset carries a scaler the
    noise is mapped into scaled units so that unscaled targets see exactly
    ``sigma``.
    """
    if sigma < 0:
        raise InputError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return data.copy()
    noise = np.random.default_rng(seed).normal(0.0, sigma, data.M)
    if data.scaler is not None:
        noise = noise / data.scaler.y_range
    return replace(data, X=data.X.copy(), y=data.y + noise)


@dataclass
class MissingRecord:
    """Ground truth for injected holes: one (row, column, value) per hole."""

    rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    columns: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    values: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self):
        return len(self.rows)

    def save(self, path, column_names):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "column", "true_value"])
            for r, c, v in zip(self.rows, self.columns, self.values):
                w.writerow([int(r), column_names[int(c)], repr(float(v))])

    @classmethod
    def load(cls, path, column_names) -> "MissingRecord":
        index = {name: i for i, name in enumerate(column_names)}
        rows, cols, vals = [], [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["row", "column", "true_value"]:
                raise InputError(f"{path}: expected header row,column,true_value")
            for lineno, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                if len(rec) != 3:
                    raise InputError(f"{path}:{lineno}: expected 3 fields, got {len(rec)}")
                name = rec[1].strip()
                if name not in index:
                    raise InputError(f"{path}:{lineno}: unknown column {name!r}")
                try:
                    rows.append(int(rec[0]))
                    vals.append(float(rec[2]))
                except ValueError as exc:
                    raise InputError(f"{path}:{lineno}: {exc}") from exc
                cols.append(index[name])
        return cls(np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(vals, dtype=float))


def inject_missing(data: Dataset, per_column_count: int, seed=None, columns=None):
    """Blank out ``per_column_count`` entries in each chosen column.

    Rows are drawn without replacement from the complete rows, so no row ends
    up with more than one hole.  Returns ``(dataset_with_holes, MissingRecord)``.
    """
    columns = list(range(data.D)) if columns is None else [int(c) for c in columns]
    if any(c < 0 or c >= data.D for c in columns):
        raise InputError(f"columns {columns} out of range for D={data.D}")
    if per_column_count < 0:
        raise InputError("per_column_count must be >= 0")
    complete = data.complete_rows()
    total = per_column_count * len(columns)
    if total > len(complete):
        raise InputError(
            f"cannot place {total} holes with at most one per row: only {len(complete)} complete rows"
        )
    out = data.copy()
    if total == 0:
        return out, MissingRecord()
    rng = np.random.default_rng(seed)
    rows = rng.choice(complete, size=total, replace=False)
    cols = np.repeat(np.array(columns, dtype=int), per_column_count)
    values = out.X[rows, cols].copy()
    out.X[rows, cols] = np.nan
    order = np.argsort(rows, kind="stable")
    return out, MissingRecord(rows[order], cols[order], values[order])


def minmax_scale(data: Dataset):
    """Scale every feature and the target to [0, 1]; missing entries are ignored.

    Returns ``(scaled_dataset, scaler)``.  The input is taken to be raw.
    """
    with np.errstate(all="ignore"):
        x_min = np.nanmin(data.X, axis=0) if data.M else np.array([])
        x_max = np.nanmax(data.X, axis=0) if data.M else np.array([])
    bad = [data.feature_names[j] for j in range(data.D) if not (x_max[j] > x_min[j])]
    if bad:
        raise InputError(f"constant (or entirely missing) columns cannot be scaled: {bad}")
    y_min, y_max = float(np.min(data.y)), float(np.max(data.y))
    if not y_max > y_min:
        raise InputError(f"constant target column {data.column_names[-1]!r} cannot be scaled")
    scaler = Scaler(x_min, x_max, y_min, y_max)
    X = (data.X - x_min) / (x_max - x_min)
    y = (data.y - y_min) / (y_max - y_min)
    return Dataset(data.column_names, X, y, scaler), scaler


def scale(values, scaler: Scaler, column=None):
    lo, hi = scaler.bounds(column)
    return (np.asarray(values, dtype=float) - lo) / (hi - lo)


def unscale(values, scaler: Scaler, column=None):
    """Map scaled values of a feature column (or the target, column=None) back to raw units."""
    lo, hi = scaler.bounds(column)
    return np.asarray(values, dtype=float) * (hi - lo) + lo


def apply_scaler(data: Dataset, scaler: Scaler) -> Dataset:
    """Scale a raw dataset with an existing scaler (e.g. the one stored in a model)."""
    if scaler.x_min.shape[0] != data.D:
        raise InputError(f"scaler covers {scaler.x_min.shape[0]} features, data has {data.D}")
    X = (data.X - scaler.x_min) / (scaler.x_max - scaler.x_min)
    y = scale(data.y, scaler)
    return Dataset(data.column_names, X, y, scaler)


def _parse_field(text, path, lineno, name, allow_missing):
    s = text.strip()
    if s.lower() in MISSING_TOKENS:
        if not allow_missing:
            raise InputError(f"{path}:{lineno}: target column {name!r} is missing")
        return math.nan
    try:
        v = float(s)
    except ValueError:
        raise InputError(f"{path}:{lineno}: column {name!r}: {s!r} is not a number") from None
    if not math.isfinite(v):
        raise InputError(f"{path}:{lineno}: column {name!r}: non-finite value {s!r}")
    return v


def load_csv(path) -> Dataset:
    """Read a comma-separated file: header row, features first, target last.

    Empty fields and ``nan`` (any case) mark missing features.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise InputError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        if len(header) < 2:
            raise InputError(f"{path}: need at least one feature column and a target column")
        width = len(header)
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if len(rec) != width:
                raise InputError(f"{path}:{lineno}: expected {width} fields, got {len(rec)}")
            rows.append([
                _parse_field(v, path, lineno, header[j], allow_missing=j < width - 1)
                for j, v in enumerate(rec)
            ])
    arr = np.array(rows, dtype=float).reshape(-1, width)
    return Dataset(header, arr[:, :-1], arr[:, -1])


def _fmt(v):
    return "" if math.isnan(v) else repr(float(v))


def save_csv(data: Dataset, path):
    """Write values with shortest round-trip repr; missing entries become empty fields."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.column_names)
        for xrow, yv in zip(data.X, data.y):
            w.writerow([_fmt(v) for v in xrow] + [_fmt(yv)])
