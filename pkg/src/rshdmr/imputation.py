"""Single-missing-value imputation by inverting first-order component functions.

For a row with one unknown feature ``x_i`` and known target ``y``, a
first-order model gives ``f_i(x_i) = y - sum_{j != i} f_j(x_j)``.  The inverse
of ``f_i`` is read off a lookup table of ``f_i`` on the grid ``j / s``,
``j = 0..s-1``.  Candidates are

* every grid point whose value lies within ``d_min + delta`` of the residual
  target, ``d_min`` being the distance of the best match, and
* (``brackets=True``) for every grid cell ``[I_j, I_j+1]`` whose value range,
  widened by ``delta``, contains the target, the endpoint nearer in value.

The second rule keeps one candidate on each branch of a non-monotone
component even where the branch is steep and the grid step in value exceeds
``delta``.  Candidates are ordered by distance, then abscissa; the first one
(always the global best match) is used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset, MissingRecord
from .errors import InputError
from .gpr import predict_mean
from .hdmr import HDMRModel, rmse


@dataclass(frozen=True)
class ImputationPolicy:
    delta: float = 0.0
    num_subintervals: int = 1000
    brackets: bool = True

    def __post_init__(self):
        if not self.delta >= 0:
            raise InputError(f"delta must be >= 0, got {self.delta}")
        if int(self.num_subintervals) != self.num_subintervals or self.num_subintervals < 1:
            raise InputError(f"num_subintervals must be a positive integer, got {self.num_subintervals}")


@dataclass(frozen=True, eq=False)
class InverseLookupTable:
    """``values[i, j]`` is variable i's component function at ``grid[j]``.

    The grid holds left endpoints ``j / s``; 1.0 itself is not a grid point,
    but ``edge_values`` (each component at 1.0) closes the last cell so that it
    can bracket a target.
    """

    num_subintervals: int
    grid: np.ndarray
    values: np.ndarray
    edge_values: np.ndarray


@dataclass
class CandidateSet:
    row_index: int
    variable_index: int
    target_value: float
    candidates: np.ndarray
    distances: np.ndarray = field(repr=False, default=None)

    @property
    def chosen(self) -> float:
        return float(self.candidates[0])


def first_order_components(model: HDMRModel) -> list:
    """Component index for each variable; raises unless the model is first order.

    First order here means every selection matrix is a single unit column and
    every variable has exactly one component.
    """
    owner = [None] * model.D
    for k, A in enumerate(model.matrices):
        v = A.basis_index()
        if v is None:
            raise InputError(f"component {k} ({A.label}) is not a single-variable selection; "
                             "imputation needs a first-order model")
        if owner[v] is not None:
            raise InputError(f"variable {v} has more than one component")
        owner[v] = k
    missing = [v for v, k in enumerate(owner) if k is None]
    if missing:
        raise InputError(f"variables {missing} have no component function")
    return owner


def build_lookup(model: HDMRModel, num_subintervals: int) -> InverseLookupTable:
    if int(num_subintervals) != num_subintervals or num_subintervals < 1:
        raise InputError(f"num_subintervals must be a positive integer, got {num_subintervals}")
    owner = first_order_components(model)
    grid = np.arange(num_subintervals) / num_subintervals
    values = np.vstack([predict_mean(model.gprs[k], grid[:, None]) for k in owner])
    edge = np.array([predict_mean(model.gprs[k], [[1.0]])[0] for k in owner])
    for a in (grid, values, edge):
        a.setflags(write=False)
    return InverseLookupTable(int(num_subintervals), grid, values, edge)


def _single_missing(x_row) -> int:
    x_row = np.asarray(x_row, dtype=float).reshape(-1)
    holes = np.flatnonzero(np.isnan(x_row))
    if len(holes) != 1:
        raise InputError(f"row must have exactly one missing entry, found {len(holes)}")
    return int(holes[0])


def residual_target(model: HDMRModel, x_row, y):
    """Return ``(variable_index, y - sum of the other components at x_row)``."""
    x_row = np.asarray(x_row, dtype=float).reshape(-1)
    if x_row.shape[0] != model.D:
        raise InputError(f"row has {x_row.shape[0]} entries, model has D={model.D}")
    if y is None or not np.isfinite(y):
        raise InputError("the target of a row to impute must be known")
    i = _single_missing(x_row)
    owner = first_order_components(model)
    target = float(y)
    for v, k in enumerate(owner):
        if v != i:
            target -= float(predict_mean(model.gprs[k], [[x_row[v]]])[0])
    return i, target


def invert(table: InverseLookupTable, variable_index: int, target_value: float,
           policy: ImputationPolicy = ImputationPolicy(), row_index: int = -1) -> CandidateSet:
    if not 0 <= variable_index < table.values.shape[0]:
        raise InputError(f"variable index {variable_index} outside table")
    f = table.values[variable_index]
    dist = np.abs(f - target_value)
    hit = dist <= dist.min() + policy.delta
    if policy.brackets:
        right = np.append(f[1:], table.edge_values[variable_index])
        lo, hi = np.minimum(f, right), np.maximum(f, right)
        cell = (lo - policy.delta <= target_value) & (target_value <= hi + policy.delta)
        right_dist = np.abs(right - target_value)
        # left endpoint when it is at least as close; last cell has no right grid point
        left_wins = dist <= right_dist
        left_wins[-1] = True
        hit[cell & left_wins] = True
        hit[1:][(cell & ~left_wins)[:-1]] = True
    keep = np.flatnonzero(hit)
    order = np.lexsort((table.grid[keep], dist[keep]))
    keep = keep[order]
    return CandidateSet(int(row_index), int(variable_index), float(target_value),
                        table.grid[keep].copy(), dist[keep].copy())


@dataclass
class ImputationResult:
    X: np.ndarray
    candidate_sets: list
    report: dict | None = None


def _batch_targets(model: HDMRModel, X, y, rows):
    owner = first_order_components(model)
    sub = X[rows]
    contrib = np.zeros_like(sub)
    for v, k in enumerate(owner):
        known = ~np.isnan(sub[:, v])
        if known.any():
            contrib[known, v] = predict_mean(model.gprs[k], sub[known, v][:, None])
    # the hole's own column stays 0, so the row sum is the sum over the others
    return y[rows] - contrib.sum(axis=1)


def impute_dataset(model: HDMRModel, data: Dataset, policy: ImputationPolicy = ImputationPolicy(),
                   truth: MissingRecord | None = None, table: InverseLookupTable | None = None):
    """Fill every hole of ``data`` (scaled like the model's training data).

    Every incomplete row must have exactly one hole.  When ``truth`` is given
    the result carries a per-variable report of imputation RMSE (chosen
    candidate, and best candidate in hindsight).
    """
    if data.D != model.D:
        raise InputError(f"data has D={data.D}, model has D={model.D}")
    mask = data.missing_mask
    counts = mask.sum(axis=1)
    bad = np.flatnonzero(counts > 1)
    if len(bad):
        raise InputError(f"rows with more than one missing value: {bad.tolist()}")
    rows = np.flatnonzero(counts == 1)
    table = table if table is not None else build_lookup(model, policy.num_subintervals)
    X = data.X.copy()
    sets = []
    if len(rows):
        holes = np.argmax(mask[rows], axis=1)
        targets = _batch_targets(model, data.X, data.y, rows)
        for r, v, t in zip(rows, holes, targets):
            cs = invert(table, int(v), float(t), policy, row_index=int(r))
            X[r, v] = cs.chosen
            sets.append(cs)
    report = imputation_report(sets, truth, data.feature_names) if truth is not None else None
    return ImputationResult(X, sets, report)


def imputation_report(candidate_sets, truth: MissingRecord, feature_names) -> dict:
    """Per-variable RMSE of the imputed values against withheld truth."""
    lookup = {(int(r), int(c)): float(v) for r, c, v in zip(truth.rows, truth.columns, truth.values)}
    per_var: dict = {}
    for cs in candidate_sets:
        key = (cs.row_index, cs.variable_index)
        if key not in lookup:
            continue
        true = lookup[key]
        best = cs.candidates[np.argmin(np.abs(cs.candidates - true))]
        entry = per_var.setdefault(cs.variable_index, ([], [], []))
        entry[0].append(cs.chosen)
        entry[1].append(best)
        entry[2].append(true)
    report = {}
    for v in sorted(per_var):
        chosen, best, true = (np.array(a) for a in per_var[v])
        report[feature_names[v]] = {
            "count": int(len(true)),
            "rmse": rmse(chosen, true),
            "rmse_best": rmse(best, true),
        }
    return report
