"""Selection matrices that map the full feature matrix onto component inputs.

A component function sees ``X @ A`` where ``A`` is a (D, d') matrix.  Columns
of the identity select variables; any other real entries build linear
combinations of variables (those are accepted but never generated here).
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InputError


@dataclass(frozen=True, eq=False)
class SelectionMatrix:
    entries: np.ndarray
    label: str = ""

    def __post_init__(self):
        A = np.array(self.entries, dtype=float, copy=True)
        if A.ndim == 1:
            A = A[:, None]
        if A.ndim != 2:
            raise InputError(f"selection matrix {self.label!r} must be 2-D")
        D, k = A.shape
        if k < 1 or k > D:
            raise InputError(f"selection matrix {self.label!r} has {k} columns; need 1 <= columns <= {D}")
        if not np.all(np.isfinite(A)):
            raise InputError(f"selection matrix {self.label!r} has non-finite entries")
        if np.any(np.all(A == 0, axis=0)):
            raise InputError(f"selection matrix {self.label!r} has an all-zero column")
        A.setflags(write=False)
        object.__setattr__(self, "entries", A)

    @property
    def n_rows(self) -> int:
        return self.entries.shape[0]

    @property
    def n_cols(self) -> int:
        return self.entries.shape[1]

    def basis_index(self):
        """Index of the selected variable if this is a single unit column, else None."""
        if self.n_cols != 1:
            return None
        col = self.entries[:, 0]
        nz = np.flatnonzero(col)
        if len(nz) == 1 and col[nz[0]] == 1.0:
            return int(nz[0])
        return None

    def __eq__(self, other):
        if not isinstance(other, SelectionMatrix):
            return NotImplemented
        return self.entries.shape == other.entries.shape and bool(np.all(self.entries == other.entries))

    __hash__ = None


def project(X, A: SelectionMatrix) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != A.n_rows:
        raise InputError(f"cannot project X of shape {X.shape} with a {A.n_rows}-row selection matrix")
    idx = A.basis_index()
    if idx is not None:
        # exact column copy, no arithmetic
        return X[:, [idx]].copy()
    return X @ A.entries


def _subset_matrix(D: int, subset) -> SelectionMatrix:
    A = np.zeros((D, len(subset)))
    for col, var in enumerate(subset):
        A[var, col] = 1.0
    return SelectionMatrix(A, label=",".join(f"x{v + 1}" for v in subset))


def _require_positive(D, name="D"):
    if int(D) != D or D < 1:
        raise InputError(f"{name} must be a positive integer, got {D}")


def build_order(D: int, order: int) -> list[SelectionMatrix]:
    """All selections of ``order`` distinct variables, lexicographic."""
    _require_positive(D)
    if order < 1 or order > D:
        raise InputError(f"order {order} is not in 1..{D}")
    return [_subset_matrix(D, s) for s in combinations(range(D), order)]


def build_one_d(D: int) -> list[SelectionMatrix]:
    _require_positive(D)
    return build_order(D, 1)


def build_all_pairs(D: int) -> list[SelectionMatrix]:
    _require_positive(D)
    if D < 2:
        raise InputError(f"pairs need D >= 2, got {D}")
    return build_order(D, 2)


def build_mixed(D: int, orders) -> list[SelectionMatrix]:
    _require_positive(D)
    orders = sorted(set(int(o) for o in orders))
    if not orders:
        raise InputError("build_mixed needs at least one order")
    bad = [o for o in orders if o < 1 or o > D]
    if bad:
        raise InputError(f"orders {bad} exceed dimensionality D={D}")
    out = []
    for o in orders:
        out.extend(build_order(D, o))
    return out


def build_full(D: int) -> list[SelectionMatrix]:
    _require_positive(D)
    return [SelectionMatrix(np.eye(D), label="full")]


_MIXED = re.compile(r"^mixed:(\d+(?:,\d+)*)$")


def parse_matrices(spec_text: str, D: int) -> list[SelectionMatrix]:
    """Parse a matrix specification.

    Either a builder keyword (``1d``, ``2d``, ``mixed:1,2``, ``full``) or an
    explicit list of bracketed matrices separated by semicolons, e.g.
    ``[[1,0],[0,1],[0,1]]; [[1,0],[1,0],[0,1]]``.  Whitespace is ignored.
    """
    _require_positive(D)
    text = re.sub(r"\s+", "", str(spec_text))
    if not text:
        raise InputError("empty matrix specification")
    key = text.lower()
    if key == "1d":
        return build_one_d(D)
    if key == "2d":
        return build_all_pairs(D)
    if key == "full":
        return build_full(D)
    m = _MIXED.match(key)
    if m:
        return build_mixed(D, [int(o) for o in m.group(1).split(",")])
    if not text.startswith("["):
        raise InputError(f"unknown matrix specification {spec_text!r}")

    matrices = []
    for k, chunk in enumerate(filter(None, text.split(";"))):
        label = f"A{k + 1}"
        try:
            rows = ast.literal_eval(chunk)
            A = np.array(rows, dtype=float)
        except (ValueError, SyntaxError, TypeError) as exc:
            raise InputError(f"matrix {label} could not be parsed: {chunk!r}") from exc
        if A.ndim != 2:
            raise InputError(f"matrix {label} must be a list of rows, got {chunk!r}")
        if A.shape[0] != D:
            raise InputError(f"matrix {label} has {A.shape[0]} rows, data has D={D}")
        try:
            matrices.append(SelectionMatrix(A, label=label))
        except InputError as exc:
            raise InputError(f"matrix {label}: {exc}") from exc
    return matrices


def format_matrices(matrices) -> str:
    """Inverse of the explicit branch of parse_matrices."""
    return "; ".join(
        "[" + ",".join("[" + ",".join(repr(float(v)) for v in row) + "]" for row in A.entries) + "]"
        for A in matrices
    )
