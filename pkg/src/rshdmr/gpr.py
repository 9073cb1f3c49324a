"""Exact Gaussian process regression with an isotropic squared-exponential kernel.

The kernel has unit signal variance,

    k(a, b) = exp(-|a - b|^2 / (2 l^2)),

and the prior mean is zero, so targets are expected to be pre-scaled (to
[0, 1] in every workflow of this package).  The linear algebra goes through a
Cholesky factor of ``K + noise * I``; if that factorization fails a small
jitter is added to the diagonal, escalating through ``JITTER_LADDER``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist

from .errors import ConditioningError, InputError

JITTER_LADDER = (1e-12, 1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters shared by every component GP."""

    length_scale: float = 0.6
    noise_variance: float = 1e-10

    def __post_init__(self):
        if not np.isfinite(self.length_scale) or self.length_scale <= 0:
            raise InputError(f"length_scale must be > 0, got {self.length_scale}")
        if not np.isfinite(self.noise_variance) or self.noise_variance < 0:
            raise InputError(f"noise_variance must be >= 0, got {self.noise_variance}")


@dataclass(frozen=True, eq=False)
class GPRModel:
    """A trained GP.

    Attributes:
        train_inputs: (n, d) retained training inputs.
        kernel: hyperparameters used for the fit.
        chol_factor: lower Cholesky factor of ``K + (noise + jitter) I``.
        weights: solution of ``(K + (noise + jitter) I) w = y``.
        jitter: extra diagonal term that was needed for the factorization.
        alpha: ``L^-1 y``; predictions use ``(L^-1 k*)^T alpha``, which stays
            linear in y to rounding even when the weights are huge.
    """

    train_inputs: np.ndarray
    kernel: KernelParams
    chol_factor: np.ndarray
    weights: np.ndarray
    jitter: float = 0.0
    alpha: np.ndarray | None = None

    def __post_init__(self):
        if self.alpha is None:
            object.__setattr__(self, "alpha", _frozen(self.chol_factor.T @ self.weights))

    @property
    def n_inputs(self) -> int:
        return self.train_inputs.shape[1]


def _as_matrix(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InputError(f"{name} must be a 2-D array, got shape {X.shape}")
    return X


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def kernel_value(a, b, params: KernelParams) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"kernel_value needs two vectors of equal length, got {a.shape} and {b.shape}")
    d2 = float(np.sum((a - b) ** 2))
    return float(np.exp(-d2 / (2.0 * params.length_scale**2)))


def kernel_matrix(X1, X2, params: KernelParams) -> np.ndarray:
    """Return the (m, n) matrix of kernel values between rows of X1 and X2."""
    X1 = _as_matrix(X1, "X1")
    X2 = _as_matrix(X2, "X2")
    if X1.shape[1] != X2.shape[1]:
        raise InputError(f"column mismatch: {X1.shape[1]} vs {X2.shape[1]}")
    # cdist forms squared differences directly: exact zeros on coincident rows
    d2 = cdist(X1, X2, metric="sqeuclidean")
    return np.exp(-d2 / (2.0 * params.length_scale**2))


def factorize(K: np.ndarray, noise_variance: float):
    """Cholesky-factor ``K + noise I``, escalating jitter on failure.

    Returns ``(L, jitter)``.  Raises ConditioningError once the ladder is
    exhausted.
    """
    n = K.shape[0]
    A = K + noise_variance * np.eye(n)
    try:
        return np.linalg.cholesky(A), 0.0
    except np.linalg.LinAlgError:
        pass
    for jitter in JITTER_LADDER:
        try:
            return np.linalg.cholesky(A + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            continue
    raise ConditioningError(
        f"Cholesky factorization failed for n={n} even with jitter {JITTER_LADDER[-1]:g}",
        jitter=JITTER_LADDER[-1],
    )


def _check_training(X, y):
    X = _as_matrix(X, "X_train")
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] == 0:
        raise InputError("gpr_fit needs at least one training row")
    if y.shape[0] != X.shape[0]:
        raise InputError(f"X_train has {X.shape[0]} rows but y_train has {y.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InputError("training data contains missing or non-finite values")
    return X, y


def fit_with_factor(X, y, params: KernelParams, chol_factor, jitter=0.0) -> GPRModel:
    """Build a model from an existing factor of ``K(X, X) + noise I``.

    Used by the self-consistent trainer: the factor depends only on the
    inputs, so it is computed once per component and reused every cycle.
    """
    X, y = _check_training(X, y)
    alpha = solve_triangular(chol_factor, y, lower=True, check_finite=False)
    weights = solve_triangular(chol_factor, alpha, lower=True, trans="T", check_finite=False)
    return GPRModel(_frozen(X), params, _frozen(chol_factor), _frozen(weights), float(jitter),
                    _frozen(alpha))


def gpr_fit(X_train, y_train, params: KernelParams) -> GPRModel:
    X, y = _check_training(X_train, y_train)
    L, jitter = factorize(kernel_matrix(X, X, params), params.noise_variance)
    return fit_with_factor(X, y, params, L, jitter)


def _cross_kernel(model: GPRModel, X_query) -> np.ndarray:
    Xq = _as_matrix(X_query, "X_query")
    if Xq.shape[1] != model.n_inputs:
        raise InputError(f"query has {Xq.shape[1]} columns, model expects {model.n_inputs}")
    return kernel_matrix(Xq, model.train_inputs, model.kernel)


def _whitened(model: GPRModel, X_query) -> np.ndarray:
    Ks = _cross_kernel(model, X_query)
    return solve_triangular(model.chol_factor, Ks.T, lower=True, check_finite=False)


def predict_mean(model: GPRModel, X_query) -> np.ndarray:
    return _whitened(model, X_query).T @ model.alpha


def predict_mean_and_variance(model: GPRModel, X_query):
    V = _whitened(model, X_query)
    return V.T @ model.alpha, np.maximum(1.0 - np.einsum("ij,ij->j", V, V), 0.0)


def predict_variance(model: GPRModel, X_query) -> np.ndarray:
    """Diagonal of ``K** - K* K^-1 K*^T``, clamped at zero.

    Measures uncertainty of the posterior mean only; it ignores model misfit.
    """
    V = _whitened(model, X_query)
    var = 1.0 - np.einsum("ij,ij->j", V, V)
    return np.maximum(var, 0.0)
