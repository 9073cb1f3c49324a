"""HDMR model: a function as a sum of GP component functions over projected inputs.

Training is self-consistent backfitting.  Every component's stored output on
the training set starts at ``y / N``.  In each cycle the components are
visited in list order; component ``i`` is refit to the residual
``y - sum_{j != i} out_j`` and its stored output becomes ``a(c)`` times its new
prediction, where ``a(c)`` ramps linearly from ``scale_start`` up to 1.  The
ramp keeps the first fits from absorbing what later components should carry.

Predictions sum the unscaled component means.  ``hdmr_predict_std`` reports
the square root of the summed component variances.  It says how tightly the
data pin down the posterior mean and can be far smaller than the actual fit
error of a low-order model.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from .datasets import Dataset, Scaler
from .errors import ConditioningError, InputError, NumericalError
from .gpr import (
    GPRModel,
    KernelParams,
    factorize,
    fit_with_factor,
    kernel_matrix,
    predict_mean,
    predict_variance,
)
from .projection import SelectionMatrix, project

logger = logging.getLogger(__name__)

MODEL_FORMAT = "rshdmr-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainingSchedule:
    """Cycle count and the linear ramp ``a(c) = min(s + (1 - s) e c / C, 1)``."""

    cycles: int = 50
    scale_start: float = 0.1
    scale_rate: float = 2.0

    def __post_init__(self):
        if int(self.cycles) != self.cycles or self.cycles < 1:
            raise InputError(f"cycles must be a positive integer, got {self.cycles}")
        if not 0 < self.scale_start <= 1:
            raise InputError(f"scale_start must lie in (0, 1], got {self.scale_start}")
        if not self.scale_rate > 0:
            raise InputError(f"scale_rate must be > 0, got {self.scale_rate}")


def scale_factor(c: int, schedule: TrainingSchedule) -> float:
    C = schedule.cycles
    if int(c) != c or not 0 <= c < C:
        raise InputError(f"cycle index {c} outside 0..{C - 1}")
    s, e = schedule.scale_start, schedule.scale_rate
    return min(s + (1.0 - s) * e * c / C, 1.0)


@dataclass(frozen=True, eq=False)
class HDMRModel:
    components: tuple
    schedule: TrainingSchedule
    train_rmse_history: np.ndarray
    scaler: Scaler | None = None
    column_names: list | None = None

    def __post_init__(self):
        comps = tuple((A, g) for A, g in self.components)
        if not comps:
            raise InputError("an HDMR model needs at least one component")
        D = comps[0][0].n_rows
        if any(A.n_rows != D for A, _ in comps):
            raise InputError("all selection matrices must have the same row count")
        object.__setattr__(self, "components", comps)
        hist = np.array(self.train_rmse_history, dtype=float)
        hist.setflags(write=False)
        object.__setattr__(self, "train_rmse_history", hist)

    @property
    def D(self) -> int:
        return self.components[0][0].n_rows

    @property
    def matrices(self) -> list:
        return [A for A, _ in self.components]

    @property
    def gprs(self) -> list:
        return [g for _, g in self.components]

    def __len__(self):
        return len(self.components)


@dataclass
class FitReport:
    rmse_train: float
    history: np.ndarray
    components: list = field(default_factory=list)
    rmse_eval: float | None = None
    rmse_train_raw: float | None = None
    rmse_eval_raw: float | None = None
    history_raw: np.ndarray | None = None

    def to_dict(self) -> dict:
        d = {
            "rmse_train": self.rmse_train,
            "rmse_eval": self.rmse_eval,
            "rmse_train_raw": self.rmse_train_raw,
            "rmse_eval_raw": self.rmse_eval_raw,
            "history": [float(v) for v in self.history],
            "components": self.components,
        }
        if self.history_raw is not None:
            d["history_raw"] = [float(v) for v in self.history_raw]
        return d


def rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if pred.shape != truth.shape:
        raise InputError(f"length mismatch: {pred.shape[0]} predictions vs {truth.shape[0]} targets")
    if pred.size == 0:
        raise InputError("rmse of an empty vector is undefined")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def _unpack(data):
    if isinstance(data, Dataset):
        return data.X, data.y, data.scaler, data.column_names
    X, y = data
    return np.asarray(X, dtype=float), np.asarray(y, dtype=float).reshape(-1), None, None


def hdmr_train(data, matrices, kernel: KernelParams, schedule: TrainingSchedule = TrainingSchedule(),
               eval_data=None, callback=None):
    """Fit an HDMR model by self-consistent cycles.

    Args:
        data: a complete Dataset, or an ``(X, y)`` pair.
        matrices: selection matrices, fitted in this order.
        kernel: hyperparameters shared by every component GP.
        schedule: cycle count and annealing ramp.
        eval_data: optional Dataset or ``(X, y)`` scored after training.
        callback: optional ``callback(cycle, component, target, others, scale)``
            called after each residual target is formed; for instrumentation.

    Returns:
        ``(HDMRModel, FitReport)``
    """
    X, y, scaler, names = _unpack(data)
    matrices = list(matrices)
    if not matrices:
        raise InputError("need at least one selection matrix")
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise InputError(f"X of shape {X.shape} does not match {y.shape[0]} targets")
    if not np.all(np.isfinite(X)):
        raise InputError("training data contains missing values; impute or drop them first")
    if not np.all(np.isfinite(y)):
        raise InputError("training targets must be finite")
    for k, A in enumerate(matrices):
        if A.n_rows != X.shape[1]:
            raise InputError(f"matrix {k} ({A.label}) has {A.n_rows} rows, data has D={X.shape[1]}")

    N, M = len(matrices), X.shape[0]
    inputs = [project(X, A) for A in matrices]
    factors, whitened = [], []
    for i, P in enumerate(inputs):
        K = kernel_matrix(P, P, kernel)
        try:
            factors.append(factorize(K, kernel.noise_variance))
        except ConditioningError as exc:
            raise ConditioningError(f"cycle 0, component {i} ({matrices[i].label}): {exc}",
                                    exc.jitter, cycle=0, component=i) from exc
        # L^-1 K is fixed per component; training means then follow predict_mean's arithmetic
        whitened.append(solve_triangular(factors[-1][0], K, lower=True, check_finite=False))

    # stored outputs start at Y/N, already scaled by a(0)
    outputs = np.tile(scale_factor(0, schedule) * y / N, (N, 1))
    means = np.zeros((N, M))
    fitted: list[GPRModel | None] = [None] * N
    history = []
    keep = np.ones(N, dtype=bool)
    for c in range(schedule.cycles):
        a = scale_factor(c, schedule)
        for i in range(N):
            keep[i] = False
            others = outputs[keep].sum(axis=0) if N > 1 else np.zeros(M)
            keep[i] = True
            target = y - others
            if not np.all(np.isfinite(target)):
                raise NumericalError(f"non-finite residual target at cycle {c}, component {i}")
            if callback is not None:
                callback(c, i, target, others, a)
            L, jitter = factors[i]
            fitted[i] = fit_with_factor(inputs[i], target, kernel, L, jitter)
            means[i] = whitened[i].T @ fitted[i].alpha
            outputs[i] = a * means[i]
        history.append(rmse(means.sum(axis=0), y))
        logger.debug("cycle %d a=%.4f train rmse=%.6g", c, a, history[-1])

    model = HDMRModel(tuple(zip(matrices, fitted)), schedule, history, scaler, names)
    report = FitReport(
        rmse_train=history[-1],
        history=np.array(history),
        components=[
            {"label": A.label, "mean": float(m.mean()), "std": float(m.std()),
             "min": float(m.min()), "max": float(m.max())}
            for A, m in zip(matrices, means)
        ],
    )
    if scaler is not None:
        report.history_raw = report.history * scaler.y_range
        report.rmse_train_raw = float(report.history_raw[-1])
    if eval_data is not None:
        Xe, ye, _, _ = _unpack(eval_data)
        report.rmse_eval = rmse(hdmr_predict(model, Xe), ye)
        if scaler is not None:
            report.rmse_eval_raw = report.rmse_eval * scaler.y_range
    return model, report


def _check_query(model: HDMRModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.D:
        raise InputError(f"query of shape {X.shape} does not match model dimensionality D={model.D}")
    if not np.all(np.isfinite(X)):
        raise InputError("query rows contain missing values")
    return X


def component_outputs(model: HDMRModel, X) -> np.ndarray:
    """(m, N) matrix whose column i is component i's mean on X."""
    X = _check_query(model, X)
    return np.column_stack([predict_mean(g, project(X, A)) for A, g in model.components])


def hdmr_predict(model: HDMRModel, X) -> np.ndarray:
    X = _check_query(model, X)
    total = np.zeros(X.shape[0])
    for A, g in model.components:
        total += predict_mean(g, project(X, A))
    return total


def hdmr_predict_std(model: HDMRModel, X) -> np.ndarray:
    X = _check_query(model, X)
    var = np.zeros(X.shape[0])
    for A, g in model.components:
        var += predict_variance(g, project(X, A))
    return np.sqrt(var)


def save_model(model: HDMRModel, path):
    """Write a model to a versioned ``.npz`` archive (no pickling)."""
    meta = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "D": model.D,
        "schedule": {
            "cycles": model.schedule.cycles,
            "scale_start": model.schedule.scale_start,
            "scale_rate": model.schedule.scale_rate,
        },
        "history": [float(v) for v in model.train_rmse_history],
        "scaler": model.scaler.to_dict() if model.scaler is not None else None,
        "column_names": model.column_names,
        "components": [
            {"label": A.label, "length_scale": g.kernel.length_scale,
             "noise_variance": g.kernel.noise_variance, "jitter": g.jitter}
            for A, g in model.components
        ],
    }
    arrays = {"meta": np.array(json.dumps(meta))}
    for i, (A, g) in enumerate(model.components):
        arrays[f"c{i}_matrix"] = A.entries
        arrays[f"c{i}_inputs"] = g.train_inputs
        arrays[f"c{i}_chol"] = g.chol_factor
        arrays[f"c{i}_weights"] = g.weights
        arrays[f"c{i}_alpha"] = g.alpha
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path) -> HDMRModel:
    path = Path(path)
    try:
        archive = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise InputError(f"{path}: not a readable model file ({exc})") from exc
    with archive:
        if "meta" not in archive.files:
            raise InputError(f"{path}: missing model metadata")
        meta = json.loads(str(archive["meta"]))
        if meta.get("format") != MODEL_FORMAT:
            raise InputError(f"{path}: unrecognised model format {meta.get('format')!r}")
        if meta.get("version") != MODEL_VERSION:
            raise InputError(f"{path}: unsupported model version {meta.get('version')!r}")
        comps = []
        for i, cm in enumerate(meta["components"]):
            A = SelectionMatrix(archive[f"c{i}_matrix"], label=cm["label"])
            kernel = KernelParams(cm["length_scale"], cm["noise_variance"])
            g = GPRModel(
                _readonly(archive[f"c{i}_inputs"]), kernel,
                _readonly(archive[f"c{i}_chol"]), _readonly(archive[f"c{i}_weights"]),
                float(cm["jitter"]), _readonly(archive[f"c{i}_alpha"]),
            )
            comps.append((A, g))
    scaler = Scaler.from_dict(meta["scaler"]) if meta["scaler"] is not None else None
    model = HDMRModel(tuple(comps), TrainingSchedule(**meta["schedule"]),
                      meta["history"], scaler, meta["column_names"])
    if model.D != meta["D"]:
        raise InputError(f"{path}: stored D={meta['D']} disagrees with matrices")
    return model


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a
