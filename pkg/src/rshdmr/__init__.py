"""Sums of lower-dimensional Gaussian-process component functions,
with first-order-model imputation of single missing inputs."""

from .datasets import Dataset, MissingRecord, Scaler, load_csv, save_csv
from .errors import ConditioningError, InputError, NumericalError
from .gpr import GPRModel, KernelParams, gpr_fit, kernel_matrix, kernel_value, predict_mean, predict_variance
from .hdmr import (
    FitReport,
    HDMRModel,
    TrainingSchedule,
    component_outputs,
    hdmr_predict,
    hdmr_predict_std,
    hdmr_train,
    load_model,
    rmse,
    save_model,
    scale_factor,
)
from .imputation import (
    CandidateSet,
    ImputationPolicy,
    InverseLookupTable,
    build_lookup,
    impute_dataset,
    invert,
    residual_target,
)
from .projection import (
    SelectionMatrix,
    build_all_pairs,
    build_mixed,
    build_one_d,
    parse_matrices,
    project,
)

__version__ = "0.1.0"
