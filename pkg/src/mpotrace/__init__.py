"""Trace functionals of large Hermitian operators in matrix product form,
estimated by a global Lanczos recurrence evaluated as Gauss quadrature."""

from .errors import (
    CapacityError,
    DimensionError,
    EvaluationError,
    HermiticityError,
    MpoTraceError,
    NumericError,
)
from .mpo import (
    Mpo,
    Mps,
    adjoint,
    canonicalize,
    dense,
    exact_add,
    exact_multiply,
    frobenius_norm,
    hermitian_part,
    identity_mpo,
    inner_product,
    inner_product_scaled,
    load_json,
    log_norm,
    mpo_from_dense,
    mpo_trace,
    normalized,
    save_json,
    scalar_multiply,
    shift_log_scale,
    truncate_svd,
    vectorize,
    zero_mpo,
)
from .sweeping import (
    SweepOptions,
    SweepResult,
    multiply_and_optimize,
    sum_and_optimize,
)
from .lanczos import (
    IterationRecord,
    QuadratureRun,
    SpectralFunction,
    StoppingConfig,
    TridiagonalMatrix,
    check_stop,
    entropy_derivative_sign,
    entropy_from_half_state,
    entropy_integrand,
    gauss_quadrature,
    global_lanczos,
    identity_function,
    polynomial_function,
    trace_of_positive,
)
from .models import (
    IsingParams,
    ising_mpo,
    random_hermitian_mpo,
    thermal_half_state,
    thermal_half_state_report,
)
from .exact import (
    dense_global_lanczos,
    dense_half_state_mpo,
    entropy_from_spectrum,
    exact_entropy_dense,
    exact_entropy_free_fermion,
    ising_dense,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "DimensionError",
    "EvaluationError",
    "HermiticityError",
    "MpoTraceError",
    "NumericError",
    "Mpo",
    "Mps",
    "adjoint",
    "canonicalize",
    "dense",
    "exact_add",
    "exact_multiply",
    "frobenius_norm",
    "hermitian_part",
    "identity_mpo",
    "inner_product",
    "inner_product_scaled",
    "load_json",
    "log_norm",
    "mpo_from_dense",
    "mpo_trace",
    "normalized",
    "save_json",
    "scalar_multiply",
    "shift_log_scale",
    "truncate_svd",
    "vectorize",
    "zero_mpo",
    "SweepOptions",
    "SweepResult",
    "multiply_and_optimize",
    "sum_and_optimize",
    "IterationRecord",
    "QuadratureRun",
    "SpectralFunction",
    "StoppingConfig",
    "TridiagonalMatrix",
    "check_stop",
    "entropy_derivative_sign",
    "entropy_from_half_state",
    "entropy_integrand",
    "gauss_quadrature",
    "global_lanczos",
    "identity_function",
    "polynomial_function",
    "trace_of_positive",
    "IsingParams",
    "ising_mpo",
    "random_hermitian_mpo",
    "thermal_half_state",
    "thermal_half_state_report",
    "dense_global_lanczos",
    "dense_half_state_mpo",
    "entropy_from_spectrum",
    "exact_entropy_dense",
    "exact_entropy_free_fermion",
    "ising_dense",
    "__version__",
]
