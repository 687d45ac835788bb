"""Group testing when the defective count is truncated-Poisson distributed."""

from .bounds import (
    BoundReport,
    adaptive_lower_bound,
    constructive_upper_bounds,
    error_exponent,
    fano_lower_bound,
    huffman_expected_length,
    ml_error_bound,
    mutual_info_t1,
    nonadaptive_ml_total_bound,
    semiadaptive_upper_bound,
    source_entropy,
)
from .channel import ErrorMode, Syndrome, inject_errors, syndrome
from .decode import DecodeResult, DecodeStatus, decode_ml, decode_support, decode_threshold
from .design import (
    BudgetExceededError,
    TestMatrix,
    bernoulli_matrix,
    chengdu_matrix,
    is_disjunct,
    is_error_tolerant_disjunct,
    method1_params,
    read_matrix,
)
from .dist import (
    BoundedLambda,
    RegimeError,
    RegimeWarning,
    TruncatedPoissonModel,
    UnboundedLambda,
    parse_regime,
    select_delta,
)
from .harness import ExperimentConfig, Scheme, run, sweep
from .semiadaptive import run_stages, stage_plan

__version__ = "0.1.0"

__all__ = [
    "BoundReport",
    "BoundedLambda",
    "BudgetExceededError",
    "DecodeResult",
    "DecodeStatus",
    "ErrorMode",
    "ExperimentConfig",
    "RegimeError",
    "RegimeWarning",
    "Scheme",
    "Syndrome",
    "TestMatrix",
    "TruncatedPoissonModel",
    "UnboundedLambda",
    "adaptive_lower_bound",
    "bernoulli_matrix",
    "chengdu_matrix",
    "constructive_upper_bounds",
    "decode_ml",
    "decode_support",
    "decode_threshold",
    "error_exponent",
    "fano_lower_bound",
    "huffman_expected_length",
    "inject_errors",
    "is_disjunct",
    "is_error_tolerant_disjunct",
    "method1_params",
    "ml_error_bound",
    "mutual_info_t1",
    "nonadaptive_ml_total_bound",
    "parse_regime",
    "read_matrix",
    "run",
    "run_stages",
    "select_delta",
    "semiadaptive_upper_bound",
    "source_entropy",
    "stage_plan",
    "sweep",
    "syndrome",
]
