"""Capacity-regularized multi-kernel sparse SVM.

Hinge loss plus per-kernel-family L1 penalties weighted by estimated
Rademacher complexities, trained by linear programming or coordinate
descent, with sparse prediction and a cross-validation benchmark harness.
"""

__version__ = "0.1.0"

from .cd_solver import CDConfig, CDTrace, line_search_exact, train_cd
from .complexity import (
    PenaltyVector,
    Spectrum,
    SpectrumCache,
    build_penalties,
    eigenvalues_sym,
    local_penalty,
    mc_rademacher,
    penalty_vector,
    poly_dim,
    polydim_penalty,
    trace_penalty,
)
from .data import (
    Dataset,
    FoldAssignment,
    Standardizer,
    load_csv,
    load_libsvm,
    make_folds,
    split_cv,
    standardize,
)
from .errors import (
    CapacityError,
    CapsvmError,
    ConfigError,
    ExtractionError,
    FormatError,
    HarnessError,
    LabelError,
    NumericError,
    ParseError,
)
from .harness import CVReport, GridSpec, benchmark_table, default_grid, run_cv
from .kernels import (
    GramStack,
    KernelSpec,
    build_stack,
    cross_gram,
    eval_kernel,
    gram_matrix,
    parse_kernel_specs,
)
from .lp_solver import (
    LPProblem,
    LPSolution,
    build_lp,
    export_lp_file,
    extract_model,
    read_lp_file,
    simplex_solve,
    train_lp,
)
from .model import (
    SparseModel,
    deserialize,
    from_coefs,
    predict_label,
    predict_raw,
    serialize,
    support_count,
)
from .objective import (
    CoefMatrix,
    MarginState,
    coordinate_subgradient,
    margins,
    objective_value,
    steepest_coordinate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
