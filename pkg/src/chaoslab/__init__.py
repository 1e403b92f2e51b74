"""Exact and sampled computations for multiple Rademacher chaos inequalities."""

from __future__ import annotations

from .chaos import (
    BudgetExceeded,
    MomentResult,
    chaos_matrix,
    mean_abs_rademacher_sum,
    moment_l2_parseval,
    moment_p,
    moment_p_exact,
    moment_p_exact_vec,
    moment_p_mc,
    rademacher_eval,
)
from .constructions import KszCertificate, build_rm, check_rm, ksz_random, ksz_search, rm_witness, slice_moments
from .forms import (
    FormError,
    NormCertificate,
    SparseMultilinearForm,
    SupNormInfeasible,
    evaluate,
    form_to_tensor,
    format_form_text,
    parse_form_text,
    sup_norm,
    tensor_to_form,
)
from .inequalities import (
    CONSTANTS,
    BoundReport,
    FitResult,
    fit_exponent,
    khinchin_ratio,
    ksz_exponent_bound,
    lower_bound_from_slices,
    verify_contraction,
    verify_hilbert_prop,
    verify_mixed,
    verify_multik,
    verify_multiple_kahane,
    verify_prop,
    verify_theorem1,
)
from .search import SearchConfig, SearchError, SearchInfeasible, SearchResult, estimate_A1, exponent_sweep, maximize_ratio
from .tensor import (
    CoefficientTensor,
    MixedNormSpec,
    TensorError,
    VectorTensor,
    ell_r_norm,
    format_tensor_text,
    max_abs,
    mixed_norm,
    parse_tensor_text,
    slice_last,
    stack_last,
)

__version__ = "0.1.0"
