"""Relative importance of correlated predictors.

General dominance (exact Shapley decomposition of R^2) and the family of
orthogonalization-reallocation measures (relative weights, GCD, CAR scores and
their variants), together with a reproducible simulation harness that compares
them on random correlation matrices.
"""
from .corrmat import (
    AugmentedProblem,
    CorrelationMatrix,
    Scenario,
    classify_scenario,
    equicorrelation,
    ingest_dataset,
    subset_r_squared,
    validate,
    vif,
)
from .dominance import gda_reallocation, general_dominance, shapley_from_table, subset_engine
from .errors import NoConvergence, NumericalError, RelimpError, ValidationError
from .metrics import kendall_tau, rmse, wilcoxon_signed_rank
from .ortho import (
    Orthogonalization,
    gram_schmidt,
    johnson,
    orthogonal_response_correlations,
    orthogonalize,
    principal_components,
    varimax,
)
from .realloc import (
    ImportanceVector,
    ReallocationMatrix,
    corpa,
    evaluate_orm,
    ida,
    named_measures,
    reallocate,
    regpa,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedProblem",
    "CorrelationMatrix",
    "ImportanceVector",
    "NoConvergence",
    "NumericalError",
    "Orthogonalization",
    "ReallocationMatrix",
    "RelimpError",
    "Scenario",
    "ValidationError",
    "classify_scenario",
    "corpa",
    "equicorrelation",
    "evaluate_orm",
    "gda_reallocation",
    "general_dominance",
    "gram_schmidt",
    "ida",
    "ingest_dataset",
    "johnson",
    "kendall_tau",
    "named_measures",
    "orthogonal_response_correlations",
    "orthogonalize",
    "principal_components",
    "reallocate",
    "regpa",
    "rmse",
    "shapley_from_table",
    "subset_engine",
    "subset_r_squared",
    "validate",
    "varimax",
    "vif",
    "wilcoxon_signed_rank",
]
