"""Splitting and composition integrators with complex coefficients."""

from splitkit.errors import (
    BranchCutError,
    CatalogError,
    ClusteringError,
    FitError,
    GenerationError,
    InvalidInputError,
    NumericFailureError,
    SplitkitError,
    UnsupportedError,
)
from splitkit.schemes import (
    CATALOG_NAMES,
    BasicMethod,
    Composition,
    GeneratorSet,
    alternate,
    catalog,
    conjugate_scheme,
    parse_scheme,
    propagator,
    stage_count,
)
from splitkit.problems import ProblemKind, SplitProblem, exact_flow, make_problem

__all__ = [
    "CATALOG_NAMES",
    "BasicMethod",
    "BranchCutError",
    "CatalogError",
    "ClusteringError",
    "Composition",
    "FitError",
    "GenerationError",
    "GeneratorSet",
    "InvalidInputError",
    "NumericFailureError",
    "ProblemKind",
    "SplitProblem",
    "SplitkitError",
    "UnsupportedError",
    "alternate",
    "catalog",
    "conjugate_scheme",
    "exact_flow",
    "make_problem",
    "parse_scheme",
    "propagator",
    "stage_count",
]

__version__ = "0.1.0"
