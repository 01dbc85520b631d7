"""Structural learning and integrative decomposition of multi-view data.

Decomposes d matched data matrices into components that are globally
shared, partially shared, or specific to one view, learning both the
sparsity structure and the factorization itself.
"""

__version__ = "0.1.0"

from .bcv import BcvReport, FoldPlan, bcv_error_one_holdout, make_folds, select_structure
from .errors import SlideError
from .fit import SlideModel, VarianceReport, fit_with_structure, orthogonalize_blocks, variance_explained
from .pmf import (
    CandidateSet,
    LambdaGrid,
    PmfSolution,
    extract_candidates,
    group_soft_threshold,
    lambda_max,
    make_grid,
    procrustes_align,
    solve_pmf,
)
from .preprocess import MultiViewData, RawViews, center_and_scale, concatenate, load_views
from .simulate import (
    ExperimentConfig,
    ExperimentResult,
    GroundTruth,
    back_transform,
    exact_decompose,
    frobenius_loss,
    gen_case1,
    gen_case2,
    gen_threeview,
    noise_sigma,
    onestep_baseline,
    run_experiment,
)
from .structure import (
    PatternSet,
    StructureMatrix,
    canonicalize,
    count_structures,
    enumerate_structures,
    equivalent,
)

__all__ = [
    "BcvReport",
    "CandidateSet",
    "ExperimentConfig",
    "ExperimentResult",
    "FoldPlan",
    "GroundTruth",
    "LambdaGrid",
    "MultiViewData",
    "PatternSet",
    "PmfSolution",
    "RawViews",
    "SlideError",
    "SlideModel",
    "StructureMatrix",
    "VarianceReport",
    "back_transform",
    "bcv_error_one_holdout",
    "canonicalize",
    "center_and_scale",
    "concatenate",
    "count_structures",
    "enumerate_structures",
    "equivalent",
    "exact_decompose",
    "extract_candidates",
    "fit_with_structure",
    "frobenius_loss",
    "gen_case1",
    "gen_case2",
    "gen_threeview",
    "group_soft_threshold",
    "lambda_max",
    "load_views",
    "make_folds",
    "make_grid",
    "noise_sigma",
    "onestep_baseline",
    "orthogonalize_blocks",
    "procrustes_align",
    "run_experiment",
    "select_structure",
    "solve_pmf",
    "variance_explained",
]
