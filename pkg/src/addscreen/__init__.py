"""Nonparametric screening and structure-identifying additive spline fits."""

__version__ = "0.1.0"

from .datagen import Scenario, gen_example, make_rng
from .screening import ActiveSet, ScreeningConfig, UtilityScores, compute_scores, select_active
from .solver import FitResult, PenaltyConfig, PipelineConfig, fit_path, fit_pipeline, loocv_pe, predict
from .splines import SplineBasis, build_basis, eval_basis, eval_basis_d2, gram_matrices

__all__ = [
    "ActiveSet",
    "FitResult",
    "PenaltyConfig",
    "PipelineConfig",
    "Scenario",
    "ScreeningConfig",
    "SplineBasis",
    "UtilityScores",
    "build_basis",
    "compute_scores",
    "eval_basis",
    "eval_basis_d2",
    "fit_path",
    "fit_pipeline",
    "gen_example",
    "gram_matrices",
    "loocv_pe",
    "make_rng",
    "predict",
    "select_active",
]
