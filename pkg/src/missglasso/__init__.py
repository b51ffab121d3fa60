"""Sparse inverse covariance estimation and sparse regression with missing data."""

from .em import (FitReport, GaussianModel, SufficientStats,
                 conditional_mean_impute, e_step, fit_missglasso, m_step,
                 mle_em, observed_neg_loglik)
from .estimators import MissGlasso, MissGlassoCV, TwoStageRegressor
from .exceptions import (AllMissingColumn, CsvFormatError, DegenerateData,
                         FoldDegenerate, NotConverged, NotPositiveDefinite,
                         ZeroDiagonal, ZeroResponse)
from .glasso import GlassoProblem, GlassoSolution, glasso_fit
from .incomplete import IncompleteMatrix, mean_impute
from .lasso import lasso_gram
from .scaled_lasso import (InnerProducts, ScaledLassoFit, objective_classo,
                           scaled_lasso_fit)
from .select import LambdaPath, bic_score, cross_validate, lambda_grid, select_bic
from .simulate import (MAR, MCAR, MCARBernoulli, NMAR, ScenarioConfig,
                       apply_missingness, gen_sigma, kl_loss, knn_impute,
                       parse_scenario, run_scenario, sample_mvn, tpr_tnr)
from .two_stage import (JointModel, RegressionData, e_step_regression,
                        fit_two_stage, joint_model_assemble, predict)

__version__ = "0.1.0"

__all__ = [
    "AllMissingColumn", "CsvFormatError", "DegenerateData", "FitReport",
    "FoldDegenerate", "GaussianModel", "GlassoProblem", "GlassoSolution",
    "IncompleteMatrix", "InnerProducts", "JointModel", "LambdaPath", "MAR",
    "MCAR", "MCARBernoulli", "MissGlasso", "MissGlassoCV", "NMAR",
    "NotConverged", "NotPositiveDefinite", "RegressionData", "ScaledLassoFit",
    "ScenarioConfig", "SufficientStats", "TwoStageRegressor", "ZeroDiagonal",
    "ZeroResponse", "apply_missingness", "bic_score", "conditional_mean_impute",
    "cross_validate", "e_step", "e_step_regression", "fit_missglasso",
    "fit_two_stage", "gen_sigma", "glasso_fit", "joint_model_assemble",
    "kl_loss", "knn_impute", "lambda_grid", "lasso_gram", "m_step",
    "mean_impute", "mle_em", "objective_classo", "observed_neg_loglik",
    "parse_scenario", "predict", "run_scenario", "sample_mvn",
    "scaled_lasso_fit", "select_bic", "tpr_tnr",
]
