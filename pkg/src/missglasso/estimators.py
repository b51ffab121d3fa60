"""Estimator wrappers following the scikit-learn fit/transform/predict API.

These are thin adapters over the functional core so the solvers compose
with pipelines, grid search and model inspection tooling.  Missing values
are encoded as NaN.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .em import conditional_mean_impute, fit_missglasso, observed_neg_loglik
from .incomplete import IncompleteMatrix
from .select import cross_validate, lambda_grid, select_bic
from .two_stage import RegressionData, fit_two_stage
from .two_stage import predict as _predict_two_stage


def check_incomplete(X, estimator, min_samples=1):
    """Validate an array that may contain NaN and wrap it."""
    try:
        X = check_array(X, ensure_all_finite="allow-nan", dtype=float,
                        ensure_min_samples=min_samples, estimator=estimator)
    except TypeError:  # scikit-learn < 1.6 spells the flag differently
        X = check_array(X, force_all_finite="allow-nan", dtype=float,
                        ensure_min_samples=min_samples, estimator=estimator)
    return IncompleteMatrix(X)


class MissGlasso(BaseEstimator, TransformerMixin):
    """l1-penalized Gaussian mean/precision estimation with missing values.

    Parameters
    ----------
    lam : float
        Penalty on the l1 norm of the precision matrix (observed
        log-likelihood scale).
    tol : float
        Relative objective-decrease EM stopping threshold.
    max_em : int
        EM iteration cap.

    Attributes
    ----------
    location_ : (p,) ndarray
        Estimated mean.
    precision_ : (p, p) ndarray
        Estimated precision matrix with exact zeros.
    covariance_ : (p, p) ndarray
        Inverse of ``precision_``.
    n_iter_ : int
        EM iterations run.
    converged_ : bool
    objective_trace_ : list of float
    """

    def __init__(self, lam=1.0, tol=1e-6, max_em=200):
        self.lam = lam
        self.tol = tol
        self.max_em = max_em

    def _fit_data(self, X):
        return check_incomplete(X, self, min_samples=2)

    def fit(self, X, y=None):
        data = self._fit_data(X)
        model, report = fit_missglasso(data, self.lam, tol=self.tol,
                                       max_em=self.max_em)
        self._set_fitted(model, report)
        return self

    def _set_fitted(self, model, report):
        self.model_ = model
        self.location_ = model.mu
        self.precision_ = model.K
        self.covariance_ = model.covariance()
        self.n_iter_ = report.em_iterations
        self.converged_ = report.converged
        self.objective_trace_ = list(report.objective_trace)
        self.n_features_in_ = model.p

    def transform(self, X):
        """Impute missing entries by their conditional means."""
        check_is_fitted(self, "model_")
        data = check_incomplete(X, self)
        if data.p != self.n_features_in_:
            raise ValueError(f"X has {data.p} features, expected {self.n_features_in_}")
        return conditional_mean_impute(data, self.model_)

    def score(self, X, y=None):
        """Average observed log-likelihood per row (higher is better)."""
        check_is_fitted(self, "model_")
        data = check_incomplete(X, self)
        return -observed_neg_loglik(data, self.model_) / data.n


class MissGlassoCV(MissGlasso):
    """MissGlasso with the penalty chosen by cross-validation or BIC.

    Attributes (in addition to those of MissGlasso)
    ----------
    lambda_ : float
        Selected penalty.
    lambdas_ : ndarray
        The decreasing candidate grid.
    criterion_scores_ : ndarray
        CV or BIC score per candidate.
    """

    def __init__(self, criterion="cv", cv=10, n_lambdas=30, lambda_ratio=0.01,
                 seed=0, tol=1e-6, max_em=200):
        super().__init__(lam=None, tol=tol, max_em=max_em)
        self.criterion = criterion
        self.cv = cv
        self.n_lambdas = n_lambdas
        self.lambda_ratio = lambda_ratio
        self.seed = seed

    def fit(self, X, y=None):
        data = self._fit_data(X)
        grid = lambda_grid(data, count=self.n_lambdas, ratio=self.lambda_ratio)
        kwargs = dict(tol=self.tol, max_em=self.max_em)
        if self.criterion == "bic":
            path = select_bic(data, grid, **kwargs)
        elif self.criterion == "cv":
            path = cross_validate(data, grid, v=self.cv, seed=self.seed, **kwargs)
        else:
            raise ValueError(f"unknown criterion {self.criterion!r}")
        self.lambda_ = path.best_lambda
        self.lambdas_ = path.lambdas
        self.criterion_scores_ = path.scores
        self._set_fitted(*path.fits[path.best_index])
        return self


class TwoStageRegressor(BaseEstimator, RegressorMixin):
    """Sparse linear regression tolerating missing covariates.

    Stage 1 estimates the covariate Gaussian (penalty ``lam1``; chosen by
    cross-validation when None), stage 2 estimates (coef\\_, sigma\\_) at
    penalty ``lam2`` holding stage 1 fixed.  Prediction completes missing
    features by their conditional means before applying the coefficients.
    """

    def __init__(self, lam1=None, lam2=1.0, cv=10, n_lambdas=30,
                 lambda_ratio=0.01, seed=0, tol=1e-6, max_em=200):
        self.lam1 = lam1
        self.lam2 = lam2
        self.cv = cv
        self.n_lambdas = n_lambdas
        self.lambda_ratio = lambda_ratio
        self.seed = seed
        self.tol = tol
        self.max_em = max_em

    def fit(self, X, y):
        x = check_incomplete(X, self, min_samples=2)
        y = np.asarray(y, dtype=float).ravel()
        kwargs = dict(tol=self.tol, max_em=self.max_em)
        if self.lam1 is None:
            grid = lambda_grid(x, count=self.n_lambdas, ratio=self.lambda_ratio)
            path = cross_validate(x, grid, v=self.cv, seed=self.seed, **kwargs)
            x_model = path.best_model
            self.lambda1_ = path.best_lambda
        else:
            x_model = None
            self.lambda1_ = self.lam1
        model, report = fit_two_stage(RegressionData(y=y, x=x), lam1=self.lambda1_,
                                      lam2=self.lam2, x_model=x_model, **kwargs)
        self.model_ = model
        self.coef_ = model.beta
        self.sigma_ = model.sigma
        self.x_location_ = model.x_model.mu
        self.x_precision_ = model.x_model.K
        self.n_iter_ = report.em_iterations
        self.converged_ = report.converged
        self.n_features_in_ = x.p
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        data = check_incomplete(X, self)
        if data.p != self.n_features_in_:
            raise ValueError(f"X has {data.p} features, expected {self.n_features_in_}")
        return _predict_two_stage(self.model_, data.values)
