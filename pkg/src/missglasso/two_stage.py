"""Sparse regression with missing covariates: two penalized stages.

Stage 1 estimates the covariate Gaussian (mu, K) from the incomplete design
matrix.  Stage 2 holds (mu, K) fixed and estimates (beta, sigma) of the
linear model y = beta' x + eps by EM: the E-step conditions each row's
missing covariates on (y_i, x_obs,i) under the joint (p+1)-variate Gaussian
implied by the model, and the M-step is a scaled-lasso solve on the expected
inner products.
"""

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .em import (FitReport, GaussianModel, conditional_mean_impute,
                 fit_missglasso, observed_neg_loglik)
from .exceptions import DegenerateData, NotConverged
from .incomplete import IncompleteMatrix, as_incomplete
from .linalg import chol_inverse, rank_one_inverse_update, sym
from .scaled_lasso import InnerProducts, scaled_lasso_fit


@dataclass
class RegressionData:
    """Fully observed response paired with a possibly incomplete design."""

    y: np.ndarray
    x: IncompleteMatrix

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.x = as_incomplete(self.x)
        if self.y.shape[0] != self.x.n:
            raise ValueError("response length does not match design rows")
        if not np.isfinite(self.y).all():
            raise DegenerateData("response must be fully observed")


@dataclass
class JointModel:
    """Regression coefficients and noise scale on top of a covariate Gaussian."""

    beta: np.ndarray
    sigma: float
    x_model: GaussianModel

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


def joint_model_assemble(beta, sigma, x_model):
    """Mean and precision of the joint (y, x) Gaussian.

    Coordinate 0 is the response.  The precision has the arrow structure
    [[1/sigma^2, -beta'/sigma^2], [-beta/sigma^2, K + beta beta'/sigma^2]].
    """
    beta = np.asarray(beta, dtype=float)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    p = beta.shape[0]
    mu_t = np.empty(p + 1)
    mu_t[0] = beta @ x_model.mu
    mu_t[1:] = x_model.mu
    k_t = np.empty((p + 1, p + 1))
    inv_var = 1.0 / (sigma * sigma)
    k_t[0, 0] = inv_var
    k_t[0, 1:] = -beta * inv_var
    k_t[1:, 0] = -beta * inv_var
    k_t[1:, 1:] = x_model.K + np.outer(beta, beta) * inv_var
    return mu_t, k_t


def joint_sigma(beta, sigma, x_model):
    """Covariance of the joint (y, x) Gaussian (for cross-checks)."""
    beta = np.asarray(beta, dtype=float)
    cov = x_model.covariance()
    p = beta.shape[0]
    s_t = np.empty((p + 1, p + 1))
    sb = cov @ beta
    s_t[0, 0] = sigma * sigma + beta @ sb
    s_t[0, 1:] = sb
    s_t[1:, 0] = sb
    s_t[1:, 1:] = cov
    return s_t


def _augmented(data):
    """IncompleteMatrix of [y, x] with the response always observed."""
    values = np.column_stack([data.y, data.x.values])
    mask = np.column_stack([np.ones(data.x.n, dtype=bool), data.x.mask])
    return IncompleteMatrix(values, mask)


def stage2_objective(data, model, lam2):
    """Observed negative log-likelihood of (y, x_obs) plus lam2 * ||beta||_1 / sigma."""
    mu_t, k_t = joint_model_assemble(model.beta, model.sigma, model.x_model)
    joint = GaussianModel(mu=mu_t, K=k_t)
    nll = observed_neg_loglik(_augmented(data), joint)
    return nll + lam2 * np.abs(model.beta).sum() / model.sigma


def _pattern_kmm_inverses(x, K):
    """(K_mis,mis)^{-1} per missingness pattern; fixed across stage-2 EM."""
    out = []
    for _, mis, _ in x.patterns:
        out.append(chol_inverse(K[np.ix_(mis, mis)]) if mis.size else None)
    return out


def e_step_regression(data, model, kmm_inv=None):
    """Expected inner products (E[y'x], E[x'x], y'y) given observed data.

    Missing covariates are conditioned on the row's response and observed
    covariates under the joint Gaussian of the model.  The missing-block
    precision is K_mis,mis + beta_mis beta_mis'/sigma^2, inverted with a
    rank-one update of the cached stage-1 inverse.
    """
    x = data.x
    K, mu = model.x_model.K, model.x_model.mu
    beta, sigma = model.beta, model.sigma
    inv_var = 1.0 / (sigma * sigma)
    if kmm_inv is None:
        kmm_inv = _pattern_kmm_inverses(x, K)
    xc = x.values.copy()
    t2 = np.zeros((x.p, x.p))
    for g, (obs, mis, rows) in enumerate(x.patterns):
        if mis.size == 0:
            continue
        cond_cov = rank_one_inverse_update(kmm_inv[g], beta[mis] / sigma)
        resid = data.y[rows] - beta @ mu  # (k,)
        if obs.size:
            dev = x.values[np.ix_(rows, obs)] - mu[obs]  # (k, o)
            drive = K[np.ix_(mis, obs)] @ dev.T  # (m, k)
            drive += np.outer(beta[mis], dev @ beta[obs] - resid) * inv_var
        else:
            drive = np.outer(beta[mis], -resid) * inv_var
        cond_mean = mu[mis][:, None] - cond_cov @ drive  # (m, k)
        xc[np.ix_(rows, mis)] = cond_mean.T
        t2[np.ix_(mis, mis)] += rows.size * cond_cov
    t2 += xc.T @ xc
    t1 = xc.T @ data.y
    return t1, sym(t2), float(data.y @ data.y)


def fit_two_stage(data, lam1=None, lam2=1.0, x_model=None, tol=1e-6, max_em=200,
                  stage1_kwargs=None):
    """Fit the two-stage estimator.

    Parameters
    ----------
    data : RegressionData
    lam1 : float, optional
        Stage-1 penalty on the covariate precision; required unless an
        already fitted ``x_model`` is supplied (e.g. tuned externally).
    lam2 : float
        Stage-2 penalty on ||beta||_1 / sigma.
    x_model : GaussianModel, optional
        Precomputed stage-1 estimate.

    Returns
    -------
    (JointModel, FitReport)
        The report covers the stage-2 EM iterations.
    """
    if lam2 <= 0:
        raise ValueError("lam2 must be positive")
    start = time.perf_counter()
    if x_model is None:
        if lam1 is None:
            raise ValueError("need lam1 when no fitted x_model is supplied")
        x_model, _ = fit_missglasso(data.x, lam1, **(stage1_kwargs or {}))

    y = data.y
    n = y.shape[0]
    var_y = float(np.var(y))
    sigma0 = np.sqrt(var_y) if var_y > 0 else np.sqrt(max(y @ y / n, 1e-12))
    model = JointModel(beta=np.zeros(data.x.p), sigma=sigma0, x_model=x_model)
    kmm_inv = _pattern_kmm_inverses(data.x, x_model.K)

    obj = stage2_objective(data, model, lam2)
    trace = [obj]
    converged = False
    iterations = 0
    warm = None
    for iterations in range(1, max_em + 1):
        t1, t2, yy = e_step_regression(data, model, kmm_inv=kmm_inv)
        ip = InnerProducts(yy=yy, yx=t1, xx=t2, n=n)
        try:
            fit = scaled_lasso_fit(ip, lam2, init=warm)
        except NotConverged as err:
            warnings.warn(str(err), RuntimeWarning, stacklevel=2)
            fit = err.result
        new_model = JointModel(beta=fit.beta, sigma=fit.sigma, x_model=x_model)
        new_obj = stage2_objective(data, new_model, lam2)
        if new_obj > obj:
            iterations -= 1
            converged = True
            break
        model = new_model
        warm = (fit.phi, fit.rho_scale)
        trace.append(new_obj)
        if obj - new_obj <= tol * (1.0 + abs(new_obj)):
            obj = new_obj
            converged = True
            break
        obj = new_obj
        if data.x.complete:
            converged = True  # E-step is the identity; one M-step is exact
            break
    report = FitReport(objective_trace=trace, em_iterations=iterations,
                       converged=converged, wall_time=time.perf_counter() - start,
                       init="zero-beta")
    return model, report


def predict(model, x_rows):
    """Predicted responses, completing missing features by conditional means."""
    arr = np.asarray(x_rows, dtype=float)
    single = arr.ndim == 1
    rows = as_incomplete(np.atleast_2d(arr))
    completed = conditional_mean_impute(rows, model.x_model)
    yhat = completed @ model.beta
    return float(yhat[0]) if single else yhat
