"""EM estimation of a Gaussian mean/precision pair from incomplete data.

The estimator minimizes the penalized observed negative log-likelihood
NLL(mu, K) + lam * ||K||_1 by alternating an exact E-step (expected
sufficient statistics under the current Gaussian, computed per missingness
pattern) with an M-step that is a complete-data penalized covariance solve
at penalty rho = 2 * lam / n.  With lam = 0 the M-step is a plain inversion
and the loop is the unpenalized maximum-likelihood EM.
"""

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateData, NotConverged
from .glasso import GlassoProblem, GlassoSolution, glasso_fit
from .incomplete import as_incomplete
from .linalg import chol_factor, chol_inverse, chol_logdet, chol_solve, sym

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class GaussianModel:
    """Mean vector and precision matrix, with a cached covariance."""

    mu: np.ndarray
    K: np.ndarray
    sigma_cache: np.ndarray | None = None

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.K = np.asarray(self.K, dtype=float)

    @property
    def p(self):
        return self.mu.shape[0]

    def covariance(self):
        if self.sigma_cache is None:
            self.sigma_cache = chol_inverse(self.K)
        return self.sigma_cache


@dataclass
class SufficientStats:
    """First and second expected moments, accumulated over n rows."""

    t1: np.ndarray
    t2: np.ndarray
    n: int


@dataclass
class FitReport:
    """Objective trace and convergence diagnostics of one EM fit."""

    objective_trace: list = field(default_factory=list)
    em_iterations: int = 0
    converged: bool = False
    wall_time: float = 0.0
    init: str = "mean-impute"


def observed_neg_loglik(data, model):
    """Negative observed log-likelihood, including the 0.5*log(2*pi) terms.

    Each row contributes the Gaussian density of its observed coordinates
    under the marginal N(mu_obs, Sigma_obs); one Cholesky factorization is
    shared by all rows with the same missingness pattern.  Fully missing
    rows contribute zero.
    """
    data = as_incomplete(data)
    sigma = model.covariance()
    blocks = data.pattern_obs_blocks()
    total = 0.0
    for (obs, _, rows), block in zip(data.patterns, blocks):
        if obs.size == 0:
            continue
        lower = chol_factor(sigma[np.ix_(obs, obs)])
        dev = block - model.mu[obs]
        solved = chol_solve(lower, dev.T)
        quad = np.einsum("ij,ij->j", dev.T, solved)
        total += 0.5 * (rows.size * (obs.size * LOG_2PI + chol_logdet(lower)) + quad.sum())
    return total


def _complete_by_conditional_means(data, model, want_corrections):
    """Fill missing cells with conditional means under ``model``.

    Returns the completed matrix and, when requested, the per-pattern
    conditional covariance (K_mis,mis)^{-1} blocks needed for second moments.
    """
    xc = data.values.copy()
    corrections = []
    K, mu = model.K, model.mu
    blocks = data.pattern_obs_blocks()
    for (obs, mis, rows), block in zip(data.patterns, blocks):
        if mis.size == 0:
            continue
        lower = chol_factor(K[np.ix_(mis, mis)])
        if obs.size:
            dev = (block - mu[obs]).T  # (o, k)
            cond = mu[mis][:, None] - chol_solve(lower, K[np.ix_(mis, obs)] @ dev)
        else:
            cond = np.repeat(mu[mis][:, None], rows.size, axis=1)
        xc[np.ix_(rows, mis)] = cond.T
        if want_corrections:
            cov = chol_solve(lower, np.eye(mis.size))
            corrections.append((mis, rows.size, sym(cov)))
    return xc, corrections


def conditional_mean_impute(data, model):
    """Complete copy of the data with missing cells set to conditional means."""
    data = as_incomplete(data)
    xc, _ = _complete_by_conditional_means(data, model, want_corrections=False)
    return xc


def e_step(data, model):
    """Expected sufficient statistics T1 = E[x'1], T2 = E[x'x] given the observed data.

    Missing coordinates enter through their conditional mean; pairs of
    missing coordinates additionally pick up the conditional covariance
    block, computed once per missingness pattern.
    """
    data = as_incomplete(data)
    xc, corrections = _complete_by_conditional_means(data, model, want_corrections=True)
    t1 = xc.sum(axis=0)
    t2 = xc.T @ xc
    for mis, count, cov in corrections:
        t2[np.ix_(mis, mis)] += count * cov
    return SufficientStats(t1=t1, t2=sym(t2), n=data.n)


def scatter_from_stats(stats):
    """Second-moment scatter S = T2/n - mu mu' with mu = T1/n."""
    mu = stats.t1 / stats.n
    return mu, sym(stats.t2 / stats.n - np.outer(mu, mu))


def m_step(stats, lam, warm=None, glasso_kwargs=None):
    """Penalized complete-data update of (mu, K) from expected statistics.

    Returns the updated model together with the covariance-solver result
    (None when lam == 0, where the update is a direct inversion).
    """
    if stats.n < 1:
        raise ValueError("need at least one observation")
    mu, S = scatter_from_stats(stats)
    if lam == 0.0:
        K = chol_inverse(S)
        return GaussianModel(mu=mu, K=K, sigma_cache=S.copy()), None
    rho = 2.0 * lam / stats.n
    kwargs = glasso_kwargs or {}
    try:
        sol = glasso_fit(GlassoProblem(S, rho), warm=warm, **kwargs)
    except NotConverged as err:
        warnings.warn(str(err), RuntimeWarning, stacklevel=2)
        sol = err.result
    model = GaussianModel(mu=mu, K=sol.K, sigma_cache=None)
    return model, sol


def penalized_objective(data, model, lam, penalize_diag=True):
    """Observed negative log-likelihood plus lam * ||K||_1."""
    l1 = np.abs(model.K).sum()
    if not penalize_diag:
        l1 -= np.abs(np.diag(model.K)).sum()
    return observed_neg_loglik(data, model) + lam * l1


def initial_model(data, lam, init="mean-impute", glasso_kwargs=None):
    """Starting point for the EM loop.

    ``"mean-impute"`` fits the complete-data estimator on column-mean
    imputed data; a GaussianModel is used as-is and seeds the M-step solver
    warm start.
    """
    if isinstance(init, GaussianModel):
        warm = GlassoSolution(Sigma=init.covariance(), K=init.K,
                              objective=np.nan, iterations=0, kkt_gap=np.nan)
        return init, warm, "custom"
    if init != "mean-impute":
        raise ValueError(f"unknown init {init!r}")
    filled = as_incomplete(data).mean_imputed()
    mu0 = filled.mean(axis=0)
    dev = filled - mu0
    s0 = sym(dev.T @ dev / filled.shape[0])
    stats = SufficientStats(t1=filled.sum(axis=0), t2=s0 * filled.shape[0]
                            + filled.shape[0] * np.outer(mu0, mu0), n=filled.shape[0])
    model, sol = m_step(stats, lam, glasso_kwargs=glasso_kwargs)
    return model, sol, "mean-impute"


def fit_em(data, lam, tol=1e-6, max_em=200, init="mean-impute", glasso_kwargs=None):
    """Run the EM loop; shared by the penalized and unpenalized estimators.

    The loop stops when the relative decrease of the penalized observed
    objective falls below ``tol``.  An M-step that fails to decrease the
    objective at solver precision terminates the loop with the previous
    iterate, so the reported trace is non-increasing by construction.
    """
    data = as_incomplete(data)
    if (data.observed_counts_per_column() == 0).any():
        raise DegenerateData("some column has no observed entries")
    start = time.perf_counter()
    penalize_diag = (glasso_kwargs or {}).get("penalize_diag", True)
    model, warm, init_name = initial_model(data, lam, init, glasso_kwargs)
    obj = penalized_objective(data, model, lam, penalize_diag)
    trace = [obj]
    converged = False
    iterations = 0
    if data.complete and init_name == "mean-impute":
        # E-step is the identity: the initial complete-data solve is final.
        converged = True
    else:
        for iterations in range(1, max_em + 1):
            stats = e_step(data, model)
            new_model, new_warm = m_step(stats, lam, warm=warm,
                                         glasso_kwargs=glasso_kwargs)
            new_obj = penalized_objective(data, new_model, lam, penalize_diag)
            if new_obj > obj:
                # No descent left at solver precision; keep the last iterate.
                iterations -= 1
                converged = True
                break
            model, warm = new_model, new_warm
            trace.append(new_obj)
            if obj - new_obj <= tol * (1.0 + abs(new_obj)):
                obj = new_obj
                converged = True
                break
            obj = new_obj
    report = FitReport(objective_trace=trace, em_iterations=iterations,
                       converged=converged, wall_time=time.perf_counter() - start,
                       init=init_name)
    return model, report


def fit_missglasso(data, lam, tol=1e-6, max_em=200, init="mean-impute",
                   glasso_kwargs=None):
    """l1-penalized Gaussian estimation from incomplete data.

    Parameters
    ----------
    data : IncompleteMatrix or array with NaN for missing cells
    lam : float
        Penalty on ||K||_1, on the scale of the (unnormalized) observed
        log-likelihood.  Must be positive; see :func:`mle_em` for lam = 0.
    tol : float
        Relative objective-decrease stopping threshold.
    init : "mean-impute" or GaussianModel

    Returns
    -------
    (GaussianModel, FitReport)
    """
    if lam <= 0:
        raise ValueError("lam must be positive; use mle_em for the unpenalized fit")
    data = as_incomplete(data)
    if data.n < 2:
        raise DegenerateData("need at least two rows")
    return fit_em(data, lam, tol=tol, max_em=max_em, init=init,
                  glasso_kwargs=glasso_kwargs)


def mle_em(data, tol=1e-6, max_em=200):
    """Unpenalized maximum-likelihood EM (direct-inversion M-step).

    Raises
    ------
    NotPositiveDefinite
        If an M-step scatter matrix is singular, which is expected at high
        missingness when p is not much smaller than n.
    """
    return fit_em(data, 0.0, tol=tol, max_em=max_em)
