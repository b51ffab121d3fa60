"""l1-penalized precision estimation from a complete-data covariance.

The solver is blockwise coordinate descent on the covariance side: one row
and column of Sigma at a time is updated by solving a Gram-form Lasso, and
the precision matrix is recovered column by column from the block partition
of K Sigma = I.  The l1 penalty covers every entry of K including the
diagonal, so at a solution the diagonal of Sigma equals diag(S) + rho.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import NotConverged, NotPositiveDefinite
from .lasso import _cd_gram
from .linalg import chol_factor, chol_inverse, chol_logdet, chol_solve, sym

# |K| entries below this are snapped to exact zero after the column-wise
# recovery, so that sparsity-pattern metrics are well defined.
SNAP_TOL = 1e-10


@dataclass
class GlassoProblem:
    """Empirical covariance S and penalty rho (all entries penalized)."""

    S: np.ndarray
    rho: float

    def __post_init__(self):
        self.S = sym(np.asarray(self.S, dtype=float))
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")


@dataclass
class GlassoSolution:
    """Estimated covariance/precision pair and solver diagnostics."""

    Sigma: np.ndarray
    K: np.ndarray
    objective: float
    iterations: int
    kkt_gap: float
    sweep_objectives: list | None = None


def glasso_objective(S, K, rho, penalize_diag=True):
    """Penalized negative log-likelihood: -log|K| + tr(K S) + rho * ||K||_1."""
    lower = chol_factor(K)
    l1 = np.abs(K).sum()
    if not penalize_diag:
        l1 -= np.abs(np.diag(K)).sum()
    return -chol_logdet(lower) + (K * S).sum() + rho * l1


def kkt_gap(S, Sigma, K, rho, penalize_diag=True):
    """Largest entrywise violation of the stationarity conditions.

    At a solution, S - Sigma + rho * sign(K) = 0 on the active set and
    |S - Sigma| <= rho where K is exactly zero.
    """
    G = S - Sigma
    active = K != 0
    if not penalize_diag:
        G = G.copy()
        np.fill_diagonal(G, 0.0)
        active = active.copy()
        np.fill_diagonal(active, True)  # diagonal handled as unpenalized
        rho_mat = np.full_like(G, rho)
        np.fill_diagonal(rho_mat, 0.0)
        viol_active = np.abs(G + rho_mat * np.sign(K))[active]
    else:
        viol_active = np.abs(G + rho * np.sign(K))[active]
    viol_zero = np.maximum(np.abs(G)[~active] - rho, 0.0) if (~active).any() else np.zeros(1)
    gap = 0.0
    if viol_active.size:
        gap = max(gap, viol_active.max())
    if viol_zero.size:
        gap = max(gap, viol_zero.max())
    return gap


def diag_threshold(S):
    """Smallest rho for which the penalized precision estimate is diagonal."""
    S = np.asarray(S)
    if S.shape[0] < 2:
        return 0.0
    off = S - np.diag(np.diag(S))
    return np.abs(off).max()


def _not_j(p, j):
    idx = np.arange(p)
    return idx[idx != j]


def _recover_precision(W, B, penalize_diag):
    """Column-wise precision recovery from the partition of K Sigma = I."""
    p = W.shape[0]
    K = np.zeros((p, p))
    for j in range(p):
        idx = _not_j(p, j)
        beta = B[idx, j]
        w12 = W[idx, j]
        schur = W[j, j] - 0.5 * (w12 @ beta)
        if schur <= 0:
            raise NotPositiveDefinite("covariance iterate lost positive definiteness")
        kjj = 1.0 / schur
        K[j, j] = kjj
        K[idx, j] = -0.5 * beta * kjj
    K = sym(K)
    K[np.abs(K) < SNAP_TOL] = 0.0
    return K


def glasso_fit(problem, warm=None, tol=1e-7, max_sweeps=500, inner_tol=1e-8,
               penalize_diag=True):
    """Solve the penalized covariance problem by blockwise coordinate descent.

    Parameters
    ----------
    problem : GlassoProblem
    warm : GlassoSolution, optional
        Previous solution used to initialize Sigma and the per-column Lasso
        coefficients (useful along a decreasing penalty path).
    tol : float
        Relative objective-change convergence threshold between full sweeps.
    inner_tol : float
        Subgradient tolerance of the per-column Lasso solves.
    penalize_diag : bool
        If False, the diagonal of K is left unpenalized (diagonal of Sigma
        then stays at diag(S)).

    Returns
    -------
    GlassoSolution

    Raises
    ------
    NotConverged
        After ``max_sweeps`` sweeps without meeting ``tol``; the exception
        carries the best iterate seen.
    NotPositiveDefinite
        If rho == 0 and S is singular.
    """
    S, rho = problem.S, problem.rho
    p = S.shape[0]
    diag_shift = rho if penalize_diag else 0.0

    if rho == 0.0:
        K = chol_inverse(S)  # raises NotPositiveDefinite if S is singular
        obj = glasso_objective(S, K, 0.0)
        return GlassoSolution(Sigma=S.copy(), K=K, objective=obj, iterations=0,
                              kkt_gap=0.0)
    if p == 1:
        sigma = S[0, 0] + diag_shift
        if sigma <= 0:
            raise NotPositiveDefinite("scalar covariance is nonpositive")
        K = np.array([[1.0 / sigma]])
        return GlassoSolution(Sigma=np.array([[sigma]]), K=K,
                              objective=glasso_objective(np.array([[sigma]]) - diag_shift, K, rho,
                                                         penalize_diag),
                              iterations=0, kkt_gap=0.0)

    if warm is not None:
        W = sym(warm.Sigma).copy()
        B = np.zeros((p, p))
        for j in range(p):
            idx = _not_j(p, j)
            kjj = warm.K[j, j]
            if kjj > 0:
                B[idx, j] = -2.0 * warm.K[idx, j] / kjj
    else:
        W = S.copy()
        B = np.zeros((p, p))
    np.fill_diagonal(W, np.diag(S) + diag_shift)

    inner_cycles = 10000
    not_j = [_not_j(p, j) for j in range(p)]
    S_rows = np.empty((p, p - 1))
    for j in range(p):
        S_rows[j] = S[not_j[j], j]
    # sub-covariance buffer for W[not j, not j], updated one row/column per
    # step instead of re-extracted (only the previous column of W changed)
    sub = np.empty((p - 1, p - 1))
    V = np.empty((p - 1, p - 1))

    def sweep(kkt_scale):
        for j in range(p):
            if j == 0:
                sub[:] = W[1:, 1:]
            else:
                di = j - 1
                sub[di] = W[di, not_j[j]]
                sub[:, di] = W[not_j[j], di]
            np.multiply(sub, 0.5, out=V)
            beta = B[not_j[j], j].copy()
            _cd_gram(V, S_rows[j], rho, beta, inner_cycles, kkt_scale)
            B[not_j[j], j] = beta
            w12 = V @ beta
            W[not_j[j], j] = w12
            W[j, not_j[j]] = w12

    def objective_at(Wm):
        lower = chol_factor(Wm)
        Km = chol_solve(lower, np.eye(p))
        l1 = np.abs(Km).sum()
        if not penalize_diag:
            l1 -= np.abs(np.diag(Km)).sum()
        return chol_logdet(lower) + (Km * S).sum() + rho * l1

    inner_scale = inner_tol * max(1.0, np.abs(S).max())
    obj_prev = np.inf
    best_obj = np.inf
    best_W = W.copy()
    best_B = B.copy()
    converged = False
    sweeps = 0
    sweep_objs = []
    for sweeps in range(1, max_sweeps + 1):
        sweep(inner_scale)
        obj = objective_at(W)
        sweep_objs.append(obj)
        if obj < best_obj:
            best_obj = obj
            best_W = W.copy()
            best_B = B.copy()
        if abs(obj_prev - obj) <= tol * (1.0 + abs(obj)):
            converged = True
            break
        obj_prev = obj

    W = best_W
    B = best_B
    # Tight recovery sweeps: re-solve every column against the final Sigma so
    # the stored coefficients are mutually consistent before inverting.
    for _ in range(5):
        W_old = W.copy()
        sweep(0.01 * inner_scale)
        if np.abs(W - W_old).max() <= 1e-12 * max(1.0, np.abs(W).max()):
            break

    K = _recover_precision(W, B, penalize_diag)
    W = sym(W)
    solution = GlassoSolution(
        Sigma=W,
        K=K,
        objective=glasso_objective(S, K, rho, penalize_diag),
        iterations=sweeps,
        kkt_gap=kkt_gap(S, W, K, rho, penalize_diag),
        sweep_objectives=sweep_objs,
    )
    if not converged:
        raise NotConverged(f"glasso_fit: no convergence in {max_sweeps} sweeps",
                           result=solution)
    return solution


def glasso_fit_relaxed(problem, warm=None, **kwargs):
    """glasso_fit that downgrades NotConverged to a warning, keeping the iterate."""
    try:
        return glasso_fit(problem, warm=warm, **kwargs)
    except NotConverged as err:
        warnings.warn(str(err), RuntimeWarning, stacklevel=2)
        return err.result
