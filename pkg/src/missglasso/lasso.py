"""Coordinate-descent solver for the Gram-form Lasso.

Solves  min_beta  0.5 * beta' V beta - u' beta + rho * ||beta||_1
given only the Gram matrix V and the linear term u.  This is the inner
subproblem of the blockwise covariance solver and also serves as a plain
Lasso when V = x'x and u = x'y.
"""

import numba as nb
import numpy as np

from .exceptions import NotConverged, ZeroDiagonal


@nb.njit(cache=True)
def _cd_gram(V, u, rho, beta, max_cycles, tol):
    """Cyclic coordinate descent with exact soft-thresholding.

    The gradient V @ beta - u is maintained incrementally within a cycle and
    recomputed exactly at each cycle end, where the subgradient optimality
    residual is measured.  Returns (cycles, kkt_violation).
    """
    p = beta.shape[0]
    grad = V @ beta - u
    viol = np.inf
    cycles = 0
    while cycles < max_cycles:
        cycles += 1
        for j in range(p):
            bj = beta[j]
            z = V[j, j] * bj - grad[j]  # u_j minus the off-coordinate part
            if z > rho:
                bn = (z - rho) / V[j, j]
            elif z < -rho:
                bn = (z + rho) / V[j, j]
            else:
                bn = 0.0
            d = bn - bj
            if d != 0.0:
                beta[j] = bn
                for k in range(p):
                    grad[k] += V[k, j] * d
        # fresh gradient kills incremental drift and gives an exact residual
        grad = V @ beta - u
        viol = 0.0
        for j in range(p):
            g = grad[j]
            if beta[j] > 0.0:
                v = abs(g + rho)
            elif beta[j] < 0.0:
                v = abs(g - rho)
            else:
                v = abs(g) - rho
                if v < 0.0:
                    v = 0.0
            if v > viol:
                viol = v
        if viol <= tol:
            break
    return cycles, viol


def lasso_gram(V, u, rho, init=None, tol=1e-8, max_cycles=100000):
    """Solve the Gram-form Lasso to subgradient tolerance ``tol``.

    Parameters
    ----------
    V : (p, p) ndarray
        Positive semidefinite Gram matrix with strictly positive diagonal.
    u : (p,) ndarray
        Linear term.
    rho : float
        Nonnegative l1 penalty.
    init : (p,) ndarray, optional
        Warm start; zeros by default.
    tol : float
        Subgradient (KKT) tolerance, relative to max(1, ||u||_inf).

    Returns
    -------
    beta : (p,) ndarray with exact zeros on the inactive set.
    """
    V = np.asarray(V, dtype=float)
    u = np.asarray(u, dtype=float)
    p = u.shape[0]
    if V.shape != (p, p):
        raise ValueError("V and u dimensions disagree")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if p == 0:
        return np.zeros(0)
    if np.diag(V).min() <= 0:
        raise ZeroDiagonal("Gram matrix has a nonpositive diagonal entry")
    beta = np.zeros(p) if init is None else np.array(init, dtype=float)
    scaled_tol = tol * max(1.0, np.abs(u).max())
    cycles, viol = _cd_gram(V, u, rho, beta, max_cycles, scaled_tol)
    if viol > scaled_tol:
        raise NotConverged(
            f"lasso_gram: KKT residual {viol:.3e} after {cycles} cycles", result=beta
        )
    return beta
