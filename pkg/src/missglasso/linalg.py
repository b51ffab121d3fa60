"""Dense symmetric linear algebra shared by all solvers.

Everything here operates on plain float64 ndarrays.  Matrices handed to the
SPD routines are assumed symmetric; use :func:`sym` to clean up round-off
asymmetry introduced by blockwise updates before factorizing.
"""

import numpy as np
from scipy import linalg as sla

from .exceptions import NotPositiveDefinite

# Cholesky pivots below this fraction of the largest diagonal entry are
# treated as a positive-definiteness failure rather than trusted.
PD_PIVOT_RTOL = 1e-12


def sym(a):
    """Symmetrize a square matrix: (A + A.T) / 2."""
    return (a + a.T) / 2.0


def chol_factor(a):
    """Lower Cholesky factor of an SPD matrix.

    Raises
    ------
    NotPositiveDefinite
        If the factorization fails or produces a pivot smaller than
        ``PD_PIVOT_RTOL`` times the largest diagonal entry of ``a``.
    """
    a = np.asarray(a, dtype=float)
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as err:
        raise NotPositiveDefinite(f"matrix is not positive definite: {err}") from None
    piv = np.diag(lower) ** 2
    if piv.min() <= PD_PIVOT_RTOL * max(np.diag(a).max(), 0.0):
        raise NotPositiveDefinite("matrix has a near-zero Cholesky pivot")
    return lower


def chol_solve(lower, b):
    """Solve A x = b given the lower Cholesky factor of A."""
    return sla.cho_solve((lower, True), b, check_finite=False)


def chol_logdet(lower):
    """log det A from its lower Cholesky factor."""
    return 2.0 * np.log(np.diag(lower)).sum()


def chol_logdet_solve(a, b):
    """Factor SPD ``a`` once and return (log det a, solution of a @ x = b)."""
    lower = chol_factor(a)
    return chol_logdet(lower), chol_solve(lower, b)


def chol_inverse(a):
    """Inverse of an SPD matrix, symmetrized."""
    lower = chol_factor(a)
    return sym(chol_solve(lower, np.eye(a.shape[0])))


def logdet_spd(a):
    """log det of an SPD matrix."""
    return chol_logdet(chol_factor(a))


def _check_index_set(indices, dim):
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= dim):
        raise IndexError(f"index set out of range for dimension {dim}")
    if idx.size > 1 and np.any(np.diff(idx) <= 0):
        raise IndexError("index set must be strictly increasing")
    return idx


def submatrix(a, rows, cols):
    """Extract the block a[rows, cols] for strictly increasing index sets."""
    a = np.asarray(a)
    r = _check_index_set(rows, a.shape[0])
    c = _check_index_set(cols, a.shape[1])
    return a[np.ix_(r, c)]


def embed(values, rows, cols, p):
    """Place a block into a p x p zero matrix at positions (rows, cols)."""
    r = _check_index_set(rows, p)
    c = _check_index_set(cols, p)
    out = np.zeros((p, p))
    out[np.ix_(r, c)] = values
    return out


def rank_one_inverse_update(a_inv, b):
    """Inverse of (A + b b^T) given A^{-1}, via the Sherman-Morrison formula.

    ``a_inv`` must be the (symmetric) inverse of an SPD matrix, so the
    denominator 1 + b^T A^{-1} b is positive; a nonpositive value indicates
    an invalid input and raises :class:`NotPositiveDefinite`.
    """
    a_inv = np.asarray(a_inv, dtype=float)
    b = np.asarray(b, dtype=float)
    w = a_inv @ b
    denom = 1.0 + b @ w
    if denom <= 0.0:
        raise NotPositiveDefinite("rank-one update denominator is nonpositive")
    return a_inv - np.outer(w, w) / denom
