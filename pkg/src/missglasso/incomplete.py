"""Container for an n x p data matrix with missing entries.

Rows are grouped by missingness pattern once at construction; every solver
that conditions on the observed part of a row iterates over these groups so
per-pattern factorizations are shared.
"""

import numpy as np

from .exceptions import AllMissingColumn


class IncompleteMatrix:
    """Data matrix with an explicit observation mask.

    Parameters
    ----------
    values : (n, p) array_like
        Data; entries at unobserved positions are ignored (NaN recommended).
    mask : (n, p) bool array_like, optional
        True where observed.  Defaults to ``~isnan(values)``.
    """

    def __init__(self, values, mask=None):
        values = np.array(values, dtype=float, ndmin=2)
        if mask is None:
            mask = ~np.isnan(values)
        else:
            mask = np.array(mask, dtype=bool)
            if mask.shape != values.shape:
                raise ValueError("mask shape does not match values")
        values = values.copy()
        values[~mask] = np.nan
        self.values = values
        self.mask = mask
        self.n, self.p = values.shape
        self.patterns = self._group_patterns()
        self._obs_blocks = None

    def _group_patterns(self):
        _, inverse = np.unique(self.mask, axis=0, return_inverse=True)
        groups = []
        for g in range(inverse.max() + 1):
            rows = np.flatnonzero(inverse == g)
            row_mask = self.mask[rows[0]]
            obs = np.flatnonzero(row_mask)
            mis = np.flatnonzero(~row_mask)
            groups.append((obs, mis, rows))
        return groups

    def pattern_obs_blocks(self):
        """Per-pattern contiguous blocks of the observed values.

        The data never change across model iterations, so these extractions
        are cached for the solvers that sweep patterns repeatedly.
        """
        if self._obs_blocks is None:
            self._obs_blocks = [
                np.ascontiguousarray(self.values[np.ix_(rows, obs)])
                for obs, _, rows in self.patterns
            ]
        return self._obs_blocks

    @property
    def complete(self):
        return bool(self.mask.all())

    @property
    def n_missing(self):
        return int((~self.mask).sum())

    @property
    def missing_fraction(self):
        return self.n_missing / self.mask.size

    def observed_counts_per_column(self):
        return self.mask.sum(axis=0)

    def column_means(self):
        """Per-column means over observed entries.

        Raises
        ------
        AllMissingColumn
            If some column has no observed entry.
        """
        counts = self.observed_counts_per_column()
        if (counts == 0).any():
            cols = np.flatnonzero(counts == 0)
            raise AllMissingColumn(f"columns with no observed entries: {cols.tolist()}")
        filled = np.where(self.mask, self.values, 0.0)
        return filled.sum(axis=0) / counts

    def mean_imputed(self):
        """Complete copy with missing cells replaced by observed-column means."""
        means = self.column_means()
        out = self.values.copy()
        rows, cols = np.nonzero(~self.mask)
        out[rows, cols] = means[cols]
        return out

    def subset(self, rows):
        """New IncompleteMatrix restricted to the given row indices."""
        rows = np.asarray(rows, dtype=np.intp)
        return IncompleteMatrix(self.values[rows], self.mask[rows])

    def permute_columns(self, perm):
        """New IncompleteMatrix with columns reordered by ``perm``."""
        perm = np.asarray(perm, dtype=np.intp)
        return IncompleteMatrix(self.values[:, perm], self.mask[:, perm])


def as_incomplete(x):
    """Coerce an array (NaN = missing) or IncompleteMatrix to IncompleteMatrix."""
    if isinstance(x, IncompleteMatrix):
        return x
    return IncompleteMatrix(x)


def mean_impute(x):
    """Column-mean imputation of an array or IncompleteMatrix."""
    return as_incomplete(x).mean_imputed()
