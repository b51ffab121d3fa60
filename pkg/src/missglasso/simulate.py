"""Simulation harness: covariance models, deletion mechanisms, metrics,
baselines, and reproducible scenario runs.

A scenario is described by a flat key = value text file (see
:func:`parse_scenario`).  Each run owns an RNG stream derived from the
scenario seed and the run index, so results are reproducible regardless of
execution order or parallelism.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import norm

from .em import conditional_mean_impute, mle_em, observed_neg_loglik
from .exceptions import AllMissingColumn, DegenerateData, NotPositiveDefinite
from .incomplete import IncompleteMatrix, as_incomplete, mean_impute
from .lasso import lasso_gram
from .linalg import chol_factor, chol_inverse, logdet_spd, sym
from .select import cross_validate, fit_path, lambda_grid, select_bic
from .two_stage import RegressionData, fit_two_stage

# ---------------------------------------------------------------------------
# population models


def _ar1_precision(p, tau):
    """Closed-form tridiagonal inverse of the AR(1) covariance.

    Built analytically so the true zero pattern is exact, which the support
    recovery metrics rely on.
    """
    scale = 1.0 / (1.0 - tau * tau)
    k = np.zeros((p, p))
    np.fill_diagonal(k, (1.0 + tau * tau) * scale)
    k[0, 0] = k[p - 1, p - 1] = scale
    for j in range(p - 1):
        k[j, j + 1] = k[j + 1, j] = -tau * scale
    return k


def gen_sigma(model, p, tau=0.7, corr=0.5, corr_block=9):
    """Covariance and precision of a named population model.

    ``ar1``        Sigma_jk = tau^|j-k| (precision is exactly tridiagonal).
    ``ar4``        banded precision with weights (1, .4, .2, .2, .1) out to
                   lag four; the covariance is its inverse.
    ``block``      block-diagonal covariance of 3x3 AR(1)-type blocks with
                   correlation 0.7 (p divisible by 3).
    ``equicorr``   identity except the leading ``corr_block`` coordinates
                   are pairwise correlated at ``corr``.

    Zeros of the returned precision are exact so that support-recovery
    metrics have a well-defined reference.
    """
    if p < 1:
        raise ValueError("p must be positive")
    if model == "ar1":
        idx = np.arange(p)
        sigma = tau ** np.abs(idx[:, None] - idx[None, :])
        k = _ar1_precision(p, tau) if p > 1 else np.eye(1)
    elif model == "ar4":
        weights = {0: 1.0, 1: 0.4, 2: 0.2, 3: 0.2, 4: 0.1}
        idx = np.arange(p)
        dist = np.abs(idx[:, None] - idx[None, :])
        k = np.zeros((p, p))
        for d, w in weights.items():
            k[dist == d] = w
        sigma = chol_inverse(k)
    elif model == "block":
        if p % 3 != 0:
            raise ValueError("block model needs p divisible by 3")
        b = 0.7 ** np.abs(np.subtract.outer(np.arange(3), np.arange(3)))
        b_inv = _ar1_precision(3, 0.7)
        sigma = np.zeros((p, p))
        k = np.zeros((p, p))
        for start in range(0, p, 3):
            sigma[start:start + 3, start:start + 3] = b
            k[start:start + 3, start:start + 3] = b_inv
    elif model == "equicorr":
        sigma = np.eye(p)
        m = min(corr_block, p)
        sigma[:m, :m] = corr
        np.fill_diagonal(sigma, 1.0)
        k = np.eye(p)
        k[:m, :m] = chol_inverse(sigma[:m, :m])
    else:
        raise ValueError(f"unknown model {model!r}")
    chol_factor(sigma)  # transcription guard: both must be SPD
    chol_factor(k)
    return sigma, k


def _as_rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def sample_mvn(n, mu, sigma, seed):
    """Draw n rows from N(mu, sigma), deterministic for a fixed seed."""
    rng = _as_rng(seed)
    sigma = np.asarray(sigma, dtype=float)
    lower = chol_factor(sigma)
    z = rng.standard_normal((n, sigma.shape[0]))
    return np.asarray(mu, dtype=float) + z @ lower.T


# ---------------------------------------------------------------------------
# deletion mechanisms


@dataclass(frozen=True)
class MCAR:
    """Delete floor(frac * n * p) cells uniformly without replacement."""

    frac: float


@dataclass(frozen=True)
class MCARBernoulli:
    """Third variable of each 3-block deleted independently w.p. pi."""

    pi: float


@dataclass(frozen=True)
class MAR:
    """Third variable of each 3-block deleted where the block's first
    variable falls below the threshold."""

    threshold: float


@dataclass(frozen=True)
class NMAR:
    """Third variable of each 3-block deleted where it itself falls below
    the threshold."""

    threshold: float


def _block_third_columns(p):
    if p % 3 != 0:
        raise ValueError("block mechanisms need p divisible by 3")
    return np.arange(2, p, 3)


def _build_mask(x, mechanism, rng):
    n, p = x.shape
    mask = np.ones((n, p), dtype=bool)
    if isinstance(mechanism, MCAR):
        if not 0 <= mechanism.frac < 1:
            raise ValueError("MCAR fraction must lie in [0, 1)")
        m = int(np.floor(mechanism.frac * n * p))
        cells = rng.choice(n * p, size=m, replace=False)
        mask.flat[cells] = False
    elif isinstance(mechanism, MCARBernoulli):
        cols = _block_third_columns(p)
        hit = rng.random((n, cols.size)) < mechanism.pi
        mask[:, cols] = ~hit
    elif isinstance(mechanism, MAR):
        cols = _block_third_columns(p)
        mask[:, cols] = ~(x[:, cols - 2] < mechanism.threshold)
    elif isinstance(mechanism, NMAR):
        cols = _block_third_columns(p)
        mask[:, cols] = ~(x[:, cols] < mechanism.threshold)
    else:
        raise TypeError(f"unknown mechanism {mechanism!r}")
    return mask


def apply_missingness(x, mechanism, seed):
    """Delete cells of a complete matrix according to the mechanism.

    A random mechanism that empties an entire column is redrawn once; a
    second failure (or any failure of a deterministic mechanism) raises
    :class:`AllMissingColumn`.
    """
    x = np.asarray(x, dtype=float)
    rng = _as_rng(seed)
    mask = _build_mask(x, mechanism, rng)
    if (~mask).all(axis=0).any():
        if isinstance(mechanism, (MCAR, MCARBernoulli)):
            mask = _build_mask(x, mechanism, rng)
        if (~mask).all(axis=0).any():
            raise AllMissingColumn("deletion emptied an entire column")
    return IncompleteMatrix(x, mask)


# ---------------------------------------------------------------------------
# metrics


def kl_loss(k_hat, sigma_true):
    """Kullback-Leibler loss tr(Sigma K) - log|Sigma K| - p between the
    fitted precision and the true covariance."""
    k_hat = np.asarray(k_hat, dtype=float)
    sigma_true = np.asarray(sigma_true, dtype=float)
    p = k_hat.shape[0]
    return float((sigma_true * k_hat).sum() - logdet_spd(sigma_true)
                 - logdet_spd(k_hat) - p)


def tpr_tnr(k_hat, k_true):
    """True positive / true negative rates of the off-diagonal support.

    A rate with an empty reference set (no true nonzeros, or no true zeros)
    is returned as None and should be excluded from aggregation.
    """
    k_hat = np.asarray(k_hat)
    k_true = np.asarray(k_true)
    if k_hat.shape != k_true.shape:
        raise ValueError("shape mismatch")
    iu = np.triu_indices(k_hat.shape[0], k=1)
    est_nz = k_hat[iu] != 0
    true_nz = k_true[iu] != 0
    tpr = float((est_nz & true_nz).sum() / true_nz.sum()) if true_nz.any() else None
    tnr = float((~est_nz & ~true_nz).sum() / (~true_nz).sum()) if (~true_nz).any() else None
    return tpr, tnr


# ---------------------------------------------------------------------------
# baselines


def knn_impute(data, k=6):
    """K-nearest-neighbour imputation.

    For each missing cell, donors are the rows observed at that column;
    distances are Euclidean over the coordinates observed in both rows, and
    the imputed value is the mean of the k nearest donors.  Falls back to
    the column mean when no donor shares an observed coordinate.
    """
    data = as_incomplete(data)
    out = data.values.copy()
    means = data.column_means()
    filled0 = np.where(data.mask, data.values, 0.0)
    for i in range(data.n):
        mis = np.flatnonzero(~data.mask[i])
        if mis.size == 0:
            continue
        shared = data.mask & data.mask[i]
        diff = (filled0 - filled0[i]) * shared
        dist = np.sqrt((diff * diff).sum(axis=1))
        dist[~shared.any(axis=1)] = np.inf
        dist[i] = np.inf
        for j in mis:
            donors = np.flatnonzero(data.mask[:, j] & np.isfinite(dist))
            if donors.size == 0:
                out[i, j] = means[j]
                continue
            order = donors[np.argsort(dist[donors], kind="stable")]
            chosen = order[:k]
            out[i, j] = data.values[chosen, j].mean()
    return out


def knn_select_k(data, candidates=(1, 3, 6, 10, 15), holdout_frac=0.1, seed=0):
    """Pick k by masking a fraction of observed cells and scoring the
    reconstruction error of each candidate."""
    data = as_incomplete(data)
    rng = _as_rng(seed)
    obs_rows, obs_cols = np.nonzero(data.mask)
    n_hold = max(1, int(holdout_frac * obs_rows.size))
    sel = rng.choice(obs_rows.size, size=n_hold, replace=False)
    mask = data.mask.copy()
    mask[obs_rows[sel], obs_cols[sel]] = False
    if (~mask).all(axis=0).any():
        return candidates[0]
    holdout = IncompleteMatrix(data.values, mask)
    truth = data.values[obs_rows[sel], obs_cols[sel]]
    best_k, best_err = candidates[0], np.inf
    for k in candidates:
        filled = knn_impute(holdout, k)
        err = float(((filled[obs_rows[sel], obs_cols[sel]] - truth) ** 2).sum())
        if err < best_err:
            best_k, best_err = k, err
    return best_k


def lasso_regression(x, y, lam):
    """Plain Lasso (squared-error + lam * ||beta||_1), no intercept."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return lasso_gram(x.T @ x, x.T @ y, lam)


def _lasso_grid(x, y, count, ratio):
    lam_max = np.abs(x.T @ y).max()
    if lam_max <= 0:
        lam_max = 1.0
    return np.geomspace(lam_max, ratio * lam_max, count)


def _lasso_validation_fit(x, y, x_val, y_val, count=30, ratio=0.01):
    """Lasso tuned to minimize validation prediction error along a path."""
    grid = _lasso_grid(x, y, count, ratio)
    V = x.T @ x
    u = x.T @ y
    beta = np.zeros(x.shape[1])
    best = (np.inf, None)
    for lam in grid:
        beta = lasso_gram(V, u, float(lam), init=beta)
        err = float(((y_val - x_val @ beta) ** 2).sum())
        if err < best[0]:
            best = (err, beta.copy())
    return best[1]


# ---------------------------------------------------------------------------
# scenario configuration


@dataclass
class ScenarioConfig:
    task: str = "covariance"            # covariance | regression
    model: str = "ar1"                  # ar1 | ar4 | block | equicorr | custom
    p: int = 10
    tau: float = 0.7
    corr: float = 0.5
    corr_block: int = 9
    sigma_file: str | None = None       # covariance matrix CSV for model=custom
    from_file: str | None = None        # complete data CSV used as population
    n: int = 100
    n_val: int = 100
    mechanism: str = "mcar"             # mcar | mcar_bernoulli | mar | nmar
    levels: tuple = (0.1,)              # MCAR fractions, or probability levels
    runs: int = 20
    seed: int = 1
    methods: tuple = ("missglasso", "meanimpute")
    tuning: str = "validation"          # validation | cv | bic
    grid_count: int = 30
    grid_ratio: float = 0.01
    cv_folds: int = 10
    em_tol: float = 1e-6
    max_em: int = 200
    knn_k: int | None = None            # None: select by cross-validation
    beta: tuple | None = None           # regression truth
    noise_sigma: float = 1.0
    heatmap_out: str | None = None

    def validate(self):
        if self.task not in ("covariance", "regression"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.tuning not in ("validation", "cv", "bic"):
            raise ValueError(f"unknown tuning rule {self.tuning!r}")
        if self.mechanism not in ("mcar", "mcar_bernoulli", "mar", "nmar"):
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.mechanism == "mcar" and any(not 0 <= f < 1 for f in self.levels):
            raise ValueError("MCAR levels must lie in [0, 1)")
        if self.task == "regression" and self.beta is None:
            raise ValueError("regression scenarios need beta")
        known_cov = {"missglasso", "meanimpute", "mle"}
        known_reg = {"mean", "knn", "missgl", "two-stage", "complete"}
        known = known_cov if self.task == "covariance" else known_reg
        bad = set(self.methods) - known
        if bad:
            raise ValueError(f"unknown methods for task {self.task}: {sorted(bad)}")
        return self


_INT_KEYS = {"p", "n", "n_val", "runs", "seed", "grid_count", "cv_folds",
             "max_em", "knn_k", "corr_block"}
_FLOAT_KEYS = {"tau", "corr", "grid_ratio", "em_tol", "noise_sigma"}
_STR_KEYS = {"task", "model", "mechanism", "tuning", "sigma_file", "from_file",
             "heatmap_out"}


def parse_scenario(text):
    """Parse a key = value scenario description (lines, # comments)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip().lower().replace("-", "_")
        val = val.strip()
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key in _STR_KEYS:
                values[key] = val
            elif key == "levels":
                values[key] = tuple(float(v) for v in val.split(","))
            elif key == "methods":
                values[key] = tuple(m.strip() for m in val.split(",") if m.strip())
            elif key == "beta":
                values[key] = tuple(float(v) for v in val.split(","))
            else:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
        except ValueError as err:
            raise ValueError(f"line {lineno}: {err}") from None
    return ScenarioConfig(**values).validate()


# ---------------------------------------------------------------------------
# scenario execution


@dataclass
class MetricsRow:
    method: str
    missing_pct: float
    run: int
    kl_loss: float | None = None
    tpr: float | None = None
    tnr: float | None = None
    l2: float | None = None
    runtime_s: float | None = None
    em_iters: int | None = None


@dataclass
class RunFailure:
    run: int
    missing_pct: float
    method: str
    message: str


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    rows: list
    failures: list
    zero_counts: dict = field(default_factory=dict)  # level -> p x p counts

    def summary(self):
        """Mean and SD per (method, missing_pct) cell, failures excluded."""
        cells = {}
        for row in self.rows:
            cells.setdefault((row.method, row.missing_pct), []).append(row)
        out = []
        for (method, pct) in sorted(cells, key=lambda t: (t[1], t[0])):
            group = cells[(method, pct)]
            entry = {"method": method, "missing_pct": pct, "n_runs": len(group)}
            for metric in ("kl_loss", "tpr", "tnr", "l2"):
                vals = [getattr(r, metric) for r in group if getattr(r, metric) is not None]
                if vals:
                    arr = np.array(vals)
                    entry[metric] = float(arr.mean())
                    entry[metric + "_sd"] = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
            out.append(entry)
        return out

    def summary_table(self):
        lines = [f"{'missing%':>8} {'method':<12} {'runs':>4} "
                 f"{'kl (sd)':>18} {'tpr':>7} {'tnr':>7} {'l2 (sd)':>18}"]
        for e in self.summary():
            kl = (f"{e['kl_loss']:.3f} ({e.get('kl_loss_sd', 0):.3f})"
                  if "kl_loss" in e else "-")
            l2 = (f"{e['l2']:.3f} ({e.get('l2_sd', 0):.3f})" if "l2" in e else "-")
            tpr = f"{e['tpr']:.3f}" if "tpr" in e else "-"
            tnr = f"{e['tnr']:.3f}" if "tnr" in e else "-"
            lines.append(f"{e['missing_pct']:>8.2f} {e['method']:<12} "
                         f"{e['n_runs']:>4} {kl:>18} {tpr:>7} {tnr:>7} {l2:>18}")
        if self.failures:
            lines.append(f"failed fits: {len(self.failures)}")
            for f in self.failures:
                lines.append(f"  run {f.run} {f.method} @ {f.missing_pct:.1f}%: {f.message}")
        return "\n".join(lines)


def _mechanism_for(config, level):
    if config.mechanism == "mcar":
        return MCAR(level), 100.0 * level
    pct = 100.0 * level / 3.0  # only the third variable of each block can go missing
    if config.mechanism == "mcar_bernoulli":
        return MCARBernoulli(level), pct
    threshold = float(norm.ppf(level))
    if config.mechanism == "mar":
        return MAR(threshold), pct
    return NMAR(threshold), pct


def _load_csv_matrix(path):
    from .modelio import read_matrix_csv

    values, _ = read_matrix_csv(path, header="auto")
    if np.isnan(values).any():
        raise DegenerateData(f"{path}: population file must be complete")
    return values


def _population(config):
    """(train source, validation source, sigma_true, k_true) for one scenario."""
    if config.from_file is not None:
        x0 = _load_csv_matrix(config.from_file)
        dev = x0 - x0.mean(axis=0)
        sigma = sym(dev.T @ dev / x0.shape[0])
        return x0, sigma, chol_inverse(sigma)
    if config.model == "custom":
        if config.sigma_file is None:
            raise ValueError("model=custom needs sigma_file")
        sigma = sym(_load_csv_matrix(config.sigma_file))
        return None, sigma, chol_inverse(sigma)
    sigma, k = gen_sigma(config.model, config.p, tau=config.tau,
                         corr=config.corr, corr_block=config.corr_block)
    return None, sigma, k


def _score_on_validation(models, x_val):
    """Twice the observed negative log-likelihood of each model on complete
    validation data (the validation-set log-loss)."""
    val = as_incomplete(x_val)
    return np.array([2.0 * observed_neg_loglik(val, m) for m in models])


def _tuned_precision_fit(inc, x_val, config, cv_seed):
    """Fit the incomplete-data estimator over a penalty grid with the
    configured tuning rule; returns (model, report)."""
    grid = lambda_grid(inc, count=config.grid_count, ratio=config.grid_ratio)
    kwargs = dict(tol=config.em_tol, max_em=config.max_em)
    if config.tuning == "validation":
        fits = fit_path(inc, grid, **kwargs)
        scores = _score_on_validation([m for m, _ in fits], x_val)
        best = int(np.argmin(scores))
        return fits[best]
    if config.tuning == "bic":
        path = select_bic(inc, grid, **kwargs)
    else:
        path = cross_validate(inc, grid, v=config.cv_folds, seed=cv_seed, **kwargs)
    return path.fits[path.best_index]


def _fit_covariance_method(method, inc, x_val, sigma_true, k_true, config, cv_seed):
    start = time.perf_counter()
    if method == "missglasso":
        model, report = _tuned_precision_fit(inc, x_val, config, cv_seed)
        em_iters = report.em_iterations
    elif method == "meanimpute":
        completed = as_incomplete(inc.mean_imputed())
        model, report = _tuned_precision_fit(completed, x_val, config, cv_seed)
        em_iters = 0
    elif method == "mle":
        model, report = mle_em(inc, tol=config.em_tol, max_em=config.max_em)
        em_iters = report.em_iterations
    else:  # pragma: no cover - blocked by validate()
        raise ValueError(method)
    runtime = time.perf_counter() - start
    tpr, tnr = tpr_tnr(model.K, k_true)
    metrics = dict(kl_loss=kl_loss(model.K, sigma_true), tpr=tpr, tnr=tnr,
                   runtime_s=runtime, em_iters=em_iters)
    return metrics, model


def _two_stage_validation_fit(reg, x_model, x_val, y_val, config):
    """Second-stage penalty tuned on validation prediction error."""
    filled = mean_impute(reg.x)
    yy = float(reg.y @ reg.y)
    lam_max = np.abs(filled.T @ reg.y).max() * np.sqrt(reg.x.n / yy)
    grid = np.geomspace(max(lam_max, 1e-8), config.grid_ratio * max(lam_max, 1e-8),
                        config.grid_count)
    best = (np.inf, None, None)
    for lam2 in grid:
        model, report = fit_two_stage(reg, lam2=float(lam2),
                                      x_model=x_model, tol=config.em_tol,
                                      max_em=config.max_em)
        err = float(((y_val - x_val @ model.beta) ** 2).sum())
        if err < best[0]:
            best = (err, model, report)
    return best[1], best[2]


def _fit_regression_method(method, inc, x_train, y, x_val, y_val, x_model, config,
                           knn_seed):
    start = time.perf_counter()
    em_iters = 0
    if method == "complete":
        beta = _lasso_validation_fit(x_train, y, x_val, y_val,
                                     config.grid_count, config.grid_ratio)
    elif method == "mean":
        beta = _lasso_validation_fit(inc.mean_imputed(), y, x_val, y_val,
                                     config.grid_count, config.grid_ratio)
    elif method == "knn":
        k = config.knn_k or knn_select_k(inc, seed=knn_seed)
        beta = _lasso_validation_fit(knn_impute(inc, k), y, x_val, y_val,
                                     config.grid_count, config.grid_ratio)
    elif method == "missgl":
        completed = conditional_mean_impute(inc, x_model)
        beta = _lasso_validation_fit(completed, y, x_val, y_val,
                                     config.grid_count, config.grid_ratio)
    elif method == "two-stage":
        reg = RegressionData(y=y, x=inc)
        model, report = _two_stage_validation_fit(reg, x_model, x_val, y_val, config)
        beta = model.beta
        em_iters = report.em_iterations
    else:  # pragma: no cover - blocked by validate()
        raise ValueError(method)
    runtime = time.perf_counter() - start
    return beta, dict(runtime_s=runtime, em_iters=em_iters)


def _run_one(config, run):
    ss = np.random.SeedSequence([config.seed, run])
    children = ss.spawn(2 + len(config.levels))
    rng_data = np.random.default_rng(children[0])
    aux_state = children[1].generate_state(2)
    cv_seed, knn_seed = int(aux_state[0]), int(aux_state[1])

    x0, sigma_true, k_true = _population(config)
    rows, failures = [], []
    zero_counts = {}
    p = sigma_true.shape[0]

    if x0 is not None:
        x_train, x_val = x0, x0
    else:
        x_train = sample_mvn(config.n, np.zeros(p), sigma_true, rng_data)
        x_val = sample_mvn(config.n_val, np.zeros(p), sigma_true, rng_data)

    if config.task == "covariance":
        for li, level in enumerate(config.levels):
            mech, pct = _mechanism_for(config, level)
            inc = apply_missingness(x_train, mech,
                                    np.random.default_rng(children[2 + li]))
            for method in config.methods:
                try:
                    metrics, model = _fit_covariance_method(
                        method, inc, x_val, sigma_true, k_true, config, cv_seed)
                except (NotPositiveDefinite, DegenerateData) as err:
                    failures.append(RunFailure(run, pct, method, str(err)))
                    continue
                rows.append(MetricsRow(method=method, missing_pct=pct, run=run,
                                       **metrics))
                if method == "missglasso" and config.heatmap_out:
                    zeros = (model.K == 0).astype(int)
                    zero_counts[pct] = zero_counts.get(pct, 0) + zeros
    else:
        beta_true = np.asarray(config.beta, dtype=float)
        if beta_true.shape[0] != p:
            raise ValueError("beta length does not match p")
        y = x_train @ beta_true + config.noise_sigma * rng_data.standard_normal(
            x_train.shape[0])
        y_val = x_val @ beta_true + config.noise_sigma * rng_data.standard_normal(
            x_val.shape[0])
        for li, level in enumerate(config.levels):
            mech, pct = _mechanism_for(config, level)
            inc = apply_missingness(x_train, mech,
                                    np.random.default_rng(children[2 + li]))
            x_model = None
            if {"missgl", "two-stage"} & set(config.methods):
                grid = lambda_grid(inc, count=config.grid_count,
                                   ratio=config.grid_ratio)
                path = cross_validate(inc, grid, v=config.cv_folds, seed=cv_seed,
                                      tol=config.em_tol, max_em=config.max_em)
                x_model = path.best_model
            for method in config.methods:
                try:
                    beta, metrics = _fit_regression_method(
                        method, inc, x_train, y, x_val, y_val, x_model, config,
                        knn_seed)
                except (NotPositiveDefinite, DegenerateData) as err:
                    failures.append(RunFailure(run, pct, method, str(err)))
                    continue
                rows.append(MetricsRow(
                    method=method, missing_pct=pct, run=run,
                    l2=float(((beta - beta_true) ** 2).sum()), **metrics))
    return rows, failures, zero_counts


def run_scenario(config, n_jobs=1):
    """Execute all runs of a scenario; reproducible from the seed alone."""
    config.validate()
    if n_jobs == 1:
        results = [_run_one(config, r) for r in range(config.runs)]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_run_one)(config, r) for r in range(config.runs))
    rows, failures = [], []
    zero_counts = {}
    for run_rows, run_failures, run_zeros in results:
        rows.extend(run_rows)
        failures.extend(run_failures)
        for pct, counts in run_zeros.items():
            zero_counts[pct] = zero_counts.get(pct, 0) + counts
    return ScenarioResult(config=config, rows=rows, failures=failures,
                          zero_counts=zero_counts)
