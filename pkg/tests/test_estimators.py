import numpy as np
import pytest
from numpy.testing import assert_allclose
from sklearn.base import clone

from missglasso.em import fit_missglasso
from missglasso.estimators import MissGlasso, MissGlassoCV, TwoStageRegressor
from missglasso.incomplete import IncompleteMatrix
from missglasso.select import cross_validate, lambda_grid


def make_data(rng, n=30, p=4, frac=0.2):
    x = rng.standard_normal((n, p))
    x[rng.random((n, p)) < frac] = np.nan
    keep = ~np.all(np.isnan(x), axis=1)
    return x[keep]


def test_fit_sets_standard_attributes():
    rng = np.random.default_rng(0)
    x = make_data(rng)
    est = MissGlasso(lam=2.0).fit(x)
    assert est.location_.shape == (4,)
    assert est.precision_.shape == (4, 4)
    assert est.covariance_.shape == (4, 4)
    assert est.n_iter_ >= 0
    assert est.converged_
    assert np.abs(est.covariance_ @ est.precision_ - np.eye(4)).max() <= 1e-6


def test_fit_matches_functional_core():
    rng = np.random.default_rng(1)
    x = make_data(rng)
    est = MissGlasso(lam=1.5).fit(x)
    model, _ = fit_missglasso(IncompleteMatrix(x), 1.5)
    assert np.array_equal(est.precision_, model.K)


def test_transform_imputes():
    rng = np.random.default_rng(2)
    x = make_data(rng)
    est = MissGlasso(lam=2.0).fit(x)
    out = est.transform(x)
    assert not np.isnan(out).any()
    mask = ~np.isnan(x)
    assert np.array_equal(out[mask], x[mask])


def test_score_is_average_loglik():
    rng = np.random.default_rng(3)
    x = make_data(rng, frac=0.0)
    est = MissGlasso(lam=2.0).fit(x)
    assert est.score(x) < 0  # a density value, not an R^2


def test_get_set_params_and_clone():
    est = MissGlasso(lam=3.0, tol=1e-7)
    params = est.get_params()
    assert params["lam"] == 3.0
    est2 = clone(est).set_params(lam=1.0)
    assert est2.lam == 1.0
    assert est.lam == 3.0


def test_cv_estimator_matches_library_selection():
    rng = np.random.default_rng(4)
    x = make_data(rng, n=24)
    est = MissGlassoCV(criterion="cv", cv=4, n_lambdas=5, lambda_ratio=0.1,
                       seed=11).fit(x)
    data = IncompleteMatrix(x)
    grid = lambda_grid(data, count=5, ratio=0.1)
    path = cross_validate(data, grid, v=4, seed=11)
    assert est.lambda_ == path.best_lambda
    assert np.array_equal(est.criterion_scores_, path.scores)


def test_cv_estimator_bic_mode():
    rng = np.random.default_rng(5)
    x = make_data(rng, n=24)
    est = MissGlassoCV(criterion="bic", n_lambdas=4, lambda_ratio=0.1).fit(x)
    assert est.lambda_ in est.lambdas_


def test_two_stage_regressor_complete_prediction():
    rng = np.random.default_rng(6)
    n, p = 40, 4
    x = rng.standard_normal((n, p))
    beta = np.array([1.0, 0.0, -2.0, 0.0])
    y = x @ beta + 0.3 * rng.standard_normal(n)
    est = TwoStageRegressor(lam1=3.0, lam2=1.0).fit(x, y)
    assert est.coef_.shape == (p,)
    assert est.sigma_ > 0
    pred = est.predict(x)
    assert_allclose(pred, x @ est.coef_, rtol=1e-10)
    assert est.score(x, y) > 0.5


def test_two_stage_regressor_handles_missing_in_predict():
    rng = np.random.default_rng(7)
    n, p = 40, 3
    x = rng.standard_normal((n, p))
    y = x[:, 0] * 2 + 0.2 * rng.standard_normal(n)
    xm = x.copy()
    xm[rng.random((n, p)) < 0.15] = np.nan
    est = TwoStageRegressor(lam1=2.0, lam2=0.5).fit(xm, y)
    x_new = x[:5].copy()
    x_new[0, 1] = np.nan
    pred = est.predict(x_new)
    assert pred.shape == (5,)
    assert np.isfinite(pred).all()


def test_transform_rejects_wrong_width():
    rng = np.random.default_rng(8)
    x = make_data(rng)
    est = MissGlasso(lam=2.0).fit(x)
    with pytest.raises(ValueError):
        est.transform(np.zeros((2, 7)))
