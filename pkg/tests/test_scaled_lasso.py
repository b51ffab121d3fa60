import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import optimize

from missglasso.exceptions import ZeroResponse
from missglasso.lasso import lasso_gram
from missglasso.scaled_lasso import (InnerProducts, objective_classo,
                                     scaled_lasso_fit)

from _oracles import classo_partial_min_objective


def random_instance(rng, n, p, noise=0.5):
    x = rng.standard_normal((n, p))
    beta = rng.standard_normal(p) * (rng.random(p) < 0.6)
    y = x @ beta + noise * rng.standard_normal(n)
    return InnerProducts.from_data(y, x), x, y


def test_huge_penalty_closed_form():
    rng = np.random.default_rng(0)
    ip, _, _ = random_instance(rng, 12, 4)
    lam = np.abs(ip.yx).max() * np.sqrt(ip.n / ip.yy) + 1.0
    fit = scaled_lasso_fit(ip, lam)
    assert np.all(fit.phi == 0.0)
    assert_allclose(fit.rho_scale, np.sqrt(ip.n / ip.yy), rtol=1e-12)
    assert_allclose(fit.sigma, np.sqrt(ip.yy / ip.n), rtol=1e-12)


def test_objective_trivial_values():
    ip = InnerProducts(yy=2.0, yx=np.zeros(2), xx=np.eye(2), n=3)
    assert_allclose(objective_classo(ip, np.zeros(2), 1.0, 5.0), 1.0)
    # l1 term alone
    base = objective_classo(ip, np.zeros(2), 1.0, 0.5)
    with_phi = objective_classo(ip, np.array([1.0, -2.0]), 1.0, 0.5)
    quad = 0.5 * np.array([1.0, -2.0]) @ ip.xx @ np.array([1.0, -2.0])
    assert_allclose(with_phi - base - quad, 1.5, rtol=1e-12)


def test_objective_matches_raw_residual():
    rng = np.random.default_rng(1)
    ip, x, y = random_instance(rng, 15, 3)
    phi = rng.standard_normal(3)
    rho = 0.8
    lam = 0.3
    direct = (-15 * np.log(rho) + 0.5 * np.sum((rho * y - x @ phi) ** 2)
              + lam * np.abs(phi).sum())
    assert_allclose(objective_classo(ip, phi, rho, lam), direct, rtol=1e-10)


def test_two_variable_oracle():
    rng = np.random.default_rng(2)
    n = 10
    x = rng.standard_normal((n, 1))
    y = x[:, 0] + 0.3 * rng.standard_normal(n)
    ip = InnerProducts.from_data(y, x)
    fit = scaled_lasso_fit(ip, 0.0)

    def f(theta):
        phi, log_rho = theta
        return objective_classo(ip, np.array([phi]), np.exp(log_rho), 0.0)

    res = optimize.minimize(f, [0.0, 0.0], method="Nelder-Mead",
                            options={"fatol": 1e-14, "xatol": 1e-12,
                                     "maxiter": 20000})
    assert abs(fit.objective - res.fun) <= 1e-8
    assert abs(fit.phi[0] - res.x[0]) <= 1e-5


def test_matches_partial_minimization_oracle():
    rng = np.random.default_rng(3)
    for _ in range(8):
        ip, _, _ = random_instance(rng, 25, 3)
        lam = 0.7
        fit = scaled_lasso_fit(ip, lam)
        _, _, oracle = classo_partial_min_objective(ip, lam)
        assert abs(fit.objective - oracle) <= 1e-6


def test_coordinate_updates_descend():
    # Mirrors the solver's exact update formulas and checks that every
    # single coordinate step (rho or one phi_j) lowers the objective.
    rng = np.random.default_rng(4)
    ip, _, _ = random_instance(rng, 20, 4)
    lam = 0.5
    phi = np.zeros(4)
    rho = np.sqrt(ip.n / ip.yy)
    obj = objective_classo(ip, phi, rho, lam)
    for _ in range(30):
        yxphi = ip.yx @ phi
        rho = (yxphi + np.sqrt(yxphi ** 2 + 4 * ip.yy * ip.n)) / (2 * ip.yy)
        new = objective_classo(ip, phi, rho, lam)
        assert new <= obj + 1e-12
        obj = new
        for j in range(4):
            s = ip.xx[j] @ phi - ip.xx[j, j] * phi[j] - rho * ip.yx[j]
            if s > lam:
                phi_j = (lam - s) / ip.xx[j, j]
            elif s < -lam:
                phi_j = -(lam + s) / ip.xx[j, j]
            else:
                phi_j = 0.0
            phi[j] = phi_j
            new = objective_classo(ip, phi, rho, lam)
            assert new <= obj + 1e-12
            obj = new


def test_rho_update_is_stationary():
    rng = np.random.default_rng(5)
    for _ in range(20):
        ip, _, _ = random_instance(rng, 15, 3)
        phi = rng.standard_normal(3)
        yxphi = ip.yx @ phi
        rho = (yxphi + np.sqrt(yxphi ** 2 + 4 * ip.yy * ip.n)) / (2 * ip.yy)
        foc = -ip.n / rho + rho * ip.yy - yxphi
        assert abs(foc) <= 1e-9 * max(1.0, ip.n)


def test_stationarity_at_convergence():
    rng = np.random.default_rng(6)
    for _ in range(20):
        p = int(rng.integers(1, 8))
        ip, _, _ = random_instance(rng, 30, p)
        lam = rng.uniform(0.1, 3.0)
        fit = scaled_lasso_fit(ip, lam)
        foc = -ip.n / fit.rho_scale + fit.rho_scale * ip.yy - ip.yx @ fit.phi
        assert abs(foc) <= 1e-7
        grad = ip.xx @ fit.phi - fit.rho_scale * ip.yx
        for j in range(p):
            if fit.phi[j] == 0.0:
                assert abs(grad[j]) <= lam + 1e-7
            else:
                assert abs(grad[j] + lam * np.sign(fit.phi[j])) <= 1e-7


def test_scale_equivariance():
    rng = np.random.default_rng(7)
    ip, x, y = random_instance(rng, 20, 3)
    lam = 0.8
    fit = scaled_lasso_fit(ip, lam)
    c = 2.5
    ip_scaled = InnerProducts.from_data(c * y, x)
    fit_c = scaled_lasso_fit(ip_scaled, lam)
    assert np.abs(fit_c.phi - fit.phi).max() <= 1e-7
    assert abs(fit_c.rho_scale - fit.rho_scale / c) <= 1e-7
    assert np.abs(fit_c.beta - c * fit.beta).max() <= 1e-6
    assert abs(fit_c.sigma - c * fit.sigma) <= 1e-6


def test_frozen_scale_reduces_to_lasso():
    rng = np.random.default_rng(8)
    ip, _, _ = random_instance(rng, 25, 4)
    lam = 0.6
    fit = scaled_lasso_fit(ip, lam, kkt_tol=1e-11)
    # at the converged scale, phi must solve the plain Gram lasso
    beta = lasso_gram(ip.xx, fit.rho_scale * ip.yx, lam, tol=1e-12)
    assert np.abs(beta - fit.phi).max() <= 1e-8


def test_beta_sigma_consistent_with_phi_rho():
    rng = np.random.default_rng(9)
    ip, _, _ = random_instance(rng, 20, 5)
    fit = scaled_lasso_fit(ip, 1.0)
    assert np.abs(fit.beta - fit.phi / fit.rho_scale).max() <= 1e-12
    assert abs(fit.sigma - 1.0 / fit.rho_scale) <= 1e-12


def test_zero_response_rejected():
    ip = InnerProducts(yy=0.0, yx=np.zeros(2), xx=np.eye(2), n=5)
    with pytest.raises(ZeroResponse):
        scaled_lasso_fit(ip, 1.0)


def test_warm_start_agrees():
    rng = np.random.default_rng(10)
    ip, _, _ = random_instance(rng, 30, 4)
    cold = scaled_lasso_fit(ip, 0.9)
    warm = scaled_lasso_fit(ip, 0.9, init=(rng.standard_normal(4), 1.5))
    assert abs(cold.objective - warm.objective) <= 1e-9 * (1 + abs(cold.objective))
