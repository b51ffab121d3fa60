import numpy as np
import pytest
from numpy.testing import assert_allclose

from missglasso.exceptions import NotPositiveDefinite
from missglasso.linalg import (chol_inverse, chol_logdet_solve, embed,
                               rank_one_inverse_update, submatrix, sym)

from _oracles import gauss_jordan_solve, random_spd


def test_chol_logdet_solve_identity():
    logdet, x = chol_logdet_solve(np.eye(3), np.array([1.0, 0.0, 0.0]))
    assert logdet == 0.0
    assert_allclose(x, [1.0, 0.0, 0.0])


def test_chol_logdet_solve_diagonal():
    logdet, x = chol_logdet_solve(np.diag([2.0, 2.0]), np.array([1.0, 1.0]))
    assert_allclose(logdet, 2 * np.log(2.0), rtol=1e-14)
    assert_allclose(x, [0.5, 0.5], rtol=1e-14)


def test_chol_solve_matches_gauss_jordan():
    rng = np.random.default_rng(3)
    a = random_spd(rng, 5)
    b = rng.standard_normal((5, 2))
    _, x = chol_logdet_solve(a, b)
    assert_allclose(x, gauss_jordan_solve(a, b), atol=1e-9)


def test_chol_solve_residual_bound():
    rng = np.random.default_rng(4)
    for _ in range(20):
        p = rng.integers(1, 9)
        a = random_spd(rng, p)
        b = rng.standard_normal(p)
        _, x = chol_logdet_solve(a, b)
        assert np.abs(a @ x - b).max() <= 1e-10 * max(np.abs(b).max(), 1.0)


def test_chol_inverse_invariant():
    rng = np.random.default_rng(5)
    for _ in range(50):
        p = int(rng.integers(1, 12))
        a = random_spd(rng, p)
        inv = chol_inverse(a)
        assert np.abs(a @ inv - np.eye(p)).max() <= 1e-9


def test_not_positive_definite_raises():
    with pytest.raises(NotPositiveDefinite):
        chol_logdet_solve(np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones(2))
    with pytest.raises(NotPositiveDefinite):
        chol_logdet_solve(np.zeros((2, 2)), np.ones(2))


def test_submatrix_identity_block():
    assert_allclose(submatrix(np.eye(3), [0, 2], [0, 2]), np.eye(2))


def test_embed_identity_block():
    out = embed(np.eye(2), [0, 2], [0, 2], 3)
    expected = np.zeros((3, 3))
    expected[0, 0] = expected[2, 2] = 1.0
    assert_allclose(out, expected)


def test_submatrix_matches_loop_oracle():
    rng = np.random.default_rng(6)
    a = rng.standard_normal((7, 7))
    rows = np.array([1, 3, 6])
    cols = np.array([0, 2])
    got = submatrix(a, rows, cols)
    for i, r in enumerate(rows):
        for j, c in enumerate(cols):
            assert got[i, j] == a[r, c]


def test_embed_submatrix_round_trip():
    rng = np.random.default_rng(7)
    vals = rng.standard_normal((2, 3))
    rows, cols, p = [1, 4], [0, 2, 3], 5
    big = embed(vals, rows, cols, p)
    assert_allclose(submatrix(big, rows, cols), vals)
    other = np.ones((p, p), dtype=bool)
    other[np.ix_(rows, cols)] = False
    assert np.all(big[other] == 0.0)


def test_embed_submatrix_adjointness():
    rng = np.random.default_rng(8)
    for _ in range(20):
        p = 6
        rows = np.sort(rng.choice(p, size=2, replace=False))
        cols = np.sort(rng.choice(p, size=3, replace=False))
        v = rng.standard_normal((2, 3))
        w = rng.standard_normal((p, p))
        lhs = (embed(v, rows, cols, p) * w).sum()
        rhs = (v * submatrix(w, rows, cols)).sum()
        assert_allclose(lhs, rhs, rtol=1e-12)


def test_index_set_validation():
    with pytest.raises(IndexError):
        submatrix(np.eye(3), [0, 3], [0])
    with pytest.raises(IndexError):
        submatrix(np.eye(3), [1, 1], [0])
    with pytest.raises(IndexError):
        embed(np.eye(2), [2, 1], [0, 1], 3)


def test_rank_one_zero_update():
    assert_allclose(rank_one_inverse_update(np.eye(2), np.zeros(2)), np.eye(2))


def test_rank_one_unit_vector():
    got = rank_one_inverse_update(np.eye(2), np.array([1.0, 0.0]))
    assert_allclose(got, np.diag([0.5, 1.0]), rtol=1e-14)


def test_rank_one_matches_dense_inverse():
    rng = np.random.default_rng(9)
    a = random_spd(rng, 6)
    a_inv = chol_inverse(a)
    b = rng.standard_normal(6)
    got = rank_one_inverse_update(a_inv, b)
    expected = np.linalg.inv(a + np.outer(b, b))
    assert np.abs(got - expected).max() <= 1e-9


def test_rank_one_many_random_instances():
    rng = np.random.default_rng(10)
    for _ in range(1000):
        p = int(rng.integers(1, 21))
        a = random_spd(rng, p)
        b = rng.standard_normal(p)
        got = rank_one_inverse_update(chol_inverse(a), b)
        assert np.abs(got @ (a + np.outer(b, b)) - np.eye(p)).max() <= 1e-9


def test_sym_enforces_symmetry():
    rng = np.random.default_rng(11)
    a = rng.standard_normal((4, 4))
    s = sym(a)
    assert np.array_equal(s, s.T)
