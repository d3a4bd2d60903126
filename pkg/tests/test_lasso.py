import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lassobounds.core import CovarianceModel
from lassobounds.errors import InputError, NoConvergence
from lassobounds.lasso import (active_set, kkt_residual, solve_lasso, solve_noiseless,
                               solve_population_noiseless, support_of)

X1 = np.array([[1.0], [1.0]])
Y1 = np.array([2.0, 2.0])


def test_one_column_examples():
    sol = solve_lasso(X1, Y1, 1.0)
    assert sol.beta == pytest.approx([1.5], abs=1e-12)
    assert sol.zeta == pytest.approx([1.0])
    assert solve_lasso(X1, Y1, 4.0).beta == pytest.approx([0.0], abs=1e-12)
    assert solve_lasso(X1, Y1, 0.0).beta == pytest.approx([2.0], abs=1e-12)


def test_kkt_residual_examples():
    sol = solve_lasso(X1, Y1, 1.0)
    assert kkt_residual(X1, Y1, 1.0, sol.beta)[0] <= 1e-8
    # at beta = 0 the residual is ||X'y||_inf - lambda
    res, _ = kkt_residual(X1, Y1, 1.0, np.zeros(1))
    assert res == pytest.approx(4.0 - 1.0)
    assert kkt_residual(X1, Y1, 0.0, np.array([2.0]))[0] <= 1e-8


def test_noiseless_examples():
    X = np.sqrt(3) * np.eye(3)
    b0 = np.array([2.0, 0.0, 0.0])
    assert solve_noiseless(X, b0, 3.0).beta == pytest.approx([1.0, 0.0, 0.0], abs=1e-12)
    assert solve_noiseless(X, b0, 0.0).beta == pytest.approx(b0, abs=1e-12)
    assert solve_noiseless(X, np.zeros(3), 5.0).beta == pytest.approx(np.zeros(3))


def test_population_noiseless_examples():
    b0 = np.array([2.0, 0.0, 0.0])
    sol = solve_population_noiseless(CovarianceModel.identity(3), 3, b0, 3.0)
    assert sol.beta == pytest.approx([1.0, 0.0, 0.0], abs=1e-10)
    big = solve_population_noiseless(CovarianceModel.identity(3), 3, b0, 7.0)
    assert big.beta == pytest.approx(np.zeros(3), abs=1e-12)
    diag = CovarianceModel.from_sigma(np.diag([4.0, 1.0]))
    sol = solve_population_noiseless(diag, 1, np.array([1.0, 1.0]), 1.0)
    assert sol.beta == pytest.approx([0.75, 0.0], abs=1e-10)


def test_soft_threshold_oracle_orthogonal_designs():
    gen = np.random.default_rng(0)
    for _ in range(100):
        p = int(gen.integers(1, 11))
        n = p + int(gen.integers(0, 5))
        Q, _ = np.linalg.qr(gen.standard_normal((n, p)))
        c = float(gen.uniform(0.5, 5.0))
        X = np.sqrt(c) * Q
        y = gen.standard_normal(n) * 3
        lam = float(gen.uniform(0, 3))
        xy = X.T @ y
        oracle = np.sign(xy) * np.maximum(np.abs(xy) - lam, 0) / c
        sol = solve_lasso(X, y, lam, tol=1e-12)
        assert np.abs(sol.beta - oracle).max() <= 1e-9


def test_penalty_mask_leaves_coordinate_free():
    gen = np.random.default_rng(1)
    X = gen.standard_normal((20, 4))
    y = gen.standard_normal(20)
    mask = np.array([False, True, True, True])
    lam = 10 * np.abs(X.T @ y).max()
    sol = solve_lasso(X, y, lam, penalty_mask=mask)
    # everything penalized is killed; the free coordinate is the OLS fit on X_1
    assert np.allclose(sol.beta[1:], 0)
    assert sol.beta[0] == pytest.approx(X[:, 0] @ y / (X[:, 0] @ X[:, 0]), rel=1e-8)


def test_objective_history_non_increasing():
    gen = np.random.default_rng(2)
    X = gen.standard_normal((30, 12))
    y = X[:, :3] @ [2.0, -1.0, 1.0] + gen.standard_normal(30)
    sol = solve_lasso(X, y, 2.0, tol=1e-12)
    h = np.array(sol.history)
    assert np.all(np.diff(h) <= 1e-9 * np.abs(h[:-1]).max())


def test_no_convergence_carries_best_iterate():
    gen = np.random.default_rng(3)
    X = gen.standard_normal((30, 20))
    y = gen.standard_normal(30)
    with pytest.raises(NoConvergence) as info:
        solve_lasso(X, y, 0.01, tol=1e-300, max_iter=3)
    assert info.value.best is not None and info.value.best.shape == (20,)


def test_input_validation():
    with pytest.raises(InputError):
        solve_lasso(X1, Y1, -1.0)
    with pytest.raises(InputError):
        solve_lasso(X1, np.ones(3), 1.0)
    with pytest.raises(InputError):
        active_set([5], 3)


def test_support_of():
    assert support_of(np.array([0.0, 1e-12, 0.3, -2.0])) == (2, 3)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.0, 20.0))
def test_subgradient_validity(seed, lam):
    gen = np.random.default_rng(seed)
    n, p = int(gen.integers(3, 15)), int(gen.integers(1, 8))
    X = gen.standard_normal((n, p))
    y = gen.standard_normal(n) * 2
    sol = solve_lasso(X, y, lam, tol=1e-10)
    assert np.abs(sol.zeta).max() <= 1 + 1e-8
    assert sol.zeta @ sol.beta == pytest.approx(np.abs(sol.beta).sum(), abs=1e-7)
    res, _ = kkt_residual(X, y, lam, sol.beta)
    assert res <= 1e-10 * max(1.0, lam) * 1.0001


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.sampled_from([0.1, 10.0]))
def test_scaling_consistency(seed, c):
    gen = np.random.default_rng(seed)
    X = gen.standard_normal((12, 5))
    y = gen.standard_normal(12)
    lam = float(gen.uniform(0.1, 3))
    a = solve_lasso(X, y, lam, tol=1e-12).beta
    b = solve_lasso(c * X, c * y, c * c * lam, tol=1e-12).beta
    assert np.abs(a - b).max() <= 1e-8
