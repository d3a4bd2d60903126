import numpy as np
import pytest

from lassobounds.errors import InputError, RankDeficient
from lassobounds.projections import (anti_projection_diag, irrepresentable_check,
                                     noise_projection_norm)


def test_orthogonal_columns():
    d = anti_projection_diag(np.eye(2), (0,))
    assert d.v_sq == pytest.approx([1.0])
    assert d.u_sq == pytest.approx([1.0])
    assert d.to_dict()["v_sq"] == {"2": 1.0}


def test_scaled_identity_u():
    n = 5
    d = anti_projection_diag(np.sqrt(n) * np.eye(n), (0,))
    assert d.u_sq == pytest.approx([1.0 / n])
    assert d.v_full(n) == pytest.approx([0.0] + [np.sqrt(n)] * (n - 1))


def test_duplicate_column_zero_v():
    gen = np.random.default_rng(0)
    x = gen.standard_normal(7)
    X = np.column_stack([x, x, gen.standard_normal(7)])
    d = anti_projection_diag(X, (0,))
    assert d.v_sq[0] == pytest.approx(0.0, abs=1e-12)


def test_matches_normal_equations():
    gen = np.random.default_rng(1)
    X = gen.standard_normal((15, 6))
    S = (1, 4)
    d = anti_projection_diag(X, S)
    XS = X[:, S]
    P = XS @ np.linalg.solve(XS.T @ XS, XS.T)
    for j, v2 in zip(d.complement, d.v_sq):
        r = X[:, j] - P @ X[:, j]
        assert v2 == pytest.approx(r @ r, rel=1e-10)
    assert d.u_sq == pytest.approx(np.diag(np.linalg.inv(XS.T @ XS)), rel=1e-10)


def test_rank_deficient_support():
    x = np.arange(1.0, 6.0)
    X = np.column_stack([x, 2 * x, np.ones(5)])
    d = anti_projection_diag(X, (0, 1))
    assert not d.rank_ok and d.u_sq is None
    with pytest.raises(RankDeficient):
        d.u
    # the residual of the constant column on span{x}
    r = np.ones(5) - x * (x @ np.ones(5)) / (x @ x)
    assert d.v_sq[0] == pytest.approx(r @ r, rel=1e-10)
    with pytest.raises(RankDeficient):
        noise_projection_norm(X, (0, 1), np.ones(5))


def test_noise_projection_examples():
    gen = np.random.default_rng(2)
    X = gen.standard_normal((10, 4))
    S = (0, 2)
    XS = X[:, S]
    Q, _ = np.linalg.qr(XS, mode="complete")
    eps = Q[:, 3]
    assert noise_projection_norm(X, S, eps) == pytest.approx(0.0, abs=1e-12)
    c = np.array([0.7, -1.3])
    assert noise_projection_norm(X, S, XS @ c) == pytest.approx(np.linalg.norm(XS @ c), rel=1e-12)
    with pytest.raises(InputError):
        noise_projection_norm(X, S, np.ones(3))


def test_irrepresentable_examples():
    g, holds = irrepresentable_check(np.eye(4), (0, 1), 0.5)
    assert g == pytest.approx(0.0) and holds
    gen = np.random.default_rng(3)
    x = gen.standard_normal(8)
    X = np.column_stack([x, gen.standard_normal(8), x])
    g, holds = irrepresentable_check(X, (0, 1), np.array([0.1]))
    assert g == pytest.approx(1.0, rel=1e-10)
    assert not holds
    assert irrepresentable_check(X, (0, 1), 0.0)[1]


def test_bad_index_set():
    with pytest.raises(InputError):
        anti_projection_diag(np.eye(3), ())
    with pytest.raises(InputError):
        anti_projection_diag(np.eye(3), (3,))
