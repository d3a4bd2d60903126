"""KKT-certified Lasso solvers.

Objective throughout is ``||y - X b||_2^2 + 2 lam ||b||_1`` with no ``1/n``,
so the noiseless and noisy error formulas apply without rescaling.
Coordinates with ``penalty_mask[j] == False`` carry no penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import CovarianceModel, as_design
from .errors import InputError, NoConvergence

SWEEP_CHUNK = 25


@dataclass(frozen=True)
class LassoSolution:
    beta: np.ndarray
    zeta: np.ndarray
    support: tuple
    kkt_residual: float
    objective: float
    sweeps: int = 0
    history: tuple = field(default=(), repr=False)

    def to_dict(self, n: int, lam: float) -> dict:
        return {
            "n": int(n),
            "p": int(self.beta.size),
            "lambda": float(lam),
            "beta": self.beta.tolist(),
            "zeta": self.zeta.tolist(),
            "kkt_residual": float(self.kkt_residual),
        }


def active_set(indices, p: int) -> tuple:
    """Sorted, de-duplicated tuple of indices checked against ``range(p)``."""
    out = tuple(sorted({int(i) for i in indices}))
    if out and (out[0] < 0 or out[-1] >= p):
        raise InputError(f"index set {out} out of range for p={p}")
    return out


def support_of(beta, support_tol: float = 1e-8) -> tuple:
    """Indices with ``|beta_j| >= support_tol * ||beta||_inf`` (ties count as active)."""
    beta = np.asarray(beta, dtype=float)
    top = float(np.max(np.abs(beta), initial=0.0))
    if top == 0.0:
        return ()
    return tuple(int(j) for j in np.flatnonzero(np.abs(beta) >= support_tol * top))


def _mask(penalty_mask, p):
    if penalty_mask is None:
        return np.ones(p, dtype=bool)
    m = np.asarray(penalty_mask, dtype=bool)
    if m.shape != (p,):
        raise InputError(f"penalty_mask must have length {p}")
    return m


def _kkt_from_grad(g, beta, lam, mask):
    """Best subgradient and max-norm stationarity violation given ``g = X'(X beta - y)``."""
    zeta = np.zeros_like(beta)
    viol = np.abs(g).copy()
    pen = mask
    act = pen & (beta != 0.0)
    zeta[act] = np.sign(beta[act])
    viol[act] = np.abs(g[act] + lam * zeta[act])
    ina = pen & (beta == 0.0)
    if lam > 0:
        # clip before dividing so a subnormal lam cannot overflow
        zeta[ina] = np.clip(-g[ina], -lam, lam) / lam
    viol[ina] = np.abs(g[ina] + lam * zeta[ina])
    return float(np.max(viol, initial=0.0)), zeta


def kkt_residual(X, y, lam, beta, penalty_mask=None):
    """Return ``(residual, zeta)`` for a candidate Lasso solution.

    ``zeta`` is the sign on nonzero penalized coordinates and the clipped
    ratio ``-g_j / lam`` elsewhere; unpenalized coordinates get 0. The
    residual is ``max_j |X_j'(X beta - y) + lam zeta_j|``.
    """
    X = as_design(X)
    beta = np.asarray(beta, dtype=float)
    g = X.T @ (X @ beta - np.asarray(y, dtype=float))
    return _kkt_from_grad(g, beta, float(lam), _mask(penalty_mask, X.shape[1]))


def _objective(G, c, yy, beta, lam, mask):
    return float(beta @ G @ beta - 2.0 * c @ beta + yy + 2.0 * lam * np.abs(beta[mask]).sum())


def _polish(G, c, beta, pen, mask):
    """Exact solve on the current support with the current signs held fixed."""
    A = np.flatnonzero((beta != 0.0) | ~mask)
    out = np.zeros_like(beta)
    if A.size == 0:
        return out
    rhs = c[A] - pen[A] * np.sign(beta[A])
    GA = G[np.ix_(A, A)]
    try:
        sol = np.linalg.solve(GA, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(GA, rhs, rcond=None)[0]
    out[A] = sol
    return out


def solve_gram(G, c, yy, lam, penalty_mask=None, tol=1e-9, max_iter=100_000,
               beta_init=None, support_tol=1e-8):
    """Lasso from sufficient statistics ``G = X'X``, ``c = X'y``, ``yy = y'y``.

    Cyclic coordinate descent in chunks of sweeps; after each chunk the
    current sign pattern is solved exactly and kept if it lowers the
    objective. Convergence is declared on the KKT residual
    ``<= tol * max(1, lam)``.
    """
    lam = float(lam)
    if lam < 0:
        raise InputError("lambda must be >= 0")
    if tol <= 0:
        raise InputError("tol must be > 0")
    G = np.ascontiguousarray(G, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    p = c.size
    mask = _mask(penalty_mask, p)
    pen = np.where(mask, lam, 0.0)
    beta = np.zeros(p) if beta_init is None else np.array(beta_init, dtype=np.float64)
    r = c - G @ beta
    target = tol * max(1.0, lam)
    obj = _objective(G, c, yy, beta, lam, mask)
    history = [obj]
    sweeps = 0
    res = np.inf
    while True:
        res, zeta = _kkt_from_grad(-r, beta, lam, mask)
        if res <= target:
            break
        if sweeps >= max_iter:
            raise NoConvergence(max_iter, best=beta.copy(), residual=res)
        done, _ = kernels.cd_sweeps(G, pen, beta, r, min(SWEEP_CHUNK, max_iter - sweeps), 0.0)
        sweeps += done
        # refresh r to stop drift from the incremental updates
        r = c - G @ beta
        cand = _polish(G, c, beta, pen, mask)
        cand_obj = _objective(G, c, yy, cand, lam, mask)
        obj = _objective(G, c, yy, beta, lam, mask)
        if cand_obj <= obj:
            cand_r = c - G @ cand
            cand_res, _ = _kkt_from_grad(-cand_r, cand, lam, mask)
            if cand_res <= target or cand_obj < obj:
                beta, r, obj = cand, cand_r, cand_obj
        history.append(obj)
    support = support_of(beta, support_tol)
    return LassoSolution(beta, zeta, support, res, _objective(G, c, yy, beta, lam, mask),
                         sweeps, tuple(history))


def solve_lasso(X, y, lam, penalty_mask=None, tol=1e-9, max_iter=100_000,
                beta_init=None, support_tol=1e-8) -> LassoSolution:
    """Minimise ``||y - X b||^2 + 2 lam ||b_pen||_1``."""
    X = as_design(X)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise InputError(f"y must have length {X.shape[0]}")
    G = X.T @ X
    return solve_gram(G, X.T @ y, float(y @ y), lam, penalty_mask, tol, max_iter,
                      beta_init, support_tol)


def solve_noiseless(X, beta0, lambda_star, penalty_mask=None, tol=1e-9,
                    max_iter=100_000) -> LassoSolution:
    """Noiseless Lasso: ``||X (b - beta0)||^2 + 2 lambda_star ||b||_1``."""
    X = as_design(X)
    beta0 = np.asarray(beta0, dtype=np.float64)
    if beta0.shape != (X.shape[1],):
        raise InputError(f"beta0 must have length {X.shape[1]}")
    G = X.T @ X
    c = G @ beta0
    return solve_gram(G, c, float(beta0 @ c), lambda_star, penalty_mask, tol, max_iter)


def population_design(model: CovarianceModel, n: int) -> np.ndarray:
    """Square design ``sqrt(n) chol^T`` with ``||D b||^2 = n b' Sigma0 b``."""
    return np.sqrt(n) * model.chol.T


def solve_population_noiseless(model: CovarianceModel, n: int, beta0, lam, tol=1e-9,
                               max_iter=100_000) -> LassoSolution:
    """Population noiseless Lasso ``n ||Sigma0^{1/2}(b - beta0)||^2 + 2 lam ||b||_1``."""
    return solve_noiseless(population_design(model, n), beta0, lam, tol=tol, max_iter=max_iter)
