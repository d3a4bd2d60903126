"""Primal active-set solver for small convex QPs.

Solves ``min 0.5 x'Hx + g'x`` subject to ``A x >= b`` and ``x_i >= 0`` for
the flagged coordinates. ``H`` only needs to be positive semidefinite; the
equality-constrained steps are computed by least squares, so singular
Hessians (split ``b = u - v`` variables, duplicate columns) are fine as
long as the objective is bounded below on the feasible set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NoConvergence


@dataclass(frozen=True)
class QPResult:
    x: np.ndarray
    objective: float
    mu_rows: np.ndarray
    mu_bounds: np.ndarray
    stationarity: float
    slackness: float
    iterations: int


def solve_qp(H, g, A, b, nonneg, x0, tol=1e-10, max_iter=None) -> QPResult:
    H = np.asarray(H, dtype=float)
    m = H.shape[0]
    g = np.zeros(m) if g is None else np.asarray(g, dtype=float)
    A = np.zeros((0, m)) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
    b = np.zeros(0) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
    nonneg = np.asarray(nonneg, dtype=bool)
    x = np.array(x0, dtype=float)
    if max_iter is None:
        max_iter = 20 * (m + A.shape[0]) + 50

    def row_tol(i):
        return tol * max(1.0, abs(b[i]), float(np.abs(A[i]).sum() * np.abs(x).max(initial=0.0)))

    if np.any(A @ x < b - 1e-9 * np.maximum(1.0, np.abs(b))) or np.any(x[nonneg] < 0):
        raise InputError("starting point is infeasible")
    work_rows = [i for i in range(A.shape[0]) if abs(A[i] @ x - b[i]) <= row_tol(i)]
    at_bound = nonneg & (x == 0.0)

    it = 0
    while True:
        it += 1
        if it > max_iter:
            raise NoConvergence(max_iter, best=x.copy())
        grad = H @ x + g
        free = np.flatnonzero(~at_bound)
        AW = A[work_rows][:, free] if work_rows else np.zeros((0, free.size))
        k = AW.shape[0]
        K = np.zeros((free.size + k, free.size + k))
        K[: free.size, : free.size] = H[np.ix_(free, free)]
        K[: free.size, free.size:] = -AW.T
        K[free.size:, : free.size] = AW
        rhs = np.concatenate([-grad[free], np.zeros(k)])
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0] if K.size else np.zeros(0)
        step = np.zeros(m)
        step[free] = sol[: free.size]
        mu_w = sol[free.size:]
        scale = max(1.0, float(np.abs(x).max(initial=0.0)))
        if np.abs(step).max(initial=0.0) <= 1e-12 * scale:
            mu_rows = np.zeros(A.shape[0])
            mu_rows[work_rows] = mu_w
            resid = grad - A.T @ mu_rows
            mu_bounds = np.where(at_bound, resid, 0.0)
            gscale = max(1.0, float(np.abs(grad).max(initial=0.0)))
            cand = [(mu_rows[i], 0, i) for i in work_rows]
            cand += [(mu_bounds[i], 1, i) for i in np.flatnonzero(at_bound)]
            worst = min(cand, default=None)
            if worst is None or worst[0] >= -tol * gscale:
                stat = float(np.abs(resid - mu_bounds).max(initial=0.0))
                slack = float(np.abs(mu_rows * (A @ x - b)).max(initial=0.0))
                return QPResult(x, float(0.5 * x @ H @ x + g @ x), mu_rows, mu_bounds,
                                stat, slack, it)
            if worst[1] == 0:
                work_rows.remove(worst[2])
            else:
                at_bound[worst[2]] = False
            continue
        alpha = 1.0
        block = None
        for i in range(A.shape[0]):
            if i in work_rows:
                continue
            ap = A[i] @ step
            if ap < -1e-14 * max(1.0, np.abs(A[i]).sum()):
                a = max(0.0, (A[i] @ x - b[i]) / -ap)
                if a < alpha:
                    alpha, block = a, (0, i)
        neg = np.flatnonzero(nonneg & ~at_bound & (step < 0))
        if neg.size:
            ratios = x[neg] / -step[neg]
            j = int(np.argmin(ratios))
            if ratios[j] < alpha:
                alpha, block = max(0.0, float(ratios[j])), (1, int(neg[j]))
        x = x + alpha * step
        if block is not None:
            if block[0] == 0:
                work_rows.append(block[1])
            else:
                at_bound[block[1]] = True
                x[block[1]] = 0.0
        x[nonneg] = np.maximum(x[nonneg], 0.0)
