"""Pure-Python reference implementations of the hot loops.

These are the fallback when the compiled ``_ckernels`` extension is not
available. Signatures and results match the Cython versions exactly; the
parity tests in ``tests/test_kernels.py`` hold both to that.
"""

import math

import numpy as np

GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


def cd_sweeps(G, pen, beta, r, max_sweeps, tol):
    """Cyclic coordinate descent on ``0.5 b'Gb - c'b + sum_j pen_j |b_j|``.

    ``r`` holds ``c - G beta`` and is kept in sync with ``beta`` (both are
    updated in place). Returns ``(sweeps, last_change)`` where ``last_change``
    is the largest scaled step ``sqrt(G_jj) |delta_j|`` of the final sweep.
    """
    p = beta.shape[0]
    Gl = G.tolist()
    penl = pen.tolist()
    b = beta.tolist()
    rl = r.tolist()
    diag = [Gl[j][j] for j in range(p)]
    sweeps = 0
    change = 0.0
    while sweeps < max_sweeps:
        sweeps += 1
        change = 0.0
        for j in range(p):
            gjj = diag[j]
            if gjj <= 0.0:
                continue
            old = b[j]
            z = rl[j] + gjj * old
            thr = penl[j]
            if z > thr:
                new = (z - thr) / gjj
            elif z < -thr:
                new = (z + thr) / gjj
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                b[j] = new
                row = Gl[j]
                for k in range(p):
                    rl[k] -= row[k] * delta
                step = abs(delta) * math.sqrt(gjj)
                if step > change:
                    change = step
        if change <= tol:
            break
    beta[:] = b
    r[:] = rl
    return sweeps, change


def _ratio(q, c):
    if c <= 0.0:
        return math.inf
    return q / (c * c)


def _constraint(b, s_mask, w):
    c = 0.0
    for j in range(len(b)):
        if s_mask[j]:
            c += abs(b[j])
        else:
            c -= w[j] * abs(b[j])
    return c


def refine_ratio(G, s_mask, w, b, passes, step0):
    """Derivative-free local improvement of ``b'Gb / c(b)^2``.

    ``c(b) = sum_{j in S} |b_j| - sum_{j not in S} w_j |b_j|``. Each pass
    runs a golden-section line search along every coordinate axis and every
    pair direction ``e_i +/- e_j`` inside ``[-h, h]``; ``h`` halves after a
    pass without improvement. ``b`` is updated in place and rescaled so that
    ``c(b) = 1``. Returns the final ratio.
    """
    p = b.shape[0]
    Gl = G.tolist()
    sm = [bool(x) for x in s_mask.tolist()]
    wl = w.tolist()
    bl = b.tolist()
    dirs = []
    for i in range(p):
        d = [0.0] * p
        d[i] = 1.0
        dirs.append(d)
    for i in range(p):
        for j in range(i + 1, p):
            for sgn in (1.0, -1.0):
                d = [0.0] * p
                d[i] = 1.0
                d[j] = sgn
                dirs.append(d)
    dGd = [sum(d[i] * Gl[i][k] * d[k] for i in range(p) for k in range(p)) for d in dirs]

    def quad(v):
        return sum(v[i] * Gl[i][k] * v[k] for i in range(p) for k in range(p))

    c0 = _constraint(bl, sm, wl)
    best = _ratio(quad(bl), c0)
    h = step0
    for _ in range(passes):
        improved = False
        for di, d in enumerate(dirs):
            Gb_d = sum(d[i] * Gl[i][k] * bl[k] for i in range(p) for k in range(p))
            q0 = quad(bl)

            def f(t):
                v = [bl[i] + t * d[i] for i in range(p)]
                return _ratio(q0 + 2.0 * t * Gb_d + t * t * dGd[di], _constraint(v, sm, wl))

            lo, hi = -h, h
            x1 = hi - GOLDEN * (hi - lo)
            x2 = lo + GOLDEN * (hi - lo)
            f1, f2 = f(x1), f(x2)
            for _ in range(48):
                if f1 <= f2:
                    hi, x2, f2 = x2, x1, f1
                    x1 = hi - GOLDEN * (hi - lo)
                    f1 = f(x1)
                else:
                    lo, x1, f1 = x1, x2, f2
                    x2 = lo + GOLDEN * (hi - lo)
                    f2 = f(x2)
            t, ft = (x1, f1) if f1 <= f2 else (x2, f2)
            if ft < best * (1.0 - 1e-15):
                for i in range(p):
                    bl[i] += t * d[i]
                c = _constraint(bl, sm, wl)
                bl = [x / c for x in bl]
                best = ft
                improved = True
        if not improved:
            h *= 0.5
            if h < 1e-12:
                break
    b[:] = bl
    return best


def ratio_batch(G, s_mask, w, B):
    """Ratio ``b'Gb / c(b)^2`` for every row of ``B`` (``inf`` where c <= 0)."""
    q = np.einsum("ij,jk,ik->i", B, G, B)
    A = np.abs(B)
    c = A[:, s_mask].sum(axis=1) - A[:, ~s_mask] @ w[~s_mask]
    out = np.full(B.shape[0], np.inf)
    ok = c > 0
    out[ok] = q[ok] / c[ok] ** 2
    return out
