"""One-dimensional total variation as a Lasso with a free intercept.

With the lower-triangular all-ones design, ``f = X b`` and ``b_i = f_i - f_{i-1}``
(``f_0 = 0``), so ``TV(f) = ||b_{2:n}||_1`` and ``b_1`` is unpenalized. Jump
locations are stored 0-based: the jump between ``f_{k-1}`` and ``f_k`` (1-based)
is coordinate ``k - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .compat import CompatSpec, kappa_hat_sq
from .errors import BetaminViolated, DegenerateKappa, InputError, OddDistance
from .lasso import LassoSolution, solve_lasso
from .projections import anti_projection_diag


@dataclass(frozen=True)
class TvInstance:
    """Jump pattern given by the distances ``d = (d_1, ..., d_{s+1})``."""

    n: int
    d: tuple
    S: tuple = field(init=False)

    def __post_init__(self):
        d = tuple(int(x) for x in self.d)
        if len(d) < 2:
            raise InputError("need at least two distances (one jump)")
        if any(x < 1 for x in d):
            raise InputError("distances must be >= 1")
        if sum(d) != self.n:
            raise InputError(f"distances sum to {sum(d)}, expected n = {self.n}")
        odd = [j + 1 for j, x in enumerate(d[1:-1], start=1) if x % 2]
        if odd:
            raise OddDistance(f"interior distances must be even; d_{odd[0]} = {d[odd[0] - 1]}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "S", tuple(int(v) for v in np.cumsum(d[:-1])))

    @property
    def s(self) -> int:
        return len(self.d) - 1

    @property
    def locations(self) -> tuple:
        """1-based jump locations ``d_1 + 1, d_1 + d_2 + 1, ...``."""
        return tuple(j + 1 for j in self.S)

    def harmonic_sum(self) -> float:
        """``n/d_1 + sum 4n/d_j + n/d_{s+1}`` (equals ``||b~||_1``)."""
        n, d = self.n, self.d
        return n / d[0] + sum(4.0 * n / x for x in d[1:-1]) + n / d[-1]

    def to_dict(self) -> dict:
        return {"n": self.n, "d": list(self.d)}


@dataclass(frozen=True)
class TvSignal:
    f: np.ndarray
    tv: float
    solution: LassoSolution | None = field(default=None, repr=False)


def tv_design(n: int) -> np.ndarray:
    if n < 2:
        raise InputError("n must be >= 2")
    return np.tril(np.ones((n, n)))


def total_variation(f) -> float:
    return float(np.abs(np.diff(np.asarray(f, dtype=float))).sum())


def tv_penalty_mask(n: int) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[0] = False
    return mask


def tv_kappa_closed_form(inst: TvInstance) -> float:
    return (inst.s + 1) / inst.harmonic_sum()


def _btilde(inst: TvInstance) -> np.ndarray:
    n, d, s = inst.n, inst.d, inst.s
    out = np.empty(s)
    for k in range(s):
        left = n / d[0] if k == 0 else 2.0 * n / d[k]
        right = n / d[-1] if k == s - 1 else 2.0 * n / d[k + 1]
        out[k] = (-1.0) ** k * (left + right)
    return out


def tv_bstar(inst: TvInstance) -> np.ndarray:
    """Closed-form minimizer, normalised so ``||b_S||_1 = 1``.

    The free first coordinate equals ``-(n/d_1)/||b~||_1``, the level of the
    first plateau of the extremal profile.
    """
    bt = _btilde(inst)
    total = np.abs(bt).sum()
    b = np.zeros(inst.n)
    b[list(inst.S)] = bt / total
    b[0] = -(inst.n / inst.d[0]) / total
    return b


def tv_denoise(y, lam: float, tol: float = 1e-9) -> TvSignal:
    """Minimise ``||y - f||^2 + 2 lam TV(f)``."""
    y = np.asarray(y, dtype=float)
    n = y.size
    X = tv_design(n)
    sol = solve_lasso(X, y, lam, penalty_mask=tv_penalty_mask(n), tol=tol)
    f = X @ sol.beta
    return TvSignal(f, total_variation(f), sol)


def tv_jump_thresholds(inst: TvInstance, lambda_star: float) -> np.ndarray:
    """Minimal jump magnitudes ``|b~_j| lambda*/n`` for the noiseless identity."""
    return np.abs(_btilde(inst)) * lambda_star / inst.n


def tv_noiseless_error(inst: TvInstance, f0, lambda_star: float, tol: float = 1e-11):
    """Return ``(predicted, actual)`` squared errors of TV denoising ``y = f0``.

    Raises :class:`BetaminViolated` unless ``f0`` jumps only at ``inst.S``,
    alternates direction and each jump exceeds its threshold.
    """
    f0 = np.asarray(f0, dtype=float)
    if f0.shape != (inst.n,):
        raise InputError(f"f0 must have length {inst.n}")
    inc = np.diff(f0, prepend=0.0)
    S = list(inst.S)
    off = np.ones(inst.n, dtype=bool)
    off[0] = False
    off[S] = False
    if np.any(inc[off] != 0.0):
        raise InputError("f0 has jumps outside the instance's locations")
    jumps = inc[S]
    thr = tv_jump_thresholds(inst, lambda_star)
    z = np.sign(jumps[0]) * (-1.0) ** np.arange(inst.s)
    margin = z * jumps - thr
    report = {
        "locations": list(inst.locations),
        "jumps": jumps.tolist(),
        "thresholds": thr.tolist(),
        "signs": z.tolist(),
        "margin": float(margin.min()),
    }
    if jumps[0] == 0 or np.any(margin <= 0):
        k = int(np.argmin(margin))
        raise BetaminViolated(
            f"jump at location {inst.locations[k]} is {jumps[k]:.6g}; need sign {int(z[k]):+d}"
            f" and magnitude > {thr[k]:.6g}", report)
    predicted = inst.harmonic_sum() * lambda_star**2 / inst.n
    fit = tv_denoise(f0, lambda_star, tol)
    actual = float(np.sum((fit.f - f0) ** 2))
    return predicted, actual


def weighted_tv_kappa_sq(inst: TvInstance, w, tol: float = 1e-10) -> float:
    """``(s+1) min ||Xb||^2/n`` over ``sum_S w_j|b_j| - sum_C w_j|b_j| = 1``.

    Here the weights act on the jump coordinates as well (the first entry
    ``w_1`` is unused because ``b_1`` is free). Weights on ``S`` are absorbed
    by rescaling those design columns; a zero weight on ``S`` turns that
    coordinate into a free one.
    """
    n = inst.n
    w = np.asarray(w, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InputError(f"w must be a nonnegative length-{n} vector")
    X = tv_design(n).copy()
    S = [j for j in inst.S if w[j] > 0]
    free = [0] + [j for j in inst.S if w[j] == 0]
    if not S:
        return 0.0
    X[:, S] /= w[S]
    spec = CompatSpec(tuple(S), w, tuple(free))
    res = kappa_hat_sq(X, spec, tol)
    return (inst.s + 1) * res.value / spec.multiplier


def weighted_kappa_bound(inst: TvInstance, w, tol: float = 1e-10):
    """Return ``(lhs, rhs)`` of the weighted compatibility bound.

    ``lhs = sqrt(s+1)/kappa(w, S)`` and
    ``rhs = ||w||_inf sqrt(s+1)/kappa(S) + sqrt(n sum_i (w_i - w_{i-1})^2)``.
    """
    w = np.asarray(w, dtype=float)
    k_sq = weighted_tv_kappa_sq(inst, w, tol)
    if k_sq <= 1e-12:
        raise DegenerateKappa(f"weighted kappa^2 = {k_sq:.3g}")
    s1 = np.sqrt(inst.s + 1)
    lhs = s1 / np.sqrt(k_sq)
    rhs = (np.abs(w).max() * s1 / np.sqrt(tv_kappa_closed_form(inst))
           + np.sqrt(inst.n * np.sum(np.diff(w) ** 2)))
    return float(lhs), float(rhs)


def tv_anti_projection(inst: TvInstance) -> np.ndarray:
    """``v_i`` for the TV design with ``S_0 = S + {1}``, zero on ``S_0``."""
    S0 = (0,) + inst.S
    diag = anti_projection_diag(tv_design(inst.n), S0)
    return diag.v_full(inst.n)


def tv_vdiag_log_check(inst: TvInstance):
    """Return ``(sum_i (v_i - v_{i-1})^2 / ||v||_inf^2, (s+1) log n)``."""
    if inst.n < 4:
        raise InputError("n must be >= 4")
    v = tv_anti_projection(inst)
    ratio = float(np.sum(np.diff(v) ** 2) / np.max(v) ** 2)
    return ratio, (inst.s + 1) * float(np.log(inst.n))


def tv_upper_weights(inst: TvInstance, vbar) -> np.ndarray:
    """Weights ``1 - vbar_i`` off the jumps, 1 on the jumps and ``w_1 = w_2``."""
    vbar = np.asarray(vbar, dtype=float)
    if vbar.shape != (inst.n,):
        raise InputError(f"vbar must have length {inst.n}")
    w = 1.0 - vbar
    w[list(inst.S)] = 1.0
    w[0] = w[1]
    return w
