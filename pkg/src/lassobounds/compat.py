"""Compatibility constants by sign enumeration over convex QPs.

For an index set ``S``, complement weights ``w`` and an optional set ``F``
of free coordinates (present in the quadratic form, absent from both
penalty terms) the empirical constant is

    kappa^2(w, S) = (|S| + |F|) * min { ||X b||^2 / n :
                                        ||b_S||_1 - ||W b_C||_1 = 1 }

where ``C`` is everything outside ``S`` and ``F``. With ``F`` empty the
multiplier is the usual ``|S|``; with the total-variation free intercept it
is ``s + 1``, which is what makes the closed forms in :mod:`lassobounds.tv`
come out right.

The non-convex equality is handled by fixing the signs ``z_S`` of ``b_S``
(``z_j b_j >= 0``), relaxing the equality to ``>= 1`` and minimising over
all ``2^(|S|-1)`` sign patterns (``b -> -b`` pairs the rest).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .core import CovarianceModel, _generator, as_design
from .errors import CapExceeded, DegenerateKappa, InfeasibleSpec, InputError
from .qp import solve_qp

MAX_S = 20
CERT_TOL = 1e-6


@dataclass(frozen=True)
class CompatSpec:
    """A compatibility query. ``S`` and ``free`` are 0-based index tuples.

    ``weights`` may be a scalar ``u`` (the constant ``kappa(u, S)``), a
    vector over the complement in increasing index order, or a full
    length-``p`` vector whose entries on ``S`` and ``free`` are ignored.
    """

    S: tuple
    weights: object = 1.0
    free: tuple = ()
    matrix_kind: str = "empirical"

    def __post_init__(self):
        S = tuple(sorted({int(j) for j in self.S}))
        F = tuple(sorted({int(j) for j in self.free}))
        if not S:
            raise InfeasibleSpec("S must be nonempty")
        if set(S) & set(F):
            raise InputError("S and free must be disjoint")
        if self.matrix_kind not in ("empirical", "theoretical"):
            raise InputError(f"unknown matrix_kind {self.matrix_kind!r}")
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InputError("weights must be finite and nonnegative")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "free", F)

    def complement(self, p: int) -> np.ndarray:
        taken = set(self.S) | set(self.free)
        return np.array([j for j in range(p) if j not in taken], dtype=int)

    def weight_vector(self, p: int) -> np.ndarray:
        """Full length-``p`` weights, zero on ``S`` and ``free``."""
        if self.S[-1] >= p or (self.free and self.free[-1] >= p):
            raise InputError(f"index out of range for p={p}")
        C = self.complement(p)
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        out = np.zeros(p)
        if w.size == 1:
            out[C] = w[0]
        elif w.size == C.size:
            out[C] = w
        elif w.size == p:
            out[C] = w[C]
        else:
            raise InputError(f"weights must be scalar, length {C.size} or length {p}")
        return out

    @property
    def multiplier(self) -> int:
        return len(self.S) + len(self.free)


@dataclass(frozen=True)
class CompatResult:
    value: float
    minimizer: np.ndarray
    signs: tuple
    certificate_gap: float | None
    subproblem_count: int
    dual: np.ndarray = field(repr=False, default=None)
    spec: CompatSpec = field(repr=False, default=None)

    @property
    def certified(self) -> bool:
        return self.certificate_gap is None or self.certificate_gap <= CERT_TOL

    def to_dict(self, one_based: bool = True) -> dict:
        return {
            "value": float(self.value),
            "signs": [int(z) for z in self.signs],
            "minimizer": [float(v) for v in self.minimizer],
            "certificate_gap": None if self.certificate_gap is None else float(self.certificate_gap),
            "subproblem_count": int(self.subproblem_count),
        }


@dataclass(frozen=True)
class QpSubproblem:
    """One sign-fixed piece: ``min ||Xb||^2`` s.t. ``z'b_S - ||W b_C||_1 >= 1``.

    With ``sign_constrained`` the signs are also enforced (``z_j b_j >= 0``).
    ``complement_cap`` adds ``||b_C||_1 <= cap``; ``ell1_radius`` adds
    ``||b_S||_1 + ||b_C||_1 <= radius`` (only meaningful when sign
    constrained and ``free`` is empty).
    """

    X: np.ndarray
    S: tuple
    signs: tuple
    weights: np.ndarray
    free: tuple = ()
    sign_constrained: bool = True
    complement_cap: float | None = None
    ell1_radius: float | None = None


def _layout(p, S, F):
    taken = set(S) | set(F)
    C = np.array([j for j in range(p) if j not in taken], dtype=int)
    return np.asarray(S, dtype=int), C, np.asarray(F, dtype=int)


def _solve_sub(G, S, C, F, z, w, sign_constrained=True, complement_cap=None,
               ell1_radius=None, tol=1e-10):
    """Split-variable QP. Returns ``(||Xb||^2, b)`` with ``b`` rescaled to the equality."""
    p = G.shape[0]
    s, c, f = S.size, C.size, F.size
    m = s + 2 * c + f
    M = np.zeros((p, m))
    M[S, np.arange(s)] = z if sign_constrained else 1.0
    M[C, s + np.arange(c)] = 1.0
    M[C, s + c + np.arange(c)] = -1.0
    M[F, s + 2 * c + np.arange(f)] = 1.0
    H = 2.0 * M.T @ G @ M
    H = 0.5 * (H + H.T)
    wc = w[C]
    rows, rhs = [], []
    main = np.zeros(m)
    main[:s] = 1.0 if sign_constrained else z
    main[s:s + c] = -wc
    main[s + c:s + 2 * c] = -wc
    rows.append(main)
    rhs.append(1.0)
    if complement_cap is not None:
        r = np.zeros(m)
        r[s:s + 2 * c] = -1.0
        rows.append(r)
        rhs.append(-float(complement_cap))
    if ell1_radius is not None:
        r = np.zeros(m)
        r[:s + 2 * c] = -1.0
        rows.append(r)
        rhs.append(-float(ell1_radius))
    nonneg = np.zeros(m, dtype=bool)
    nonneg[s:s + 2 * c] = True
    if sign_constrained:
        nonneg[:s] = True
    x0 = np.zeros(m)
    x0[:s] = 1.0 / s if sign_constrained else z / s
    res = solve_qp(H, None, np.array(rows), np.array(rhs), nonneg, x0, tol=tol)
    b = M @ res.x
    lhs = np.abs(b[S]).sum() - (wc * np.abs(b[C])).sum()
    if lhs > 0:
        b = b / lhs
    return float(b @ G @ b), b


def solve_qp_subproblem(sub: QpSubproblem, tol: float = 1e-10):
    """Solve one sign-fixed subproblem; returns ``(min ||Xb||^2, b)``."""
    if tol <= 0:
        raise InputError("tol must be > 0")
    X = as_design(sub.X)
    p = X.shape[1]
    S, C, F = _layout(p, sub.S, sub.free)
    z = np.asarray(sub.signs, dtype=float)
    if z.shape != (S.size,) or not np.all(np.abs(z) == 1):
        raise InputError("signs must be a +/-1 vector over S")
    w = np.zeros(p)
    wv = np.atleast_1d(np.asarray(sub.weights, dtype=float))
    w[C] = wv[0] if wv.size == 1 else (wv[C] if wv.size == p else wv)
    return _solve_sub(X.T @ X, S, C, F, z, w, sub.sign_constrained, sub.complement_cap,
                      sub.ell1_radius, tol)


def lagrangian_certificate(G, b, S, C, F, w):
    """Dual vector ``z*`` and relative gap of ``G b = z* (b'Gb)``.

    ``z*`` carries the signs of ``b`` on ``S``, ``-w_j sign(b_j)`` on the
    complement where ``b_j != 0`` (otherwise the clipped ratio
    ``(Gb)_j / b'Gb``), and 0 on free coordinates. Returns ``(z*, None)``
    when ``b'Gb = 0``.
    """
    Gb = G @ b
    q = float(b @ Gb)
    zs = np.zeros_like(b)
    zs[S] = np.sign(b[S])
    if q <= 0:
        return zs, None
    bc = b[C]
    ratio = Gb[C] / q
    zs[C] = np.where(bc != 0, -w[C] * np.sign(bc), np.clip(ratio, -w[C], w[C]))
    top = float(np.abs(Gb).max())
    return zs, float(np.abs(Gb - zs * q).max() / top)


def sign_pattern_solutions(G, spec: CompatSpec, tol=1e-10, **extra):
    """All ``2^(|S|-1)`` sign-fixed optima as ``(||Xb||^2, b, z)`` in enumeration order."""
    p = G.shape[0]
    S, C, F = _layout(p, spec.S, spec.free)
    if S.size > MAX_S:
        raise CapExceeded(f"|S| = {S.size} exceeds the enumeration cap {MAX_S}")
    w = spec.weight_vector(p)
    out = []
    for tail in itertools.product((1.0, -1.0), repeat=S.size - 1):
        z = np.array((1.0,) + tail)
        q, b = _solve_sub(G, S, C, F, z, w, tol=tol, **extra)
        out.append((q, b, z))
    return out


def _enumerate(G, n, spec: CompatSpec, tol, **extra):
    sols = sign_pattern_solutions(G, spec, tol, **extra)
    best = sols[0]
    for cand in sols[1:]:
        if cand[0] < best[0] * (1.0 - 1e-12):
            best = cand
    q, b, z = best
    S, C, F = _layout(G.shape[0], spec.S, spec.free)
    return spec.multiplier * q / n, b, z, len(sols), (S, C, F, spec.weight_vector(G.shape[0]))


def _compat(G, n, spec, tol):
    value, b, z, count, (S, C, F, w) = _enumerate(G, n, spec, tol)
    zs, gap = lagrangian_certificate(G, b, S, C, F, w)
    signs = tuple(int(v) for v in np.where(b[S] != 0, np.sign(b[S]), z))
    return CompatResult(value, b, signs, gap, count, zs, spec)


def kappa_hat_sq(X, spec: CompatSpec, tol: float = 1e-10) -> CompatResult:
    """Empirical compatibility constant with minimizer and dual certificate."""
    if tol <= 0:
        raise InputError("tol must be > 0")
    X = as_design(X)
    G = X.T @ X
    return _compat(0.5 * (G + G.T), X.shape[0], replace(spec, matrix_kind="empirical"), tol)


def kappa_theoretical_sq(model: CovarianceModel, spec: CompatSpec,
                         tol: float = 1e-10) -> CompatResult:
    """Population constant ``mult * min b' Sigma0 b`` over the same constraint set."""
    if tol <= 0:
        raise InputError("tol must be > 0")
    G = np.array(model.sigma0, dtype=float)
    return _compat(G, 1, replace(spec, matrix_kind="theoretical"), tol)


def phi_hat_sq(X, S, u: float, tol: float = 1e-10) -> float:
    """``|S| min ||Xb||^2/n`` over ``||b_S||_1 = 1``, ``||b_{-S}||_1 <= 1/u``."""
    if u <= 0:
        raise InputError("u must be > 0")
    X = as_design(X)
    G = X.T @ X
    spec = CompatSpec(tuple(S), 0.0)
    value, *_ = _enumerate(G, X.shape[0], spec, tol, complement_cap=1.0 / u)
    return value


def cone_bound_check(X, S, u: float, v: float, tol: float = 1e-10):
    """Return ``(kappa^2(v, S), restricted_min)``.

    ``restricted_min`` is the ``u``-constant computed with the extra
    constraint ``||b||_1 <= 1 + (1+u)/(v-u)``; the first should never be
    below the second.
    """
    if not v > u > 0:
        raise InputError("need v > u > 0")
    X = as_design(X)
    kv = kappa_hat_sq(X, CompatSpec(tuple(S), v), tol).value
    G = X.T @ X
    radius = 1.0 + (1.0 + u) / (v - u)
    restricted, *_ = _enumerate(G, X.shape[0], CompatSpec(tuple(S), u), tol,
                                ell1_radius=radius)
    return kv, restricted


def ell1_bound_check(X, S, u: float, tol: float = 1e-10):
    """Return ``(||b*_S||_1, bound)`` for the unit-weight minimizer ``b*``."""
    if not 0 <= u < 1:
        raise InputError("need 0 <= u < 1")
    one = kappa_hat_sq(X, CompatSpec(tuple(S), 1.0), tol)
    ku_sq = kappa_hat_sq(X, CompatSpec(tuple(S), u), tol).value
    if ku_sq <= 1e-12:
        raise DegenerateKappa(f"kappa^2(u={u}, S) = {ku_sq:.3g}")
    k1, ku = np.sqrt(one.value), np.sqrt(ku_sq)
    lhs = float(np.abs(one.minimizer[list(one.spec.S)]).sum())
    return lhs, float((k1 - u * ku) / ((1 - u) * ku))


def _profile_free(G, F, R):
    """Schur complement eliminating the free coordinates."""
    if F.size == 0:
        return G[np.ix_(R, R)]
    GFF = G[np.ix_(F, F)]
    GRF = G[np.ix_(R, F)]
    return G[np.ix_(R, R)] - GRF @ np.linalg.pinv(GFF) @ GRF.T


def brute_force_compat(X, spec: CompatSpec, samples: int = 1_000_000, rng=0,
                       passes: int = 200, keep: int = 8, chunk: int = 100_000) -> float:
    """Random-search upper estimate of the compatibility constant.

    Draws ``b_S`` as random signs times Dirichlet magnitudes and ``b_C`` from
    a Laplace cloud of log-uniform scale (with a share of exact zeros), scores
    ``b'Gb / c(b)^2`` for ``c(b) = ||b_S||_1 - ||W b_C||_1``, then polishes the
    ``keep`` best draws by golden-section line searches. Independent of the
    QP engine, so it serves as a test oracle.
    """
    X = as_design(X)
    n, p = X.shape
    if p > 8:
        raise InputError("brute_force_compat is meant for p <= 8")
    gen = _generator(rng)
    G = X.T @ X
    S, C, F = _layout(p, spec.S, spec.free)
    R = np.concatenate([S, C])
    Gr = np.ascontiguousarray(_profile_free(0.5 * (G + G.T), F, R))
    w = spec.weight_vector(p)[R]
    s_mask = np.zeros(R.size, dtype=bool)
    s_mask[: S.size] = True
    pool_b, pool_r = [], []
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        done += m
        B = np.zeros((m, R.size))
        mags = gen.dirichlet(np.ones(S.size), size=m) if S.size > 1 else np.ones((m, 1))
        B[:, : S.size] = mags * gen.choice((-1.0, 1.0), size=(m, S.size))
        if C.size:
            scale = np.exp(gen.uniform(np.log(1e-4), 0.0, size=(m, 1))) / C.size
            bc = gen.laplace(0.0, 1.0, size=(m, C.size)) * scale
            bc[gen.random((m, C.size)) < 0.3] = 0.0
            bc[gen.random(m) < 0.2] = 0.0
            B[:, S.size:] = bc
        r = kernels.ratio_batch(Gr, s_mask, w, B)
        top = np.argsort(r, kind="stable")[:keep]
        pool_b.extend(B[top])
        pool_r.extend(r[top])
    order = np.argsort(pool_r, kind="stable")[:keep]
    best = np.inf
    for i in order:
        b = np.array(pool_b[i], dtype=float)
        if not np.isfinite(pool_r[i]):
            continue
        cval = np.abs(b[s_mask]).sum() - (w[~s_mask] * np.abs(b[~s_mask])).sum()
        b /= cval
        best = min(best, kernels.refine_ratio(Gr, s_mask, w, b, passes, 0.25))
    return float(spec.multiplier * best / n)
