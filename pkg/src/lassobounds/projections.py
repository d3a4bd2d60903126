"""Projection diagnostics for noisy bounds: ``v_j``, ``u_j`` and ``||P_S eps||``.

Everything goes through a Householder QR of ``X_S`` so that ill-conditioned
designs (the TV design in particular) do not square their condition number.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_design
from .errors import InputError, RankDeficient

RANK_TOL = 1e-10


@dataclass(frozen=True)
class ProjectionDiag:
    """Anti-projection and inverse-Gram diagonals for an index set ``S``.

    ``v_sq`` is aligned with ``complement`` and ``u_sq`` with ``S`` (both
    0-based). ``u_sq`` is ``None`` when ``X_S`` is rank deficient.
    """

    S: tuple
    complement: np.ndarray
    v_sq: np.ndarray
    u_sq: np.ndarray | None
    rank_ok: bool

    @property
    def v(self) -> np.ndarray:
        return np.sqrt(self.v_sq)

    @property
    def u(self) -> np.ndarray:
        if self.u_sq is None:
            raise RankDeficient("X_S is rank deficient; u_j is not defined")
        return np.sqrt(self.u_sq)

    def v_full(self, p: int) -> np.ndarray:
        """Length-``p`` vector of ``v_j`` with zeros on ``S``."""
        out = np.zeros(p)
        out[self.complement] = self.v
        return out

    def to_dict(self) -> dict:
        return {
            "S": [j + 1 for j in self.S],
            "rank_ok": self.rank_ok,
            "v_sq": {str(j + 1): float(v) for j, v in zip(self.complement, self.v_sq)},
            "u_sq": None if self.u_sq is None
            else {str(j + 1): float(u) for j, u in zip(self.S, self.u_sq)},
        }


def _factor(X, S):
    X = as_design(X)
    S = tuple(sorted({int(j) for j in S}))
    if not S or S[0] < 0 or S[-1] >= X.shape[1]:
        raise InputError(f"S must be a nonempty subset of 0..{X.shape[1] - 1}")
    XS = X[:, S]
    Q, R = np.linalg.qr(XS)
    scale = max(float(np.abs(XS).max()), np.finfo(float).tiny)
    rank_ok = XS.shape[1] <= XS.shape[0] and bool(np.all(np.abs(np.diag(R)) > RANK_TOL * scale))
    return X, S, XS, Q, R, rank_ok


def _range_basis(XS, Q, R, rank_ok):
    """Orthonormal basis of the column space of ``X_S``."""
    if rank_ok:
        return Q
    U, sv, _ = np.linalg.svd(XS, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        return np.zeros((XS.shape[0], 0))
    keep = sv > RANK_TOL * sv[0] * max(XS.shape)
    return U[:, keep]


def anti_projection_diag(X, S) -> ProjectionDiag:
    """``v_j^2 = ||X_j - P_S X_j||^2`` for ``j`` outside ``S`` and ``diag (X_S'X_S)^{-1}``."""
    X, S, XS, Q, R, rank_ok = _factor(X, S)
    B = _range_basis(XS, Q, R, rank_ok)
    comp = np.array([j for j in range(X.shape[1]) if j not in set(S)], dtype=int)
    XC = X[:, comp]
    resid = XC - B @ (B.T @ XC)
    v_sq = np.einsum("ij,ij->j", resid, resid)
    u_sq = None
    if rank_ok:
        Rinv = np.linalg.solve(R, np.eye(R.shape[0]))
        u_sq = np.einsum("ij,ij->i", Rinv, Rinv)
    return ProjectionDiag(S, comp, v_sq, u_sq, rank_ok)


def noise_projection_norm(X, S, eps) -> float:
    """``||P_S eps||_2`` for the orthogonal projection onto span ``X_S``."""
    X, S, XS, Q, R, rank_ok = _factor(X, S)
    if not rank_ok:
        raise RankDeficient("X_S is rank deficient")
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (X.shape[0],):
        raise InputError(f"eps must have length {X.shape[0]}")
    return float(np.linalg.norm(Q.T @ eps))


def irrepresentable_check(X, S, vbar=0.0):
    """Return ``(max_j ||gamma_j||_1, holds)`` with ``gamma_j = (X_S'X_S)^{-1} X_S' X_j``.

    ``holds`` is true when ``||gamma_j||_1 <= 1 - vbar_j`` for every ``j``
    outside ``S``; ``vbar`` is a scalar or a vector over the complement.
    """
    X, S, XS, Q, R, rank_ok = _factor(X, S)
    if not rank_ok:
        raise RankDeficient("X_S is rank deficient")
    comp = [j for j in range(X.shape[1]) if j not in set(S)]
    if not comp:
        return 0.0, True
    gamma = np.linalg.solve(R, Q.T @ X[:, comp])
    norms = np.abs(gamma).sum(axis=0)
    vb = np.broadcast_to(np.asarray(vbar, dtype=float), norms.shape)
    return float(norms.max()), bool(np.all(norms <= 1.0 - vb + 1e-12))
