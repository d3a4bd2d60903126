"""Dense linear-algebra primitives, Gaussian design sampling and seeded streams."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NotPSD

JITTER_LADDER = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8)


def as_design(X) -> np.ndarray:
    """Validate and return ``X`` as a C-contiguous float64 ``(n, p)`` array."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise InputError(f"design must be a non-empty 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputError("design contains non-finite entries")
    return X


def gram(X) -> np.ndarray:
    """Return the normalised Gram matrix ``X^T X / n``."""
    X = as_design(X)
    G = X.T @ X / X.shape[0]
    return 0.5 * (G + G.T)


def cholesky_psd(M, jitter: float = 0.0) -> np.ndarray:
    """Lower-triangular ``L`` with ``L L^T = M + jitter I``.

    A plain factorisation is tried first. If it fails, jitter is escalated
    in decades from 1e-12 to 1e-8 (relative to ``max(1, max|M|)``).
    Use :func:`cholesky_psd_info` to learn which jitter was applied.
    """
    return cholesky_psd_info(M, jitter)[0]


def cholesky_psd_info(M, jitter: float = 0.0) -> tuple[np.ndarray, float]:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError(f"matrix must be square, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * scale:
        raise NotPSD("matrix is not symmetric")
    M = 0.5 * (M + M.T)
    eye = np.eye(M.shape[0])
    ladder = (jitter,) + tuple(j for j in JITTER_LADDER if j > jitter)
    for jit in ladder:
        try:
            L = np.linalg.cholesky(M + jit * scale * eye)
        except np.linalg.LinAlgError:
            continue
        return L, jit * scale
    raise NotPSD("Cholesky factorisation failed at jitter 1e-8")


@dataclass(frozen=True)
class CovarianceModel:
    """Population covariance of the Gaussian design rows."""

    sigma0: np.ndarray
    chol: np.ndarray
    lambda_max_sq: float
    max_entry: float
    jitter: float = 0.0

    @classmethod
    def from_sigma(cls, sigma0) -> "CovarianceModel":
        sigma0 = np.array(sigma0, dtype=np.float64)
        L, jit = cholesky_psd_info(sigma0)
        sigma0 = 0.5 * (sigma0 + sigma0.T)
        lam = float(np.linalg.eigvalsh(sigma0)[-1])
        sigma0.setflags(write=False)
        L.setflags(write=False)
        return cls(sigma0, L, lam, float(np.max(np.abs(sigma0))), jit)

    @classmethod
    def identity(cls, p: int) -> "CovarianceModel":
        return cls.from_sigma(np.eye(p))

    @classmethod
    def equicorrelated(cls, p: int, rho: float) -> "CovarianceModel":
        return cls.from_sigma((1 - rho) * np.eye(p) + rho * np.ones((p, p)))

    @property
    def p(self) -> int:
        return self.sigma0.shape[0]


@dataclass(frozen=True)
class Rng:
    """Seeded source of independent, reproducible sub-streams.

    ``stream(i)`` depends only on ``(seed, i)``, so replicate ``i`` draws the
    same numbers no matter which worker runs it or in which order.
    """

    seed: int
    _root: np.random.SeedSequence = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise InputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "_root", np.random.SeedSequence(int(self.seed)))

    def stream(self, *key: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self._root.entropy, spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.Philox(ss))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self._root))


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, Rng):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return Rng(int(rng)).generator()


def sample_gaussian_design(model: CovarianceModel, n: int, rng) -> np.ndarray:
    """Draw ``n`` i.i.d. rows ``chol @ z`` with ``z`` standard normal."""
    if n < 1:
        raise InputError("n must be >= 1")
    gen = _generator(rng)
    Z = gen.standard_normal((n, model.p))
    return np.ascontiguousarray(Z @ model.chol.T)
