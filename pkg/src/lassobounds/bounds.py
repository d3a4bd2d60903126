"""Betamin checks, the exact noiseless identity and Monte-Carlo bound checks.

Fixed-design experiments share one noise stream per replicate index, so
the lower and upper bounds are evaluated on the same draws and their
conjunction can be reported alongside each one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .compat import (CompatSpec, _layout, _solve_sub, kappa_hat_sq, kappa_theoretical_sq,
                     sign_pattern_solutions)
from .core import CovarianceModel, Rng, as_design, sample_gaussian_design
from .errors import (BetaminViolated, DegenerateKappa, HypothesisFailed, InputError,
                     RankDeficient)
from .lasso import solve_gram, solve_lasso, solve_noiseless, solve_population_noiseless
from .projections import anti_projection_diag, noise_projection_norm
from .tv import TvInstance, tv_design, tv_penalty_mask

TIE_RTOL = 1e-9
SAFETY = 2.0
CORNER_CAP = 12
INTERIOR_DRAWS = 256


# --------------------------------------------------------------------------- betamin


@dataclass(frozen=True)
class BetaminReport:
    S0: tuple
    thresholds: dict
    signs: dict
    satisfied: bool
    margin: float
    kappa_sq: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "S0": [j + 1 for j in self.S0],
            "thresholds": {str(j + 1): float(v) for j, v in self.thresholds.items()},
            "signs": {str(j + 1): int(v) for j, v in self.signs.items()},
            "satisfied": bool(self.satisfied),
            "margin": float(self.margin),
            "kappa_sq": float(self.kappa_sq),
        }


def _active(beta0, free):
    beta0 = np.asarray(beta0, dtype=float)
    fr = set(free)
    return tuple(int(j) for j in np.flatnonzero(beta0) if j not in fr)


def _minimizer_candidates(G, spec, tol):
    """Every minimizer over sign patterns (ties within ``TIE_RTOL``) and its negation."""
    sols = sign_pattern_solutions(G, spec, tol)
    qmin = min(q for q, _, _ in sols)
    out = []
    for q, b, _ in sols:
        if q <= qmin * (1.0 + TIE_RTOL) + 1e-300:
            out.extend([(q, b), (q, -b)])
    return qmin, out


def _betamin(G, n, beta0, lam, free, tol):
    beta0 = np.asarray(beta0, dtype=float)
    S0 = _active(beta0, free)
    if not S0:
        raise InputError("beta0 has no active (penalized, nonzero) coordinates")
    spec = CompatSpec(S0, 1.0, tuple(free))
    qmin, cands = _minimizer_candidates(G, spec, tol)
    kappa_sq = spec.multiplier * qmin / n
    if kappa_sq <= 1e-12:
        raise DegenerateKappa(f"compatibility constant is {kappa_sq:.3g} on S0")
    idx = list(S0)
    target = np.sign(beta0[idx])
    best = None
    for q, b in cands:
        z = np.sign(b[idx])
        thr = np.abs(b[idx]) * lam / q
        ok = bool(np.all(z == target) and np.all(np.abs(beta0[idx]) > thr))
        score = (ok, int(np.sum(z == target)))
        if best is None or score > best[0]:
            best = (score, z, thr)
    (ok, _), z, thr = best
    margin = float(np.min(np.abs(beta0[idx]) - thr))
    return BetaminReport(S0, dict(zip(S0, thr.tolist())), dict(zip(S0, z.astype(int).tolist())),
                         ok and margin > 0, margin, kappa_sq)


def betamin_noiseless(X, beta0, lambda_star, free=(), tol=1e-10) -> BetaminReport:
    """Betamin condition for the noiseless fixed-design Lasso.

    Thresholds are ``|b*_j| s0 / kappa^2(S0) * lambda*/n`` for a minimizer
    ``b*`` of the unit-weight compatibility problem. When several
    minimizers exist (sign flips or tied patterns) the one whose signs match
    ``beta0`` is used.
    """
    X = as_design(X)
    return _betamin(X.T @ X, X.shape[0], beta0, float(lambda_star), free, tol)


def betamin_population(model: CovarianceModel, beta0, lam, n, tol=1e-10) -> BetaminReport:
    """Betamin condition for the population noiseless Lasso (thresholds ``|b*_j| lam/(n b*'Sigma b*)``)."""
    G = np.array(model.sigma0, dtype=float)
    rep = _betamin(G, 1, beta0, float(lam) / n, (), tol)
    return rep


def construct_betamin_beta0(X, S0, lambda_star, margin=2.0, free=(), tol=1e-10) -> np.ndarray:
    """``beta0_j = margin * threshold_j * z*_j`` on ``S0``, zero elsewhere."""
    if not margin > 1:
        raise InputError("margin must be > 1")
    if not lambda_star > 0:
        raise InputError("lambda_star must be > 0 to define thresholds")
    X = as_design(X)
    res = kappa_hat_sq(X, CompatSpec(tuple(S0), 1.0, tuple(free)), tol)
    if res.value <= 1e-12:
        raise DegenerateKappa(f"compatibility constant is {res.value:.3g} on S0")
    b = res.minimizer
    q = float(np.sum((X @ b) ** 2))
    beta0 = np.zeros(X.shape[1])
    idx = list(res.spec.S)
    beta0[idx] = margin * np.abs(b[idx]) * lambda_star / q * np.sign(b[idx])
    return beta0


def verify_noiseless_identity(X, beta0, lambda_star, tol=1e-11, free=()):
    """Return ``(lhs, rhs, rel_err)`` for the exact noiseless prediction error.

    ``lhs = ||X(beta* - beta0)||^2`` from the solver and
    ``rhs = s0 lambda*^2 / (n kappa^2(S0))``.
    """
    X = as_design(X)
    beta0 = np.asarray(beta0, dtype=float)
    n, p = X.shape
    if lambda_star == 0:
        return 0.0, 0.0, 0.0
    rep = betamin_noiseless(X, beta0, lambda_star, free)
    if not rep.satisfied:
        raise BetaminViolated("betamin condition fails", rep.to_dict())
    mask = np.ones(p, dtype=bool)
    mask[list(free)] = False
    sol = solve_noiseless(X, beta0, lambda_star, penalty_mask=mask, tol=tol)
    lhs = float(np.sum((X @ (sol.beta - beta0)) ** 2))
    s_eff = len(rep.S0) + len(free)
    rhs = s_eff * lambda_star**2 / (n * rep.kappa_sq)
    return lhs, rhs, abs(lhs - rhs) / rhs


# ---------------------------------------------------------------- reports & config


@dataclass(frozen=True)
class TrialRecord:
    replicate: int
    measured: float
    bound: float
    held: bool
    lam: float
    kappa: float
    U: float
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        out = {"replicate": self.replicate, "measured": self.measured, "bound": self.bound,
               "held": int(self.held), "lambda": self.lam, "kappa": self.kappa, "U": self.U}
        for k in sorted(self.extra):
            out[k] = self.extra[k]
        return out


@dataclass(frozen=True)
class BoundReport:
    label: str
    formula: str
    replicates: int
    coverage: float
    nominal: float | None
    slack: float | None
    passed: bool | None
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    trials: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "formula": self.formula,
            "replicates": self.replicates,
            "coverage": self.coverage,
            "nominal": self.nominal,
            "slack": self.slack,
            "pass": self.passed,
            "config": self.config,
            "extra": self.extra,
        }


def binomial_slack(nominal: float, R: int) -> float:
    return 3.0 * math.sqrt(max(nominal * (1.0 - nominal), 0.0) / R)


def _report(label, formula, held, nominal, cfg, extra=None, trials=(), assert_pass=True):
    R = len(held)
    cov = float(np.mean(held)) if R else float("nan")
    slack = binomial_slack(nominal, R) if nominal is not None else None
    passed = None
    if assert_pass and nominal is not None:
        passed = bool(cov >= nominal - slack)
    return BoundReport(label, formula, R, cov, nominal, slack, passed,
                       cfg.to_dict() if cfg is not None else {}, extra or {}, tuple(trials))


KINDS = ("noisy_lower", "noisy_upper", "noisy_coupled", "variance", "random_design",
         "kappa_compare", "probes")
DESIGNS = ("tv", "identity", "gaussian", "csv")


@dataclass(frozen=True)
class ExperimentConfig:
    """Experiment settings. Index sets here are 0-based; files use 1-based."""

    kind: str = "noisy_coupled"
    design: str = "tv"
    n: int = 32
    p: int | None = None
    d: tuple = (16, 16)
    support: tuple | None = None
    s0: int = 1
    beta0: tuple | None = None
    jump: float | None = None
    margin: float = 1.5
    t: float = 2.0
    x: float = 2.0
    lambda_mult: float = 1.01
    lam: float | None = None
    lambda_star: float = 0.0
    rho: float = 0.0
    u: float = 0.5
    v: float = 1.0
    eta: tuple = (0.1, 0.25, 0.5)
    dominance: float = 0.5
    design_path: str | None = None
    replicates: int = 1000
    inner: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.design not in DESIGNS:
            raise InputError(f"unknown design {self.design!r}; expected one of {DESIGNS}")
        if not self.t > 0 or not self.x > 0:
            raise InputError("t and x must be > 0")
        if int(self.replicates) < 1:
            raise InputError("replicates must be >= 1")
        if self.n < 1:
            raise InputError("n must be >= 1")
        if self.lambda_star < 0:
            raise InputError("lambda_star must be >= 0")
        if self.kind == "kappa_compare" and not self.v > self.u > 0:
            raise InputError("kappa_compare needs v > u > 0")
        object.__setattr__(self, "d", tuple(int(k) for k in self.d))
        object.__setattr__(self, "eta", tuple(float(e) for e in self.eta))
        for name in ("support", "beta0"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, tuple(val))
        Rng(self.seed)

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        if data.get("support") is not None:
            sup = [int(j) for j in data["support"]]
            if any(j < 1 for j in sup):
                raise InputError("support indices are 1-based")
            data["support"] = tuple(j - 1 for j in sup)
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["d"] = list(self.d)
        out["eta"] = list(self.eta)
        if self.support is not None:
            out["support"] = [j + 1 for j in self.support]
        if self.beta0 is not None:
            out["beta0"] = list(self.beta0)
        return out

    @property
    def root(self) -> Rng:
        return Rng(self.seed)


# ------------------------------------------------------------- fixed-design setup


@dataclass(frozen=True)
class FixedDesign:
    """A fixed design with its active set and the noise-scale bookkeeping.

    ``S`` holds the penalized active coordinates and ``free`` the unpenalized
    ones; projections use ``S_eff = S + free`` because the free coordinates
    are always fitted.
    """

    X: np.ndarray
    S: tuple
    free: tuple
    mask: np.ndarray
    inst: TvInstance | None = None

    @property
    def S_eff(self) -> tuple:
        return tuple(sorted(self.S + self.free))

    @property
    def s_eff(self) -> int:
        return len(self.S) + len(self.free)


def load_design(cfg: ExperimentConfig) -> FixedDesign:
    if cfg.design == "tv":
        inst = TvInstance(cfg.n, cfg.d)
        return FixedDesign(tv_design(cfg.n), inst.S, (0,), tv_penalty_mask(cfg.n), inst)
    p = cfg.p or cfg.n
    if cfg.design == "identity":
        if p != cfg.n:
            raise InputError("identity design needs p == n")
        X = math.sqrt(cfg.n) * np.eye(cfg.n)
    elif cfg.design == "gaussian":
        model = CovarianceModel.equicorrelated(p, cfg.rho)
        X = sample_gaussian_design(model, cfg.n, cfg.root.stream(2**31, 0))
    else:
        from .io import read_matrix_csv
        if not cfg.design_path:
            raise InputError("design = 'csv' needs design_path")
        X = read_matrix_csv(cfg.design_path)
        if X.shape[0] != cfg.n:
            raise InputError(f"design has {X.shape[0]} rows but n = {cfg.n}")
        p = X.shape[1]
    S = cfg.support if cfg.support is not None else tuple(range(cfg.s0))
    if not S or max(S) >= p:
        raise InputError(f"support out of range for p = {p}")
    return FixedDesign(X, tuple(sorted(S)), (), np.ones(p, dtype=bool), None)


def lambda_rule(vmax: float, p: int, t: float) -> float:
    """Smallest admissible tuning parameter ``||v_{-S}||_inf sqrt(2(log 2p + t))``."""
    return vmax * math.sqrt(2.0 * (math.log(2 * p) + t))


@dataclass(frozen=True)
class NoiseScales:
    lam: float
    floor: float
    vbar: np.ndarray
    ubar: np.ndarray
    C: np.ndarray


def noise_scales(fd: FixedDesign, t: float, lambda_mult: float = 1.01,
                 lam: float | None = None) -> NoiseScales:
    """Tuning parameter and the normalised scales ``vbar`` (complement) and ``ubar`` (on ``S``)."""
    n, p = fd.X.shape
    diag = anti_projection_diag(fd.X, fd.S_eff)
    if not diag.rank_ok:
        raise RankDeficient("X restricted to the active set is rank deficient")
    root = math.sqrt(2.0 * (math.log(2 * p) + t))
    vmax = float(diag.v.max()) if diag.v.size else 0.0
    floor = lambda_rule(vmax, p, t)
    if lam is None:
        if not lambda_mult > 1:
            raise InputError("lambda_mult must be > 1")
        lam = lambda_mult * floor
    elif not lam > floor:
        raise InputError(f"lambda = {lam:.6g} does not exceed the admissible floor {floor:.6g}")
    vbar = np.zeros(p)
    vbar[diag.complement] = diag.v * root / lam
    u_full = np.zeros(p)
    u_full[list(diag.S)] = diag.u * root / lam
    return NoiseScales(float(lam), floor, vbar, u_full[list(fd.S)], diag.complement)


def bold_b(fd: FixedDesign, vbar: np.ndarray, zstar: np.ndarray, rng: np.random.Generator,
           corners: int = CORNER_CAP, draws: int = INTERIOR_DRAWS, tol=1e-10) -> np.ndarray:
    """Lower estimate of ``max_w |b_j(w)| / ||X b(w)||^2`` over the weight box.

    ``b(w)`` minimises ``||Xb||^2`` subject to ``z*'b_S - ||W b_C||_1 >= 1``
    with ``1 - vbar <= w <= 1 + vbar``. The box is probed at the
    ``2^corners`` corners over the complement coordinates closest to ``S``
    (others held at ``1 - vbar``) plus ``draws`` uniform interior points.
    """
    X = fd.X
    G = X.T @ X
    p = G.shape[0]
    S, C, F = _layout(p, fd.S, fd.free)
    lo = 1.0 - vbar
    hi = 1.0 + vbar
    if C.size:
        dist = np.min(np.abs(C[:, None] - S[None, :]), axis=1)
        near = C[np.argsort(dist, kind="stable")[: min(corners, C.size)]]
    else:
        near = C
    weights = []
    for bits in itertools.product((0, 1), repeat=near.size):
        w = lo.copy()
        w[near] = np.where(np.array(bits, dtype=bool), hi[near], lo[near])
        weights.append(w)
    for _ in range(draws):
        weights.append(lo + rng.random(p) * (hi - lo))
    best = np.zeros(S.size)
    for w in weights:
        w = w.copy()
        w[S] = 0.0
        w[F] = 0.0
        q, b = _solve_sub(G, S, C, F, zstar, w, sign_constrained=False, tol=tol)
        if q <= 0:
            raise DegenerateKappa("weighted compatibility vanishes inside the weight box")
        best = np.maximum(best, np.abs(b[S]) / q)
    return best


@dataclass(frozen=True)
class NoisySetup:
    fd: FixedDesign
    scales: NoiseScales
    beta0: np.ndarray
    kappa_lower: float
    kappa_upper: float
    zstar: np.ndarray
    thresholds: np.ndarray


def _beta0_for(cfg, fd, scales, zstar, thresholds):
    p = fd.X.shape[1]
    idx = list(fd.S)
    if cfg.beta0 is not None:
        beta0 = np.asarray(cfg.beta0, dtype=float)
        if beta0.shape != (p,):
            raise InputError(f"beta0 must have length {p}")
        return beta0
    beta0 = np.zeros(p)
    if cfg.jump is not None:
        beta0[idx] = float(cfg.jump) * zstar
    else:
        beta0[idx] = cfg.margin * thresholds * zstar
    return beta0


def noisy_setup(cfg: ExperimentConfig, check_betamin: bool = True) -> NoisySetup:
    fd = load_design(cfg)
    n, p = fd.X.shape
    sc = noise_scales(fd, cfg.t, cfg.lambda_mult, cfg.lam)
    w_hi = 1.0 + sc.vbar
    w_lo = 1.0 - sc.vbar
    res_hi = kappa_hat_sq(fd.X, CompatSpec(fd.S, w_hi, fd.free))
    res_lo = kappa_hat_sq(fd.X, CompatSpec(fd.S, w_lo, fd.free))
    if res_hi.value <= 1e-12 or res_lo.value <= 1e-12:
        raise DegenerateKappa("weighted compatibility constant vanishes")
    zstar = np.sign(res_hi.minimizer[list(fd.S)])
    bb = bold_b(fd, sc.vbar, zstar, cfg.root.stream(2**31, 1))
    thresholds = SAFETY * sc.lam * (bb + sc.ubar)
    beta0 = _beta0_for(cfg, fd, sc, zstar, thresholds)
    if check_betamin:
        idx = list(fd.S)
        active = _active(beta0, fd.free)
        sgn = np.sign(beta0[idx])
        flip = -1.0 if np.all(sgn == -zstar) else 1.0
        margin = np.abs(beta0[idx]) - thresholds
        if set(active) != set(fd.S) or not np.all(sgn == flip * zstar) or np.any(margin <= 0):
            report = {
                "S0": [j + 1 for j in fd.S],
                "thresholds": {str(j + 1): float(v) for j, v in zip(idx, thresholds)},
                "signs": {str(j + 1): int(flip * z) for j, z in zip(idx, zstar)},
                "satisfied": False,
                "margin": float(margin.min()),
            }
            raise BetaminViolated("beta0 fails the noisy betamin condition "
                                  "(safety factor included)", report)
    return NoisySetup(fd, sc, beta0, res_hi.value, res_lo.value, zstar, thresholds)


LOWER_FORMULA = "||X(bhat - b0)||_2 >= sqrt(s/kappa^2(1+vbar,S)) * lam/sqrt(n) - sqrt(s) - sqrt(2x)"
UPPER_FORMULA = "||X(bhat - b0)||_2 <= sqrt(s/kappa^2(1-vbar,S)) * lam/sqrt(n) + sqrt(s) + sqrt(2x)"


def _solve_replicate(fd, y, lam, tol):
    X = fd.X
    return solve_gram(X.T @ X, X.T @ y, float(y @ y), lam, fd.mask, tol)


def noisy_coupled_experiment(cfg: ExperimentConfig, tol: float = 1e-9) -> dict:
    """Lower, upper and joint coverage from one set of replicates.

    Returns ``{"lower": BoundReport, "upper": BoundReport, "both": BoundReport}``.
    """
    st = noisy_setup(cfg)
    fd, sc = st.fd, st.scales
    X = fd.X
    n = X.shape[0]
    s = fd.s_eff
    lower = math.sqrt(s / st.kappa_lower) * sc.lam / math.sqrt(n) - math.sqrt(s) - math.sqrt(2 * cfg.x)
    upper = math.sqrt(s / st.kappa_upper) * sc.lam / math.sqrt(n) + math.sqrt(s) + math.sqrt(2 * cfg.x)
    mean = X @ st.beta0
    root = cfg.root
    rec_lo, rec_up, rec_both = [], [], []
    for r in range(cfg.replicates):
        eps = root.stream(r).standard_normal(n)
        sol = _solve_replicate(fd, mean + eps, sc.lam, tol)
        err = float(np.linalg.norm(X @ (sol.beta - st.beta0)))
        U = noise_projection_norm(X, fd.S_eff, eps)
        hl, hu = err >= lower, err <= upper
        rec_lo.append(TrialRecord(r, err, lower, hl, sc.lam, st.kappa_lower, U))
        rec_up.append(TrialRecord(r, err, upper, hu, sc.lam, st.kappa_upper, U))
        rec_both.append(TrialRecord(r, err, lower, hl and hu, sc.lam, st.kappa_lower, U,
                                    {"bound_upper": upper, "held_lower": int(hl),
                                     "held_upper": int(hu), "kappa_upper": st.kappa_upper}))
    nominal = 1.0 - math.exp(-cfg.t) - math.exp(-cfg.x)
    extra = {"lambda": sc.lam, "lambda_floor": sc.floor, "s_eff": s,
             "kappa_sq_lower": st.kappa_lower, "kappa_sq_upper": st.kappa_upper,
             "lower_bound": lower, "upper_bound": upper, "lower_trivial": lower <= 0,
             "vbar_max": float(sc.vbar.max()), "beta0": st.beta0.tolist(),
             "betamin_thresholds": st.thresholds.tolist()}
    return {
        "lower": _report("noisy_lower", LOWER_FORMULA, [t.held for t in rec_lo], nominal, cfg,
                         extra, rec_lo),
        "upper": _report("noisy_upper", UPPER_FORMULA, [t.held for t in rec_up], nominal, cfg,
                         extra, rec_up),
        "both": _report("noisy_coupled", LOWER_FORMULA + " and " + UPPER_FORMULA,
                        [t.held for t in rec_both], nominal, cfg, extra, rec_both),
    }


def noisy_lower_experiment(cfg: ExperimentConfig, tol: float = 1e-9) -> BoundReport:
    return noisy_coupled_experiment(cfg, tol)["lower"]


def noisy_upper_experiment(cfg: ExperimentConfig, tol: float = 1e-9) -> BoundReport:
    return noisy_coupled_experiment(cfg, tol)["upper"]


VARIANCE_FORMULA = ("||X(bhat - b*)||_2 <= sqrt(s/kappa^2(wbar,S)) * (lam - lam*)/sqrt(n)"
                    " + sqrt(s) + sqrt(2x)")


def variance_bound_experiment(cfg: ExperimentConfig, tol: float = 1e-9) -> BoundReport:
    """Coverage of the bound on ``||X(bhat - b*)||`` for noiseless tuning ``lambda* <= lambda``.

    ``S`` is the configured support (plus free coordinates). The strictness
    hypothesis ``lambda*|zeta*_j|/lambda < 1 - vbar_j`` off ``S`` is checked
    and raises :class:`HypothesisFailed` when violated.
    """
    st = noisy_setup(cfg, check_betamin=False)
    fd, sc = st.fd, st.scales
    X = fd.X
    n, p = X.shape
    lam, lam_star = sc.lam, float(cfg.lambda_star)
    if lam_star > lam:
        raise HypothesisFailed("lambda* <= lambda", f"lambda* = {lam_star:.6g} > lambda = {lam:.6g}")
    if lam_star == 0:
        bstar = st.beta0.copy()
        zeta = np.zeros(p)
    else:
        sol = solve_noiseless(X, st.beta0, lam_star, penalty_mask=fd.mask, tol=1e-11)
        bstar, zeta = sol.beta, sol.zeta
    C = sc.C
    ratio = lam_star * np.abs(zeta[C]) / lam
    room = 1.0 - sc.vbar[C]
    if np.any(ratio >= room):
        j = int(C[np.argmax(ratio - room)])
        raise HypothesisFailed(
            "lambda* |zeta*_j| / lambda < 1 - vbar_j for all j outside S",
            f"fails at coordinate {j + 1}: {ratio.max():.6g} >= {room[np.argmax(ratio - room)]:.6g}")
    s = fd.s_eff
    if lam_star == lam:
        kappa = float("inf")
        bound = math.sqrt(s) + math.sqrt(2 * cfg.x)
    else:
        w = np.zeros(p)
        w[C] = (room - ratio) / (1.0 - lam_star / lam)
        kappa = kappa_hat_sq(X, CompatSpec(fd.S, w, fd.free)).value
        if kappa <= 1e-12:
            raise DegenerateKappa("weighted compatibility constant vanishes")
        bound = (math.sqrt(s / kappa) * (lam - lam_star) / math.sqrt(n)
                 + math.sqrt(s) + math.sqrt(2 * cfg.x))
    mean = X @ st.beta0
    root = cfg.root
    trials = []
    for r in range(cfg.replicates):
        eps = root.stream(r).standard_normal(n)
        sol = _solve_replicate(fd, mean + eps, lam, tol)
        err = float(np.linalg.norm(X @ (sol.beta - bstar)))
        U = noise_projection_norm(X, fd.S_eff, eps)
        trials.append(TrialRecord(r, err, bound, err <= bound, lam, kappa, U))
    nominal = 1.0 - math.exp(-cfg.t) - math.exp(-cfg.x)
    extra = {"lambda": lam, "lambda_star": lam_star, "s_eff": s, "kappa_sq": kappa,
             "bias": float(np.linalg.norm(X @ (bstar - st.beta0)))}
    formula = "||X(bhat - b*)||_2 <= sqrt(s) + sqrt(2x)" if lam_star == lam else VARIANCE_FORMULA
    return _report("variance", formula, [t.held for t in trials], nominal, cfg, extra, trials)


# ------------------------------------------------------------------ random design


def theoretical_lambda(model: CovarianceModel, n: int, t: float) -> float:
    """Lower end of the random-design tuning window."""
    L = math.log(2 * model.p) + t
    return 3.0 * math.sqrt(model.max_entry) * (math.sqrt(2 * n * L) + 2 * L)


def rho_squared(model: CovarianceModel, S0, n: int, exhaustive_cap: int = 8, rng=None):
    """``max_S (||Sigma||_inf / kappa^2(S)) log(2p) |S| / n`` over the admissible sizes.

    Exact enumeration for ``p <= exhaustive_cap``; otherwise nested prefixes
    of a random ordering plus ``S0`` (a lower estimate). Returns
    ``(rho_sq, exact)``.
    """
    p = model.p
    k0 = kappa_theoretical_sq(model, CompatSpec(tuple(S0))).value
    if k0 <= 1e-12:
        raise DegenerateKappa("theoretical compatibility vanishes on S0")
    size_cap = min(p, int(math.floor(model.lambda_max_sq / k0 * 4 * len(S0) + 1e-12)))
    exact = p <= exhaustive_cap
    if exact:
        family = [c for k in range(1, size_cap + 1) for c in itertools.combinations(range(p), k)]
    else:
        gen = rng if rng is not None else np.random.default_rng(0)
        order = gen.permutation(p)
        family = [tuple(sorted(order[:k])) for k in range(1, size_cap + 1)] + [tuple(S0)]
    best = 0.0
    for S in family:
        k = kappa_theoretical_sq(model, CompatSpec(S)).value
        val = math.inf if k <= 0 else model.max_entry / k * math.log(2 * p) * len(S) / n
        best = max(best, val)
    return best, exact


def random_design_gamma(model: CovarianceModel, n: int, lam: float, rho: float) -> float:
    p = model.p
    return (2.0 * math.sqrt(model.lambda_max_sq) * math.sqrt(n) / lam
            + 2.0 / math.sqrt(model.max_entry) * rho * lam / math.sqrt(n * math.log(2 * p)))


def in_asymptotic_regime(model: CovarianceModel, rho_sq: float) -> bool:
    return (model.lambda_max_sq / model.max_entry <= 0.5 * math.log(2 * model.p)
            and rho_sq <= 0.5)


RANDOM_FORMULA = ("| ||X(bhat - b0)||_2 - sqrt(n)||Sigma^(1/2)(b* - b0)||_2 | <= "
                  "(gamma + sqrt(2 log n / n)) sqrt(n)||Sigma^(1/2)(b* - b0)||_2"
                  " + 4 sqrt(log 2) + sqrt(2x)")


def random_design_experiment(cfg: ExperimentConfig, tol: float = 1e-9) -> BoundReport:
    """Deviation of the noisy error from the population bias over random designs.

    Also reports the fraction of replicates in which the deviation is at
    most ``cfg.dominance`` times the bias.
    """
    p = cfg.p or 4
    n = cfg.n
    model = CovarianceModel.equicorrelated(p, cfg.rho) if cfg.rho else CovarianceModel.identity(p)
    lam = cfg.lam if cfg.lam is not None else theoretical_lambda(model, n, cfg.t)
    S0 = cfg.support if cfg.support is not None else tuple(range(cfg.s0))
    if cfg.beta0 is not None:
        beta0 = np.asarray(cfg.beta0, dtype=float)
    else:
        res = kappa_theoretical_sq(model, CompatSpec(tuple(S0)))
        b = res.minimizer
        q = float(b @ model.sigma0 @ b)
        beta0 = np.zeros(p)
        beta0[list(S0)] = cfg.margin * np.abs(b[list(S0)]) * lam / (n * q) * np.sign(b[list(S0)])
    rep = betamin_population(model, beta0, lam, n)
    if not rep.satisfied:
        raise BetaminViolated("beta0 fails the population betamin condition", rep.to_dict())
    star = solve_population_noiseless(model, n, beta0, lam, tol=1e-12)
    diff = star.beta - beta0
    bias = math.sqrt(n * float(diff @ model.sigma0 @ diff))
    rho_sq, exact = rho_squared(model, rep.S0, n, rng=cfg.root.stream(2**31, 2))
    gamma = random_design_gamma(model, n, lam, math.sqrt(rho_sq))
    slack_n = math.sqrt(2 * math.log(n) / n)
    bound = (gamma + slack_n) * bias + 4 * math.sqrt(math.log(2)) + math.sqrt(2 * cfg.x)
    root = cfg.root
    trials, dominated = [], []
    for r in range(cfg.replicates):
        X = sample_gaussian_design(model, n, root.stream(r, 0))
        eps = root.stream(r, 1).standard_normal(n)
        sol = solve_lasso(X, X @ beta0 + eps, lam, tol=tol)
        meas = float(np.linalg.norm(X @ (sol.beta - beta0)))
        dev = abs(meas - bias)
        dominated.append(dev <= cfg.dominance * bias)
        trials.append(TrialRecord(r, meas, bound, dev <= bound, lam, rep.kappa_sq, float("nan"),
                                  {"deviation": dev, "dominated": int(dominated[-1])}))
    regime = in_asymptotic_regime(model, rho_sq)
    nominal = 1.0 - 2.0 * math.exp(-cfg.x)
    extra = {"lambda": lam, "bias": bias, "gamma": gamma, "rho_sq": rho_sq, "rho_exact": exact,
             "in_regime": regime, "dominance_ratio": cfg.dominance,
             "dominance_fraction": float(np.mean(dominated)), "beta_star": star.beta.tolist(),
             "beta0": beta0.tolist()}
    return _report("random_design", RANDOM_FORMULA, [t.held for t in trials], nominal, cfg,
                   extra, trials, assert_pass=regime)


def empirical_vs_theoretical_kappa(cfg: ExperimentConfig) -> BoundReport:
    """Frequency of ``kappa_hat^2(v,S) >= (1-eta)^2 kappa^2(u,S)`` over sampled designs.

    ``coverage`` is the frequency for the middle ``eta`` of the grid; all
    frequencies are in ``extra``. Nothing is asserted.
    """
    if not cfg.v > cfg.u > 0:
        raise InputError("need v > u > 0")
    p = cfg.p or 4
    model = CovarianceModel.equicorrelated(p, cfg.rho) if cfg.rho else CovarianceModel.identity(p)
    S = cfg.support if cfg.support is not None else tuple(range(cfg.s0))
    k_theory = kappa_theoretical_sq(model, CompatSpec(tuple(S), cfg.u)).value
    root = cfg.root
    values, trials = [], []
    for r in range(cfg.replicates):
        X = sample_gaussian_design(model, cfg.n, root.stream(r, 0))
        val = kappa_hat_sq(X, CompatSpec(tuple(S), cfg.v)).value
        values.append(val)
    values = np.array(values)
    freqs = {str(e): float(np.mean(values >= (1 - e) ** 2 * k_theory)) for e in cfg.eta}
    mid = cfg.eta[len(cfg.eta) // 2]
    held = values >= (1 - mid) ** 2 * k_theory
    for r, val in enumerate(values):
        trials.append(TrialRecord(r, float(val), (1 - mid) ** 2 * k_theory, bool(held[r]),
                                  float("nan"), k_theory, float("nan")))
    extra = {"kappa_theoretical_sq": k_theory, "frequencies": freqs, "eta": mid}
    return _report("kappa_compare", "kappa_hat^2(v,S) >= (1-eta)^2 kappa^2(u,S)", list(held),
                   None, cfg, extra, trials, assert_pass=False)


# --------------------------------------------------------------------- probes


def _probe_report(label, formula, violations, bound, cfg, extra=None, assert_pass=True):
    held = ~np.asarray(violations, dtype=bool)
    nominal = max(0.0, 1.0 - bound) if bound is not None else None
    R = held.size
    cov = float(held.mean())
    slack = binomial_slack(min(bound, 1.0), R) if bound is not None else None
    passed = None
    if assert_pass and bound is not None:
        passed = bool(1.0 - cov <= bound + slack)
    ex = {"violation_frequency": 1.0 - cov, "bound": bound}
    ex.update(extra or {})
    return BoundReport(label, formula, R, cov, nominal, slack, passed, cfg.to_dict(), ex)


def probe_max_gaussian(R, p, t, gen):
    Z = np.abs(gen.standard_normal((R, p))).max(axis=1)
    return Z >= math.sqrt(2 * (math.log(2 * p) + t)), math.exp(-t)


def probe_chi_norm(R, T, x, gen):
    Z = np.linalg.norm(gen.standard_normal((R, T)), axis=1)
    return Z >= math.sqrt(T) + math.sqrt(2 * x), math.exp(-x)


def probe_inner_product(R, n, t, gen, su=1.0, sv=1.0, suv=0.0, chunk=10_000):
    cov = np.array([[su**2, suv], [suv, sv**2]])
    L = np.linalg.cholesky(cov)
    out = []
    for start in range(0, R, chunk):
        m = min(chunk, R - start)
        W = gen.standard_normal((m, n, 2)) @ L.T
        dev = np.abs(np.einsum("ij,ij->i", W[..., 0], W[..., 1]) - n * suv)
        out.append(dev > 3 * su * sv * (math.sqrt(2 * n * t) + t))
    return np.concatenate(out), 4.0 * math.exp(-t)


def probe_quadratic_form(R, n, model: CovarianceModel, eta, gen):
    """Minimum generalised eigenvalue of ``(X'X/n, Sigma)``, the infimum when ``M >= sqrt(p / lambda_min)``."""
    Linv = np.linalg.inv(model.chol)
    mins = np.empty(R)
    for r in range(R):
        X = sample_gaussian_design(model, n, gen)
        A = Linv @ (X.T @ X / n) @ Linv.T
        mins[r] = np.linalg.eigvalsh(0.5 * (A + A.T))[0]
    return mins < (1 - eta) ** 2, mins


def probe_concentration(R, inner, X, b, lam, x, stream):
    """Nested Monte Carlo: ``m_b`` is estimated from ``inner`` independent draws.

    ``stream(*key)`` must return an independent generator per key.
    """
    n = X.shape[0]
    G = X.T @ X
    mean = X @ b

    def err(gen):
        y = mean + gen.standard_normal(n)
        sol = solve_gram(G, X.T @ y, float(y @ y), lam)
        return float(np.linalg.norm(X @ (sol.beta - b)))

    m_hat = float(np.mean([err(stream(1, k)) for k in range(inner)]))
    errs = np.array([err(stream(2, r)) for r in range(R)])
    return errs >= m_hat + math.sqrt(2 * x), math.exp(-x), m_hat


def probability_probes(cfg: ExperimentConfig, lemmas=("max", "chi", "inner", "concentration",
                                                       "quadratic"), replicates_inner=None) -> dict:
    """Monte-Carlo violation frequencies of the Gaussian tail tools.

    Keys: ``max`` (max of ``p`` normals), ``chi`` (norm of ``T = s0``
    normals), ``inner`` (bivariate inner product with ``n`` rows), ``concentration``
    (approximate, nested mean), ``quadratic`` (restricted-eigenvalue
    infimum, reported only).
    """
    root = cfg.root
    R = cfg.replicates
    p = cfg.p or cfg.n
    out = {}
    if "max" in lemmas:
        viol, bound = probe_max_gaussian(R, p, cfg.t, root.stream(10))
        out["max"] = _probe_report("probe_max", "P(max_j |Z_j| >= sqrt(2(log 2p + t))) <= exp(-t)",
                                   viol, bound, cfg, {"p": p})
    if "chi" in lemmas:
        T = cfg.s0
        viol, bound = probe_chi_norm(R, T, cfg.x, root.stream(11))
        out["chi"] = _probe_report("probe_chi", "P(||Z||_2 >= sqrt(T) + sqrt(2x)) <= exp(-x)",
                                   viol, bound, cfg, {"T": T})
    if "inner" in lemmas:
        Ri = replicates_inner or R
        viol, bound = probe_inner_product(Ri, cfg.n, cfg.t, root.stream(12), suv=cfg.rho)
        out["inner"] = _probe_report(
            "probe_inner", "P(|U'V - n s_uv| > 3 s_u s_v (sqrt(2nt) + t)) <= 4 exp(-t)",
            viol, bound, cfg, {"n": cfg.n, "replicates": Ri})
    if "concentration" in lemmas:
        gen = root.stream(13)
        pp = cfg.p or 4
        X = gen.standard_normal((cfg.n, pp))
        b = np.zeros(pp)
        b[: cfg.s0] = 3.0
        lam = math.sqrt(2 * cfg.n * (math.log(2 * pp) + cfg.t))
        Rc = min(R, 2000)
        viol, bound, m_hat = probe_concentration(Rc, cfg.inner, X, b, lam, cfg.x,
                                                 lambda *k: root.stream(13, *k))
        out["concentration"] = _probe_report(
            "probe_concentration", "P(||X(bhat - b)||_2 >= m_b + sqrt(2x)) <= exp(-x)",
            viol, bound, cfg, {"approximate": True, "m_b_estimate": m_hat, "inner": cfg.inner,
                               "replicates": Rc})
    if "quadratic" in lemmas:
        pp = cfg.p or 4
        model = CovarianceModel.equicorrelated(pp, cfg.rho) if cfg.rho else CovarianceModel.identity(pp)
        eta = cfg.eta[len(cfg.eta) // 2]
        Rq = min(R, 2000)
        viol, mins = probe_quadratic_form(Rq, cfg.n, model, eta, root.stream(14))
        out["quadratic"] = _probe_report(
            "probe_quadratic", "inf over the unrestricted cone of ||Xb||^2/n / b'Sigma b >= (1-eta)^2",
            viol, None, cfg, {"eta": eta, "min_ratio_mean": float(mins.mean()),
                              "M_unrestricted": math.sqrt(pp / float(np.linalg.eigvalsh(model.sigma0)[0])),
                              "replicates": Rq}, assert_pass=False)
    return out

