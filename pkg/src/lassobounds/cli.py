"""Command-line front end.

Subcommands ``compat``, ``tv``, ``noiseless``, ``experiment`` and ``probe``
each write JSON (and CSV where there are per-replicate rows) into ``--out``.
Indices in files and on the command line are 1-based. Exit codes: 0 ok,
1 input/parse error, 2 degenerate math, 3 failed hypothesis, 4 betamin
violation.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .bounds import (ExperimentConfig, empirical_vs_theoretical_kappa, noisy_coupled_experiment,
                     probability_probes, random_design_experiment, variance_bound_experiment,
                     verify_noiseless_identity)
from .compat import CompatSpec, kappa_hat_sq, kappa_theoretical_sq, phi_hat_sq
from .core import CovarianceModel
from .errors import BetaminViolated, DegenerateKappa, InputError, LassoBoundsError
from .kernels import BACKEND
from .tv import (TvInstance, tv_bstar, tv_denoise, tv_design, tv_jump_thresholds,
                 tv_kappa_closed_form, tv_noiseless_error)

DEGENERATE_TOL = 1e-12
PROBE_KEYS = ("max", "chi", "inner", "concentration", "quadratic")


# ------------------------------------------------------------------ parsing


def _index_list(values, name, p=None):
    """1-based indices from JSON/CLI to a 0-based tuple."""
    if values is None:
        return ()
    if isinstance(values, (int, float)):
        values = [values]
    out = []
    for v in values:
        if isinstance(v, bool) or not float(v).is_integer():
            raise InputError(f"{name}: indices must be integers, got {v!r}")
        j = int(v)
        if j < 1 or (p is not None and j > p):
            raise InputError(f"{name}: index {j} out of range 1..{p if p is not None else 'p'}")
        out.append(j - 1)
    return tuple(out)


def _csv_ints(text, name):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"{name}: expected comma-separated integers, got {text!r}") from None


def parse_tv_tokens(tokens) -> TvInstance:
    """``["n=8", "d=4,4"]`` to a :class:`TvInstance`."""
    kv = {}
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep or key not in ("n", "d"):
            raise InputError(f"--tv expects n=<int> d=<int,...>, got {tok!r}")
        kv[key] = val
    if "d" not in kv:
        raise InputError("--tv needs d=<int,...>")
    d = _csv_ints(kv["d"], "d")
    n = int(kv["n"]) if "n" in kv else sum(d)
    return TvInstance(n, tuple(d))


def default_lambda_star(n: int) -> float:
    return math.sqrt(n * math.log(n))


def _out_dir(args) -> Path:
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise InputError(f"--out {out} exists and is not a directory")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----------------------------------------------------------------- commands


def cmd_compat(args) -> int:
    out = _out_dir(args)
    if args.tv:
        inst = parse_tv_tokens(args.tv)
        X = tv_design(inst.n)
        spec_in = {"S": list(inst.locations), "free": [1], "weights": 1.0, "kind": "kappa"}
    else:
        if not args.design or not args.spec:
            raise InputError("compat needs --design and --spec, or --tv")
        X = io.read_matrix_csv(args.design)
        spec_in = io.read_json(args.spec)
        if not isinstance(spec_in, dict):
            raise InputError(f"{args.spec}: expected a JSON object")
    unknown = set(spec_in) - {"S", "free", "weights", "kind", "u"}
    if unknown:
        raise InputError(f"spec: unknown keys {sorted(unknown)}")
    kind = spec_in.get("kind", "kappa")
    p = X.shape[1]
    S = _index_list(spec_in.get("S"), "S", p)
    free = _index_list(spec_in.get("free"), "free", p)
    weights = spec_in.get("weights", 1.0)
    result = {"kind": kind, "n": int(X.shape[0]), "p": int(p), "S": [j + 1 for j in S],
              "free": [j + 1 for j in free], "weights": weights}
    if kind == "phi":
        if "u" not in spec_in:
            raise InputError("spec: kind 'phi' needs u")
        value = phi_hat_sq(X, S, float(spec_in["u"]), args.tol)
        result.update({"u": float(spec_in["u"]), "value": value})
    elif kind in ("kappa", "theoretical"):
        spec = CompatSpec(S, np.asarray(weights, dtype=float), free)
        if kind == "theoretical":
            if X.shape[0] != p:
                raise InputError("theoretical: --design must be the square covariance matrix")
            res = kappa_theoretical_sq(CovarianceModel.from_sigma(X), spec, args.tol)
        else:
            res = kappa_hat_sq(X, spec, args.tol)
        result.update(res.to_dict())
        result["certified"] = res.certified
        value = res.value
    else:
        raise InputError(f"spec: unknown kind {kind!r}; expected kappa, phi or theoretical")
    io.write_json(out / "result.json", result)
    if value <= DEGENERATE_TOL:
        raise DegenerateKappa(f"compatibility constant is {value:.3g}")
    print(f"{kind} = {io.fmt(value)}")
    return 0


def _write_betamin(out, exc: BetaminViolated):
    io.write_json(out / "betamin.json", {"error": str(exc), "report": exc.report})


def cmd_tv(args) -> int:
    out = _out_dir(args)
    inst = TvInstance(args.n if args.n else sum(_csv_ints(args.d, "d")), tuple(_csv_ints(args.d, "d")))
    lam_star = args.lambda_star if args.lambda_star is not None else default_lambda_star(inst.n)
    res = kappa_hat_sq(tv_design(inst.n), CompatSpec(inst.S, 1.0, (0,)), args.tol)
    closed = tv_kappa_closed_form(inst)
    report = {
        "instance": inst.to_dict(),
        "locations": list(inst.locations),
        "s": inst.s,
        "harmonic_sum": inst.harmonic_sum(),
        "kappa_sq_closed_form": closed,
        "kappa_sq_engine": res.value,
        "relative_difference": abs(res.value - closed) / closed,
        "certificate_gap": res.certificate_gap,
        "bstar": tv_bstar(inst).tolist(),
        "lambda_star": lam_star,
        "jump_thresholds": tv_jump_thresholds(inst, lam_star).tolist(),
        "noiseless_error_sq": inst.harmonic_sum() * lam_star**2 / inst.n,
    }
    if args.signal:
        f0 = io.read_vector_csv(args.signal)
        try:
            predicted, actual = tv_noiseless_error(inst, f0, lam_star, min(args.tol, 1e-11))
        except BetaminViolated as exc:
            _write_betamin(out, exc)
            raise
        report["signal"] = {"predicted": predicted, "actual": actual,
                            "rel_err": abs(predicted - actual) / predicted if predicted else 0.0}
    if args.denoise:
        if args.lam is None:
            raise InputError("--denoise needs --lam")
        y = io.read_vector_csv(args.denoise)
        fit = tv_denoise(y, args.lam, args.tol)
        io.write_vector_csv(out / "fit.csv", fit.f)
        report["denoise"] = {"lam": args.lam, "tv": fit.tv, "kkt_residual": fit.solution.kkt_residual,
                             "sweeps": fit.solution.sweeps}
    io.write_json(out / "tv.json", report)
    print(f"kappa^2 closed form = {io.fmt(closed)}, engine = {io.fmt(res.value)}")
    return 0


def cmd_noiseless(args) -> int:
    out = _out_dir(args)
    X = io.read_matrix_csv(args.design)
    beta0 = io.read_vector_csv(args.beta0)
    if beta0.size != X.shape[1]:
        raise InputError(f"beta0 has length {beta0.size}, design has {X.shape[1]} columns")
    free = _index_list(_csv_ints(args.free, "free") if args.free else (), "free", X.shape[1])
    lam_star = args.lambda_star if args.lambda_star is not None else default_lambda_star(X.shape[0])
    if lam_star < 0:
        raise InputError("lambda* must be >= 0")
    try:
        lhs, rhs, rel = verify_noiseless_identity(X, beta0, lam_star, min(args.tol, 1e-11), free)
    except BetaminViolated as exc:
        _write_betamin(out, exc)
        raise
    io.write_json(out / "identity.json", {"lambda_star": lam_star, "n": int(X.shape[0]),
                                          "p": int(X.shape[1]), "free": [j + 1 for j in free],
                                          "lhs": lhs, "rhs": rhs, "rel_err": rel})
    print(f"lhs = {io.fmt(lhs)}, rhs = {io.fmt(rhs)}, rel_err = {rel:.3e}")
    return 0


def _config_from(args, extra=None) -> ExperimentConfig:
    data = io.load_config(args.config) if getattr(args, "config", None) else {}
    if not isinstance(data, dict):
        raise InputError("config must be a table/object")
    data = dict(data)
    data.update(extra or {})
    if args.seed is not None:
        data["seed"] = args.seed
    if args.replicates is not None:
        data["replicates"] = args.replicates
    try:
        return ExperimentConfig.from_mapping(data)
    except LassoBoundsError:
        raise
    except (TypeError, ValueError) as exc:
        raise InputError(f"config: {exc}") from None


def run_experiment(cfg: ExperimentConfig, tol: float):
    """Return ``(report_dict, trials)`` for a config."""
    if cfg.kind in ("noisy_lower", "noisy_upper", "noisy_coupled"):
        reps = noisy_coupled_experiment(cfg, tol)
        if cfg.kind == "noisy_coupled":
            main = reps["both"]
            report = {k: r.to_dict() for k, r in reps.items()}
            report["pass"] = all(r.passed for r in reps.values())
            return report, main.trials
        main = reps["lower" if cfg.kind == "noisy_lower" else "upper"]
        return main.to_dict(), main.trials
    if cfg.kind == "variance":
        rep = variance_bound_experiment(cfg, tol)
    elif cfg.kind == "random_design":
        rep = random_design_experiment(cfg, tol)
    elif cfg.kind == "kappa_compare":
        rep = empirical_vs_theoretical_kappa(cfg)
    else:
        reps = probability_probes(cfg)
        report = {k: r.to_dict() for k, r in reps.items()}
        report["pass"] = all(r.passed for r in reps.values() if r.passed is not None)
        return report, ()
    return rep.to_dict(), rep.trials


def _summary(report) -> str:
    if "coverage" in report:
        return f"{report['label']}: coverage {report['coverage']:.4f}, pass = {report['pass']}"
    parts = [f"{k}: {v['coverage']:.4f}" for k, v in report.items() if isinstance(v, dict)]
    return ", ".join(parts) + f"; pass = {report['pass']}"


def cmd_experiment(args) -> int:
    out = _out_dir(args)
    cfg = _config_from(args)
    report, trials = run_experiment(cfg, args.tol)
    if trials:
        io.atomic_write(out / "trials.csv", io.trials_to_csv(trials))
    io.write_json(out / "report.json", report)
    print(_summary(report))
    return 0


def cmd_probe(args) -> int:
    out = _out_dir(args)
    overrides = {"kind": "probes"}
    for key in ("n", "p", "t", "x", "s0", "rho", "inner"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    cfg = _config_from(args, overrides)
    lemmas = tuple(k.strip() for k in args.lemmas.split(",") if k.strip())
    bad = set(lemmas) - set(PROBE_KEYS)
    if bad:
        raise InputError(f"unknown probes {sorted(bad)}; expected {PROBE_KEYS}")
    reps = probability_probes(cfg, lemmas, args.replicates_inner)
    report = {k: r.to_dict() for k, r in reps.items()}
    report["pass"] = all(r.passed for r in reps.values() if r.passed is not None)
    io.write_json(out / "probes.json", report)
    for k, r in reps.items():
        print(f"{k}: violation {r.extra['violation_frequency']:.5f}, bound {r.extra['bound']}, "
              f"pass = {r.passed}")
    return 0


# --------------------------------------------------------------------- main


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory (default: .)")
    common.add_argument("--tol", type=_positive, default=None, help="solver tolerance")
    common.add_argument("--seed", type=_seed, default=None, help="unsigned 64-bit seed")
    common.add_argument("--replicates", type=int, default=None, help="Monte-Carlo replicates")

    ap = argparse.ArgumentParser(prog="lassobounds", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s 0.1.0 ({BACKEND} kernels)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compat", parents=[common], help="compatibility constant")
    p.add_argument("--design", help="headerless CSV design matrix (or covariance for 'theoretical')")
    p.add_argument("--spec", help="JSON: {S, free, weights, kind: kappa|phi|theoretical, u}")
    p.add_argument("--tv", nargs="+", metavar="KEY=VAL", help="TV instance, e.g. n=8 d=4,4")
    p.set_defaults(func=cmd_compat, default_tol=1e-10)

    p = sub.add_parser("tv", parents=[common], help="TV instance analysis and denoising")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--d", required=True, help="comma-separated distances")
    p.add_argument("--lambda-star", type=float, default=None, help="default sqrt(n log n)")
    p.add_argument("--signal", help="noiseless signal CSV for the exact error identity")
    p.add_argument("--denoise", help="observations CSV to denoise with --lam")
    p.add_argument("--lam", type=float, default=None)
    p.set_defaults(func=cmd_tv, default_tol=1e-10)

    p = sub.add_parser("noiseless", parents=[common], help="exact noiseless error identity")
    p.add_argument("--design", required=True)
    p.add_argument("--beta0", required=True, help="single-column CSV")
    p.add_argument("--lambda-star", type=float, default=None, help="default sqrt(n log n)")
    p.add_argument("--free", default=None, help="comma-separated 1-based unpenalized columns")
    p.set_defaults(func=cmd_noiseless, default_tol=1e-11)

    p = sub.add_parser("experiment", parents=[common], help="Monte-Carlo bound experiment")
    p.add_argument("config", help="TOML (or JSON) experiment config")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("probe", parents=[common], help="Gaussian tail probes")
    p.add_argument("--config", default=None)
    p.add_argument("--lemmas", default=",".join(PROBE_KEYS))
    p.add_argument("--replicates-inner", type=int, default=None,
                   help="replicates for the inner-product probe")
    for key, typ in (("n", int), ("p", int), ("t", float), ("x", float), ("s0", int),
                     ("rho", float), ("inner", int)):
        p.add_argument(f"--{key}", type=typ, default=None)
    p.set_defaults(func=cmd_probe)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.tol is None:
        args.tol = getattr(args, "default_tol", 1e-9)
    try:
        return args.func(args)
    except LassoBoundsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
