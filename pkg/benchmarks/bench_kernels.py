"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--p 50]

Each kernel runs on identical inputs under both backends; the table shows
best-of-``repeat`` wall time, the speedup and the largest output difference.
"""

import argparse
import time

import numpy as np

from lassobounds import _pykernels

try:
    from lassobounds import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None


def _best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cd_case(n, p, seed):
    gen = np.random.default_rng(seed)
    X = gen.standard_normal((n, p))
    y = X[:, :3] @ np.array([3.0, -2.0, 1.5]) + gen.standard_normal(n)
    G = np.ascontiguousarray(X.T @ X)
    c = X.T @ y
    lam = 0.2 * np.abs(c).max()
    pen = np.full(p, lam)

    def run(mod):
        beta = np.zeros(p)
        r = c.copy()
        mod.cd_sweeps(G, pen, beta, r, 200, 0.0)
        return beta

    return run


def _refine_case(p, seed):
    gen = np.random.default_rng(seed)
    X = gen.standard_normal((3 * p, p))
    G = np.ascontiguousarray(X.T @ X)
    s_mask = np.zeros(p, dtype=bool)
    s_mask[: max(1, p // 2)] = True
    w = np.ones(p)
    b0 = np.where(s_mask, 1.0 / s_mask.sum(), 0.0)

    def run(mod):
        b = b0.copy()
        return np.array([mod.refine_ratio(G, s_mask, w, b, 40, 0.25)])

    return run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--p", type=int, default=50)
    ap.add_argument("--refine-p", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; nothing to compare")
        return 1
    cases = [
        (f"cd_sweeps n={args.n} p={args.p} x200", _cd_case(args.n, args.p, args.seed)),
        (f"refine_ratio p={args.refine_p} x40", _refine_case(args.refine_p, args.seed)),
    ]
    print(f"{'kernel':<32} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8} {'max diff':>10}")
    for name, run in cases:
        tp, op = _best_time(lambda: run(_pykernels), args.repeat)
        tc, oc = _best_time(lambda: run(_ckernels), args.repeat)
        diff = float(np.max(np.abs(op - oc)))
        print(f"{name:<32} {tp:>11.4f} {tc:>11.4f} {tp / tc:>7.1f}x {diff:>10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
