import math
from dataclasses import replace

import numpy as np
import pytest

from lassobounds.bounds import (BoundReport, ExperimentConfig, TrialRecord, betamin_noiseless,
                                betamin_population, binomial_slack, construct_betamin_beta0,
                                empirical_vs_theoretical_kappa, in_asymptotic_regime,
                                lambda_rule, load_design, noise_scales, noisy_coupled_experiment,
                                noisy_setup, probability_probes, probe_chi_norm,
                                probe_inner_product, probe_max_gaussian, random_design_experiment,
                                rho_squared, variance_bound_experiment, verify_noiseless_identity)
from lassobounds.core import CovarianceModel
from lassobounds.errors import BetaminViolated, HypothesisFailed, InputError
from lassobounds.tv import TvInstance, tv_design

X3 = np.sqrt(3) * np.eye(3)


def test_betamin_examples():
    rep = betamin_noiseless(X3, [2.0, 0, 0], 3.0)
    assert rep.thresholds[0] == pytest.approx(1.0)
    assert rep.signs[0] == 1 and rep.satisfied
    assert rep.kappa_sq == pytest.approx(1.0)
    assert not betamin_noiseless(X3, [0.5, 0, 0], 3.0).satisfied
    neg = betamin_noiseless(X3, [-2.0, 0, 0], 3.0)
    assert neg.satisfied and neg.signs[0] == -1
    assert neg.to_dict()["S0"] == [1]


def test_betamin_population_examples():
    model = CovarianceModel.identity(3)
    rep = betamin_population(model, [2.0, 0, 0], 3.0, 3)
    assert rep.thresholds[0] == pytest.approx(1.0) and rep.satisfied
    big = betamin_population(model, [20.0, 0, 0], 3.0, 3)
    assert big.margin == pytest.approx(rep.margin + 18.0)
    zero = betamin_population(model, [0.01, 0, -0.2], 0.0, 3)
    assert zero.satisfied and all(v == 0 for v in zero.thresholds.values())


def test_construct_beta0_examples():
    n = 4
    X = np.sqrt(n) * np.eye(n)
    b0 = construct_betamin_beta0(X, (0, 2), 1.5, margin=2.0)
    # kappa^2 = 1 and the minimizer is +-1/2 on S with ||Xb||^2 = n/2
    thr = 0.5 * 1.5 / (n / 2)
    assert np.abs(b0[[0, 2]]) == pytest.approx([2 * thr, 2 * thr])
    assert b0[1] == 0 and b0[3] == 0
    gen = np.random.default_rng(0)
    X = gen.standard_normal((20, 6))
    b0 = construct_betamin_beta0(X, (1, 4), 2.0, margin=1.0001)
    rep = betamin_noiseless(X, b0, 2.0)
    assert rep.satisfied and 0 < rep.margin < 1e-3


def test_verify_identity_examples():
    lhs, rhs, rel = verify_noiseless_identity(X3, [2.0, 0, 0], 3.0)
    assert lhs == pytest.approx(3.0) and rhs == pytest.approx(3.0) and rel <= 1e-9
    inst = TvInstance(8, (4, 4))
    beta0 = np.zeros(8)
    beta0[4] = 10.0
    beta0[0] = 1.0
    lhs, rhs, rel = verify_noiseless_identity(tv_design(8), beta0, 1.0, free=(0,))
    assert lhs == pytest.approx(0.5, rel=1e-6) and rhs == pytest.approx(0.5) and rel <= 1e-6
    assert inst.harmonic_sum() / 8 == pytest.approx(rhs)
    gen = np.random.default_rng(1)
    X = gen.standard_normal((15, 5))
    b0 = construct_betamin_beta0(X, (0, 3), 1.0)
    assert verify_noiseless_identity(X, b0, 1.0)[2] <= 1e-6
    assert verify_noiseless_identity(X, b0, 0.0) == (0.0, 0.0, 0.0)
    with pytest.raises(BetaminViolated) as info:
        verify_noiseless_identity(X3, [0.5, 0, 0], 3.0)
    assert info.value.report["satisfied"] is False


def test_binomial_slack_and_records():
    assert binomial_slack(0.5, 100) == pytest.approx(0.15)
    rec = TrialRecord(3, 1.0, 2.0, True, 0.5, 0.25, 0.1, {"z": 1})
    assert list(rec.row()) == ["replicate", "measured", "bound", "held", "lambda", "kappa", "U", "z"]
    rep = BoundReport("x", "f", 1, 1.0, 0.5, 0.1, True)
    assert rep.to_dict()["pass"] is True


def test_config_validation():
    with pytest.raises(InputError):
        ExperimentConfig(replicates=0)
    with pytest.raises(InputError):
        ExperimentConfig(kind="nope")
    with pytest.raises(InputError):
        ExperimentConfig.from_mapping({"bogus": 1})
    with pytest.raises(InputError):
        ExperimentConfig.from_mapping({"support": [0]})
    cfg = ExperimentConfig.from_mapping({"design": "identity", "n": 8, "support": [1, 3]})
    assert cfg.support == (0, 2)
    assert cfg.to_dict()["support"] == [1, 3]


def test_load_design_variants():
    fd = load_design(ExperimentConfig())
    assert fd.S == (16,) and fd.free == (0,) and fd.S_eff == (0, 16) and fd.s_eff == 2
    fd = load_design(ExperimentConfig(design="identity", n=6, s0=2))
    assert np.allclose(fd.X, np.sqrt(6) * np.eye(6)) and fd.S == (0, 1)
    a = load_design(ExperimentConfig(design="gaussian", n=20, p=5, seed=4)).X
    b = load_design(ExperimentConfig(design="gaussian", n=20, p=5, seed=4)).X
    assert np.array_equal(a, b)
    with pytest.raises(InputError):
        load_design(ExperimentConfig(design="identity", n=4, p=5))


def test_noise_scales_lambda_floor():
    fd = load_design(ExperimentConfig(design="identity", n=16, s0=2))
    sc = noise_scales(fd, 2.0)
    assert sc.floor == pytest.approx(lambda_rule(4.0, 16, 2.0))
    assert sc.lam == pytest.approx(1.01 * sc.floor)
    assert sc.vbar[2:] == pytest.approx(np.full(14, 1 / 1.01))
    with pytest.raises(InputError):
        noise_scales(fd, 2.0, lam=0.9 * sc.floor)
    with pytest.raises(InputError):
        noisy_setup(ExperimentConfig(design="identity", n=16, s0=2, lam=sc.floor * 0.5))


def test_noisy_setup_betamin_guard():
    cfg = ExperimentConfig(design="identity", n=16, s0=2, jump=0.1, replicates=5)
    with pytest.raises(BetaminViolated):
        noisy_setup(cfg)


def test_identity_coupled_coverage():
    cfg = ExperimentConfig(kind="noisy_coupled", design="identity", n=16, s0=2, replicates=300)
    reps = noisy_coupled_experiment(cfg)
    nominal = 1 - 2 * math.exp(-2)
    assert reps["upper"].coverage >= nominal - 0.05
    assert reps["lower"].coverage >= nominal - 0.05
    assert reps["both"].passed
    # the joint event implies each marginal
    assert reps["both"].coverage <= min(reps["lower"].coverage, reps["upper"].coverage)


def test_large_x_and_huge_jumps():
    base = ExperimentConfig(kind="noisy_coupled", design="identity", n=16, s0=2, replicates=200)
    big_x = noisy_coupled_experiment(replace(base, x=10.0))
    assert big_x["upper"].coverage >= 0.99
    ref = noisy_coupled_experiment(base)["lower"].coverage
    huge = noisy_coupled_experiment(replace(base, margin=100.0))
    assert huge["lower"].coverage >= ref - 0.05


def test_variance_experiment():
    cfg = ExperimentConfig(kind="variance", design="identity", n=16, s0=2, replicates=300)
    lam = noise_scales(load_design(cfg), cfg.t).lam
    rep = variance_bound_experiment(replace(cfg, lambda_star=lam))
    assert rep.coverage >= rep.nominal - 0.05
    assert rep.extra["kappa_sq"] == math.inf
    with pytest.raises(HypothesisFailed):
        variance_bound_experiment(replace(cfg, lambda_star=2 * lam))


def test_variance_strictness_guard_tv():
    cfg = ExperimentConfig(kind="variance", design="tv", n=32, d=(16, 16), lambda_star=3.0,
                           replicates=5)
    with pytest.raises(HypothesisFailed) as info:
        variance_bound_experiment(cfg)
    assert "zeta" in info.value.condition


def test_random_design_small_n_out_of_regime():
    cfg = ExperimentConfig(kind="random_design", design="gaussian", n=10, p=4, s0=1,
                           replicates=20)
    rep = random_design_experiment(cfg)
    assert rep.passed is None
    assert rep.extra["in_regime"] is False


def test_regime_helpers():
    model = CovarianceModel.identity(4)
    rho_sq, exact = rho_squared(model, (0,), 200)
    assert exact
    assert rho_sq == pytest.approx(math.log(8) * 4 / 200)
    assert in_asymptotic_regime(model, rho_sq)


def test_kappa_compare_reported_only():
    cfg = ExperimentConfig(kind="kappa_compare", design="gaussian", n=50, p=4, u=0.5, v=1.0,
                           replicates=30)
    rep = empirical_vs_theoretical_kappa(cfg)
    assert rep.passed is None
    assert set(rep.extra["frequencies"]) == {"0.1", "0.25", "0.5"}


def test_probe_oracles():
    gen = np.random.default_rng(0)
    viol, bound = probe_max_gaussian(1000, 1, 0.0, gen)
    assert bound == 1.0 and viol.mean() <= bound
    viol, bound = probe_chi_norm(200_000, 1, 2.0, gen)
    # P(|Z| >= 3) from the normal tail
    exact = math.erfc(3 / math.sqrt(2))
    assert viol.mean() == pytest.approx(exact, abs=4 * math.sqrt(exact / 200_000))
    # 4 exp(-1) > 1 is vacuous at t = 1; t = 2 gives a real bound
    viol, bound = probe_inner_product(5000, 100, 2.0, gen)
    assert bound == pytest.approx(4 * math.exp(-2))
    assert viol.mean() <= bound + binomial_slack(bound, 5000)


def test_probability_probes_small():
    cfg = ExperimentConfig(kind="probes", n=30, p=5, replicates=2000, inner=50)
    out = probability_probes(cfg)
    assert set(out) == {"max", "chi", "inner", "concentration", "quadratic"}
    for key in ("max", "chi", "inner", "concentration"):
        assert out[key].passed, key
    assert out["quadratic"].passed is None
    assert out["concentration"].extra["approximate"] is True
