"""Exact Lasso compatibility constants, KKT-certified Lasso/TV solvers and
seeded Monte-Carlo checks of Lasso prediction-error bounds."""

from .bounds import (
    BetaminReport,
    BoundReport,
    ExperimentConfig,
    TrialRecord,
    betamin_noiseless,
    betamin_population,
    construct_betamin_beta0,
    empirical_vs_theoretical_kappa,
    noisy_coupled_experiment,
    noisy_lower_experiment,
    noisy_upper_experiment,
    probability_probes,
    random_design_experiment,
    variance_bound_experiment,
    verify_noiseless_identity,
)
from .compat import (
    CompatResult,
    CompatSpec,
    brute_force_compat,
    cone_bound_check,
    ell1_bound_check,
    kappa_hat_sq,
    kappa_theoretical_sq,
    phi_hat_sq,
)
from .core import CovarianceModel, Rng, cholesky_psd, gram, sample_gaussian_design
from .errors import (
    BetaminViolated,
    CapExceeded,
    DegenerateKappa,
    HypothesisFailed,
    InfeasibleSpec,
    InputError,
    LassoBoundsError,
    NoConvergence,
    NotPSD,
    OddDistance,
    RankDeficient,
)
from .kernels import BACKEND
from .lasso import LassoSolution, kkt_residual, solve_lasso, solve_noiseless
from .projections import ProjectionDiag, anti_projection_diag, irrepresentable_check
from .tv import (
    TvInstance,
    tv_bstar,
    tv_denoise,
    tv_design,
    tv_kappa_closed_form,
    tv_noiseless_error,
    weighted_kappa_bound,
)

__version__ = "0.1.0"
