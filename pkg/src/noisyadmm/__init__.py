"""Noisy gradient-variant ADMM: iteration engine, customized-norm
contraction analysis, closed-form privacy-amplification accounting, an exact
affine-Gaussian divergence oracle, and a reproducible experiment harness."""

__version__ = "0.1.0"

from .accountant import (
    AllUsersScheme,
    PrivacyBoundReport,
    all_users_bound,
    amp_bound_general,
    amp_bound_sc,
    expected_inverse_L,
    first_user_bound,
    gamma,
    lambda_mix,
    phi,
    renyi_gaussian,
    zcdp_gaussian,
)
from .engine import (
    AdmmState,
    IterationTranscript,
    NoiseTape,
    OracleState,
    admm_iteration,
    markov_K,
    mechanism_m1,
    mechanism_m2,
    noisy_iteration,
    oracle_admm_iteration,
)
from .linalg import operator_norm, pseudo_solve, solve_spd
from .norms import (
    ContractionReport,
    CustomNormParams,
    ScNormParams,
    contraction_factor,
    custom_norm_sq,
    eta_interval,
    eta_midpoint,
    sc_norm_sq,
)
from .oracle import (
    AffineMap,
    GaussianBelief,
    exact_zcdp,
    iteration_as_affine,
    propagate,
    verify_bound,
)
from .problem import (
    AdmmConfig,
    AdmmProblem,
    ConstraintSystem,
    GradientOracle,
    QuadraticOracle,
    Regularizer,
    StandardForm,
    elastic_net_argmin,
    standardize,
)
from .experiment import (
    ExperimentConfig,
    GapTrajectory,
    LassoDataset,
    SettingRow,
    convergence_iterations,
    gen_lasso,
    reference_optimum,
    run_trials,
    utility_bound_rhs,
    welch_t_test,
)
