"""Sparse-regression experiment harness: dataset generation, reference
optimum, multi-trial noisy runs, gap statistics, Welch t-tests,
convergence-iteration detection, and the utility-bound check for the
oracle-gradient variant.

The program solved is

    min (1/N) sum_i (<a_i, x> - b_i)^2 + c1 ||y||_1 + c2 ||y||_2^2
    s.t. x - y = 0,

mapped to the iteration with A = I_n, B = -I_n, c = 0 (already in standard
form).  All outputs are a pure function of the master seed: trials own
substreams keyed by (master seed, trial) so they can run in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .engine import (
    AdmmState,
    NoiseTape,
    OracleState,
    admm_iteration,
    noisy_iteration,
    oracle_admm_iteration,
)
from .problem import (
    AdmmConfig,
    AdmmProblem,
    ConstraintSystem,
    GradientOracle,
    Regularizer,
    soft_threshold,
)

__all__ = [
    "DegenerateSamples",
    "NeverConverged",
    "NotConverged",
    "LassoDataset",
    "SettingRow",
    "ExperimentConfig",
    "GapTrajectory",
    "gen_lasso",
    "reference_optimum",
    "run_trials",
    "welch_t_test",
    "convergence_iterations",
    "utility_bound_rhs",
    "oracle_utility_trials",
]


class DegenerateSamples(Exception):
    """Both samples have zero variance; the t statistic is undefined."""


class NeverConverged(Exception):
    """No iteration with an insignificant 5-step-ahead gap within horizon."""


class NotConverged(Exception):
    """The two reference solvers disagree beyond tolerance."""


@dataclass(frozen=True)
class LassoDataset:
    """Synthetic regression data with rows normalized to ||a_i|| = sqrt(mu).

    Generation: raw rows a'_ij are standard normal scaled by 50 on the first
    floor(n/5) ("heavy") coordinates, then rescaled to norm sqrt(mu_scale);
    the planted signal is 3 on the heavy coordinates; labels are
    <a_i, planted> plus Normal(0, sigma_b^2) noise.
    """

    X: np.ndarray  # N x n, rows a_i
    b: np.ndarray  # N
    c1: float
    c2: float
    mu_scale: float
    sigma_b: float
    seed: int

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def planted(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[: self.n // 5] = 3.0
        return x

    def loss(self, x) -> float:
        """The average squared residual (the smooth part of the objective)."""
        r = self.X @ np.asarray(x, dtype=float) - self.b
        return float(r @ r) / self.N

    def loss_gradient(self, x) -> np.ndarray:
        r = self.X @ np.asarray(x, dtype=float) - self.b
        return (2.0 / self.N) * (self.X.T @ r)

    def penalty(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(self.c1 * np.abs(y).sum() + self.c2 * (y @ y))

    def objective(self, x, y) -> float:
        return self.loss(x) + self.penalty(y)

    def sampled_gradient(self, i: int, x) -> np.ndarray:
        """Gradient of the single-point loss (<a_i, x> - b_i)^2."""
        a = self.X[i]
        return 2.0 * (float(a @ x) - self.b[i]) * a


def gen_lasso(n: int, N: int, mu_scale: float, sigma_b: float, seed: int,
              c1: float = 0.01, c2: float = 0.1) -> LassoDataset:
    """Generates the synthetic dataset (deterministic in ``seed``)."""
    if n < 5 or N < 1:
        raise ValueError("need n >= 5 and N >= 1")
    tape = NoiseTape(seed, stream=(0,))
    heavy = n // 5
    raw = tape.draw(N * n).reshape(N, n)
    raw[:, :heavy] *= 50.0
    norms = np.linalg.norm(raw, axis=1)
    X = raw * (math.sqrt(mu_scale) / norms)[:, None]
    planted = np.zeros(n)
    planted[:heavy] = 3.0
    label_noise = sigma_b * tape.draw(N)
    b = X @ planted + label_noise
    return LassoDataset(
        X=X, b=b, c1=c1, c2=c2, mu_scale=mu_scale, sigma_b=sigma_b, seed=seed
    )


def _lasso_problem(dataset: LassoDataset, beta: float, eta: float,
                   c1: Optional[float] = None,
                   c2: Optional[float] = None) -> AdmmProblem:
    n = dataset.n
    system = ConstraintSystem(np.eye(n), -np.eye(n), np.zeros(n))
    reg = Regularizer.elastic_net(
        dataset.c1 if c1 is None else c1, dataset.c2 if c2 is None else c2
    )
    return AdmmProblem(system, reg, AdmmConfig(beta=beta, eta=eta))


def _fista(dataset: LassoDataset, tol: float = 1e-14,
           max_iter: int = 200000) -> np.ndarray:
    """Accelerated proximal gradient on loss(x) + c2||x||^2 + c1||x||_1."""
    n = dataset.n
    smooth_lip = (
        2.0 * float(np.linalg.eigvalsh(dataset.X.T @ dataset.X)[-1]) / dataset.N
        + 2.0 * dataset.c2
    )
    step = 1.0 / smooth_lip
    x = np.zeros(n)
    z = x.copy()
    t_momentum = 1.0
    for _ in range(max_iter):
        grad = dataset.loss_gradient(z) + 2.0 * dataset.c2 * z
        x_new = soft_threshold(z - step * grad, step * dataset.c1)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_momentum * t_momentum))
        z = x_new + ((t_momentum - 1.0) / t_new) * (x_new - x)
        moved = np.linalg.norm(x_new - x)
        x, t_momentum = x_new, t_new
        if moved <= tol * (1.0 + np.linalg.norm(x)):
            break
    return x


def reference_optimum(dataset: LassoDataset, beta: float = 1.0,
                      eta: Optional[float] = None,
                      disagree_tol: float = 1e-4
                      ) -> Tuple[np.ndarray, np.ndarray, float]:
    """(x*, y*, value) computed two independent ways.

    Route 1: the noiseless iteration with the full-batch gradient for up to
    50000 steps (stopping when the custom-norm step change drops below
    1e-12).  Route 2: accelerated proximal gradient on the equivalent
    unconstrained objective.  Raises :class:`NotConverged` when the two
    disagree beyond ``disagree_tol`` relative; returns whichever point has
    the lower objective.
    """
    if eta is None:
        eta = 0.5 / max(2.0 * dataset.mu_scale + 2.0 * dataset.c2, 1e-12)
    problem = _lasso_problem(dataset, beta, eta)
    oracle = GradientOracle(
        gradient=dataset.loss_gradient, nu=2.0 * dataset.mu_scale
    )
    state = AdmmState(np.zeros(dataset.n), np.zeros(dataset.n))
    w = problem.config.eta / problem.config.beta
    for _ in range(50000):
        nxt = admm_iteration(state, oracle, problem)
        dx = nxt.x - state.x
        dwv = (nxt.lam - problem.config.beta * nxt.x) - (
            state.lam - problem.config.beta * state.x
        )
        step_sq = float(dx @ dx + w * (dwv @ dwv))
        state = nxt
        if step_sq < 1e-24:  # custom-norm step change < 1e-12
            break
    x_admm = state.x
    y_admm = problem.argmin_g(state.lam - problem.config.beta * state.x)

    x_fista = _fista(dataset)

    scale = 1.0 + np.linalg.norm(x_fista)
    if np.linalg.norm(x_admm - x_fista) > disagree_tol * scale:
        raise NotConverged(
            "reference solvers disagree: "
            f"||dx|| = {np.linalg.norm(x_admm - x_fista):.3e}"
        )
    candidates = [
        (dataset.objective(x_admm, y_admm), x_admm, y_admm),
        (dataset.objective(x_fista, x_fista), x_fista, x_fista),
    ]
    value, x_star, y_star = min(candidates, key=lambda c: c[0])
    return x_star, y_star, value


@dataclass(frozen=True)
class SettingRow:
    """One parameter row of the experiment grid."""

    mu: float
    beta: float
    c2: float
    c1: float
    eta: float


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int
    trials: int
    iterations: int
    sigmas: Tuple[float, ...]
    rows: Tuple[SettingRow, ...]
    gap_cadence: int = 1
    n: int = 64
    N: int = 1000
    sigma_b: float = 0.01

    def __post_init__(self):
        if self.trials < 1 or self.iterations < 1:
            raise ValueError("need trials >= 1 and iterations >= 1")


@dataclass
class GapTrajectory:
    """Per-trial, per-iteration optimality gaps plus their mean curve."""

    gaps: np.ndarray  # trials x iterations
    optimum: float
    sigma: float
    row: SettingRow

    @property
    def mean(self) -> np.ndarray:
        return self.gaps.mean(axis=0)

    def at_iteration(self, t: int) -> np.ndarray:
        """Per-trial gaps at 1-based iteration t."""
        return self.gaps[:, t - 1]


def run_trials(dataset: LassoDataset, config: ExperimentConfig,
               row: Optional[SettingRow] = None,
               sigma: Optional[float] = None,
               reference: Optional[Tuple[np.ndarray, np.ndarray, float]] = None,
               use_post_noise_x: bool = True) -> GapTrajectory:
    """Noisy runs from x0 = 3·1, lambda0 = 0 with per-trial substreams.

    Each trial samples its own function sequence uniformly from the dataset
    and its own noise tape, both keyed by (master seed, trial), so identical
    seeds give identical trajectories and trials are order-independent.  The
    recorded gap at iteration t is loss(x~_t) + penalty(y_t) - optimum with
    y_t recovered from the released x~_t (set ``use_post_noise_x=False`` to
    evaluate at the pre-noise iterate instead).
    """
    row = row if row is not None else config.rows[0]
    sigma = sigma if sigma is not None else config.sigmas[0]
    if reference is None:
        reference = reference_optimum(dataset)
    _, _, optimum = reference

    problem = _lasso_problem(dataset, row.beta, row.eta, c1=row.c1, c2=row.c2)
    beta = row.beta
    n, T = dataset.n, config.iterations
    penalty = Regularizer.elastic_net(row.c1, row.c2)
    gaps = np.empty((config.trials, T))
    nu_single = 2.0 * dataset.mu_scale

    for trial in range(config.trials):
        sampler = np.random.Generator(
            np.random.PCG64(
                np.random.SeedSequence((config.master_seed, trial, 0))
            )
        )
        indices = sampler.integers(0, dataset.N, size=T)
        tape = NoiseTape(config.master_seed, stream=(trial, 1))
        state = AdmmState(3.0 * np.ones(n), np.zeros(n))
        for t in range(T):
            i = int(indices[t])
            oracle = GradientOracle(
                gradient=lambda x, i=i: dataset.sampled_gradient(i, x),
                nu=nu_single,
            )
            if sigma == 0.0:
                clean = admm_iteration(state, oracle, problem)
                tape.draw(n)  # keep draw alignment across sigma values
                state = clean
                x_eval = state.x
            else:
                clean = admm_iteration(state, oracle, problem)
                noise = sigma * tape.draw(n)
                state = AdmmState(clean.x + noise, clean.lam)
                x_eval = state.x if use_post_noise_x else clean.x
            y_t = problem.argmin_g(state.lam - beta * x_eval)
            gaps[trial, t] = (
                dataset.loss(x_eval) + penalty.value(y_t) - optimum
            )
    return GapTrajectory(gaps=gaps, optimum=optimum, sigma=sigma, row=row)


def welch_t_test(s1: Sequence[float], s2: Sequence[float]) -> float:
    """Two-sided Welch t-test p-value via the regularized incomplete beta.

    Symmetric in its arguments.  When both sample variances are zero the t
    statistic is undefined: equal means return p = 1 (indistinguishable),
    different means return p = 0.
    """
    a = np.asarray(s1, dtype=float)
    b = np.asarray(s2, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least 2 observations")
    v1 = a.var(ddof=1)
    v2 = b.var(ddof=1)
    dm = a.mean() - b.mean()
    if v1 == 0.0 and v2 == 0.0:
        return 1.0 if dm == 0.0 else 0.0
    se_sq = v1 / a.size + v2 / b.size
    t_stat = dm / math.sqrt(se_sq)
    df = se_sq**2 / (
        (v1 / a.size) ** 2 / (a.size - 1) + (v2 / b.size) ** 2 / (b.size - 1)
    )
    # P(|T_df| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    return float(special.betainc(df / 2.0, 0.5, df / (df + t_stat * t_stat)))


def convergence_iterations(traj: GapTrajectory,
                           confidence: float = 0.95) -> int:
    """Smallest 1-based iteration t whose per-trial gaps are statistically
    indistinguishable (Welch p > 1 - confidence) from those at t + 5."""
    threshold = 1.0 - confidence
    T = traj.gaps.shape[1]
    if T < 6:
        raise ValueError("trajectory needs at least t + 5 iterations")
    for t in range(1, T - 4):
        p = welch_t_test(traj.at_iteration(t), traj.at_iteration(t + 5))
        if p > threshold:
            return t
    raise NeverConverged(f"no insignificant 5-step gap within {T} iterations")


def utility_bound_rhs(T: int, n: int, beta: float, op_a: float, rho: float,
                      G: float, dist_x0: float, dist_By0: float) -> float:
    """Convergence-rate bound at step size eta = 1/sqrt(T):
    beta d_y^2/(2T) + d_x^2/(2 sqrt(T)) + (G^2 + n rho^2)/(2 sqrt(T))
    + n beta^2 rho^2 ||A||^4/(2 T^1.5) + n beta rho^2 ||A||^2/T."""
    if T < 1:
        raise ValueError("need T >= 1")
    sqrt_T = math.sqrt(T)
    return (
        beta * dist_By0**2 / (2.0 * T)
        + dist_x0**2 / (2.0 * sqrt_T)
        + (G * G + n * rho * rho) / (2.0 * sqrt_T)
        + n * beta**2 * rho**2 * op_a**4 / (2.0 * T * sqrt_T)
        + n * beta * rho**2 * op_a**2 / T
    )


def oracle_utility_trials(problem: AdmmProblem, dataset: LassoDataset,
                          start: OracleState, rho: float, T: int,
                          trials: int, master_seed: int,
                          feasibility_tol: float = 1e-9) -> dict:
    """Runs the oracle-gradient variant and returns the ingredients of the
    utility check.

    Per trial: T steps with single-point gradients sampled uniformly, noise
    from the trial's substream.  Returns the trial-averaged left-hand side
    pieces evaluated at the averaged iterates, the max sampled gradient norm
    (the empirical G), and the worst feasibility-monotonicity violation
    ||A x_{t+1} + B y_{t+1} - c|| - ||A x_{t+1} + B y_t - c|| (must be
    <= feasibility_tol at every step).
    """
    A, B, c = problem.system.A, problem.system.B, problem.system.c
    beta = problem.config.beta
    n = problem.system.n
    x_bar_first = np.zeros(n)     # average of x_0 .. x_{T-1}
    x_bar_last = np.zeros(n)      # average of x_1 .. x_T
    y_bar = np.zeros(problem.system.l)  # average of y_1 .. y_T
    g_max = 0.0
    worst_violation = -math.inf
    lhs_sum = 0.0

    x_star, y_star, optimum = reference_optimum(dataset)

    for trial in range(trials):
        sampler = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((master_seed, trial, 0)))
        )
        indices = sampler.integers(0, dataset.N, size=T)
        tape = NoiseTape(master_seed, stream=(trial, 1))
        state = start
        x_bar_first[:] = 0.0
        x_bar_last[:] = 0.0
        y_bar[:] = 0.0
        for t in range(T):
            i = int(indices[t])
            x_bar_first += state.x
            g_max = max(
                g_max,
                float(np.linalg.norm(dataset.sampled_gradient(i, state.x))),
            )
            oracle = GradientOracle(
                gradient=lambda x, i=i: dataset.sampled_gradient(i, x),
                nu=2.0 * dataset.mu_scale,
            )
            prev_y = state.y
            state = oracle_admm_iteration(state, oracle, problem, rho, tape)
            r_new = np.linalg.norm(A @ state.x + B @ state.y - c)
            r_old = np.linalg.norm(A @ state.x + B @ prev_y - c)
            worst_violation = max(worst_violation, r_new - r_old)
            x_bar_last += state.x
            y_bar += state.y
        xf = x_bar_first / T
        xl = x_bar_last / T
        yb = y_bar / T
        lhs_sum += (
            dataset.loss(xf)
            - dataset.loss(x_star)
            + dataset.penalty(yb)
            - dataset.penalty(y_star)
            + 0.5 * beta * float(np.linalg.norm(A @ xl + B @ yb - c)) ** 2
        )
    return {
        "lhs": lhs_sum / trials,
        "g_max": g_max,
        "worst_feasibility_violation": worst_violation,
        "optimum": optimum,
        "x_star": x_star,
        "y_star": y_star,
    }
