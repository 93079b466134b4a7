"""Exact output-law oracle for noisy iterations on quadratic instances.

On a quadratic loss and quadratic regularizer one deterministic iteration is
an affine map of the joint state (x, lambda); the noisy chain therefore
keeps the joint law exactly Gaussian, and the divergence between two
scenarios that differ only in their starting point can be computed in closed
form.  This is the independent check on the amplification theorems — and on
the claim that a single noisy iteration leaks the dual variable completely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .accountant import amp_bound_general, amp_bound_sc
from .engine import AdmmState, admm_iteration
from .linalg import OutOfRange, as_matrix, as_vector, operator_norm, pseudo_solve
from .norms import EmptyInterval, EtaOutsideInterval
from .problem import (
    AdmmConfig,
    AdmmProblem,
    ConstraintSystem,
    QuadraticOracle,
    Regularizer,
)

__all__ = [
    "NonQuadratic",
    "CovarianceMismatch",
    "INFINITE",
    "GaussianBelief",
    "AffineMap",
    "iteration_as_affine",
    "propagate",
    "exact_zcdp",
    "verify_bound",
]

INFINITE = math.inf


class NonQuadratic(Exception):
    """The oracle needs quadratic f and quadratic (or c1=0 elastic-net) g."""


class CovarianceMismatch(Exception):
    """exact_zcdp only handles equal-covariance scenario pairs."""


@dataclass(frozen=True)
class GaussianBelief:
    """Exact law of the joint (x, lambda): mean in R^{n+m} and covariance.

    Covariance must be symmetric to 1e-10 with eigenvalues >= -1e-10.
    """

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = as_vector(self.mean)
        cov = as_matrix(self.covariance)
        scale = max(1.0, np.abs(cov).max())
        if np.abs(cov - cov.T).max() > 1e-10 * scale:
            raise ValueError("covariance must be symmetric")
        if float(np.linalg.eigvalsh(cov)[0]) < -1e-10 * scale:
            raise ValueError("covariance must be PSD")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))

    @staticmethod
    def point_mass(state: AdmmState) -> "GaussianBelief":
        mean = np.concatenate([state.x, state.lam])
        d = mean.shape[0]
        return GaussianBelief(mean, np.zeros((d, d)))


@dataclass(frozen=True)
class AffineMap:
    M: np.ndarray
    b: np.ndarray

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.M @ v + self.b


def iteration_as_affine(f: QuadraticOracle, problem: AdmmProblem,
                        probes: int = 10, seed: int = 0) -> AffineMap:
    """The affine map (x, lambda) -> next (x, lambda) of one deterministic
    iteration, built by probing the iteration on the basis states and the
    origin, then verified on random probes to 1e-9.

    The regularizer must make the iteration affine: quadratic, or elastic net
    with c1 = 0 (pure ridge).
    """
    if not isinstance(f, QuadraticOracle):
        raise NonQuadratic("f must be a QuadraticOracle")
    reg = problem.regularizer
    if reg.kind == "elastic_net":
        if reg.c1 != 0.0:
            raise NonQuadratic("elastic net with c1 != 0 is not affine")
    elif reg.kind != "quadratic":
        raise NonQuadratic(f"regularizer kind {reg.kind!r} is not quadratic")

    n, m = problem.system.n, problem.system.m
    d = n + m

    def step(v: np.ndarray) -> np.ndarray:
        out = admm_iteration(AdmmState(v[:n], v[n:]), f, problem)
        return np.concatenate([out.x, out.lam])

    b = step(np.zeros(d))
    M = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        M[:, i] = step(e) - b
    amap = AffineMap(M, b)

    rng = np.random.default_rng(seed)
    for _ in range(probes):
        v = rng.standard_normal(d)
        ref = step(v)
        if np.linalg.norm(amap.apply(v) - ref) > 1e-9 * (1.0 + np.linalg.norm(ref)):
            raise NonQuadratic("iteration failed the affinity probe check")
    return amap


def propagate(belief: GaussianBelief, amap: AffineMap, sigma: float,
              n: int) -> GaussianBelief:
    """One noisy iteration applied to an exact Gaussian law: affine transport
    of mean and covariance, then fresh Normal(0, sigma^2 I_n) on the x block
    (the lambda block receives no noise)."""
    mean = amap.apply(belief.mean)
    cov = amap.M @ belief.covariance @ amap.M.T
    cov[:n, :n] += sigma * sigma * np.eye(n)
    return GaussianBelief(mean, cov)


def exact_zcdp(b1: GaussianBelief, b2: GaussianBelief,
               tol: float = 1e-10) -> float:
    """Exact zCDP divergence between two equal-covariance Gaussians:
    (1/2) dm^T Sigma^+ dm, or +inf when dm leaves the range of Sigma.

    Raises :class:`CovarianceMismatch` when ||cov1 - cov2|| > 1e-8.
    """
    diff = np.abs(b1.covariance - b2.covariance).max()
    if diff > 1e-8:
        raise CovarianceMismatch(
            f"covariances differ by {diff:.3e}; scenarios must share noise"
        )
    sigma_mat = 0.5 * (b1.covariance + b2.covariance)
    dm = b1.mean - b2.mean
    if not np.any(dm):
        return 0.0
    try:
        sol = pseudo_solve(sigma_mat, dm, tol=tol)
    except OutOfRange:
        return INFINITE
    return 0.5 * float(dm @ sol)


def _random_psd(rng: np.random.Generator, dim: int, lo: float,
                hi: float) -> np.ndarray:
    gaussian = rng.standard_normal((dim, dim))
    q, _ = np.linalg.qr(gaussian)
    eigs = rng.uniform(lo, hi, size=dim)
    return (q * eigs) @ q.T


def random_quadratic_instance(seed: int, max_n: int = 8, max_m: int = 4,
                              n_oracles: int = 12,
                              strongly_convex: bool = False) -> dict:
    """A random standard-form quadratic instance for oracle-vs-bound runs.

    Returns a dict with ``problem`` (quadratic regularizer, A = [I_m | D]),
    ``fs`` (one quadratic oracle per iteration; convex and (1/eta)-smooth, or
    nu-smooth mu-strongly convex with an admissible eta when
    ``strongly_convex``), the two starting points ``x0``/``x0_prime``, and
    the shared ``lam0``.
    """
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, max_m + 1))
    n = int(rng.integers(m, max_n + 1))
    ell = int(rng.integers(1, m + 2))
    D = rng.standard_normal((m, n - m))
    A = np.hstack([np.eye(m), D])
    B = rng.standard_normal((m, ell))
    c = rng.standard_normal(m)
    beta = float(rng.uniform(0.2, 2.0))

    if strongly_convex:
        mu = float(rng.uniform(0.05, 0.3))
        nu = float(rng.uniform(mu, 2.0 * mu))
        s = nu + mu
        low1 = 4.0 / (s + math.sqrt(s * s + 8.0 * nu * mu))
        high = 2.0 / s
        eta = float(rng.uniform(low1 + 0.05 * (high - low1),
                                high - 0.05 * (high - low1)))
        # Make g strongly convex enough that eta clears the second interval
        # constraint 2/s - 2 mu_g/(beta^2 ||A^T B||^2) <= eta.
        op_ab = operator_norm(A.T @ B)
        mu_g_needed = 0.5 * max(high - eta, 0.0) * beta * beta * op_ab * op_ab
        g_lo = 1.2 * mu_g_needed + 0.05
        P_g = _random_psd(rng, ell, g_lo, g_lo + 1.0)
        f_lo, f_hi = mu, nu
    else:
        eta = float(rng.uniform(0.2, 2.0))
        P_g = _random_psd(rng, ell, 0.1, 1.0)
        f_lo, f_hi = 0.0, 0.999 / eta

    regularizer = Regularizer.quadratic(P_g, rng.standard_normal(ell))
    problem = AdmmProblem(
        ConstraintSystem(A, B, c), regularizer, AdmmConfig(beta=beta, eta=eta)
    )
    fs = [
        QuadraticOracle(_random_psd(rng, n, f_lo, f_hi), rng.standard_normal(n))
        for _ in range(n_oracles)
    ]
    return {
        "problem": problem,
        "fs": fs,
        "x0": rng.standard_normal(n),
        "x0_prime": rng.standard_normal(n),
        "lam0": rng.standard_normal(m),
        # Nominal smoothness/strong-convexity envelope containing every
        # oracle (tighter per-oracle values are on the oracles themselves).
        "nu": f_hi,
        "mu": f_lo,
    }


def run_exact_chain(problem: AdmmProblem, fs: Sequence[QuadraticOracle],
                    start: AdmmState, sigma: float) -> GaussianBelief:
    """Propagates a point mass at ``start`` through one noisy iteration per
    oracle in ``fs``, returning the exact final joint law."""
    belief = GaussianBelief.point_mass(start)
    n = problem.system.n
    for f in fs:
        amap = iteration_as_affine(f, problem, probes=0)
        belief = propagate(belief, amap, sigma, n)
    return belief


def verify_bound(problem: AdmmProblem, fs: Sequence[QuadraticOracle],
                 x0, x0_prime, lam0, sigma: float, T_pairs: int,
                 nu: Optional[float] = None,
                 mu: Optional[float] = None) -> dict:
    """Checks the amplification theorem against the exact divergence.

    Both scenarios run 2 T_pairs noisy iterations with the same oracles and
    noise level, differing only in the starting x.  Returns
    ``{"exact", "bound", "ok", "kind"}`` where ``ok`` means
    exact <= bound (1 + 1e-9).  Strongly convex instances with an admissible
    eta are checked against the (tighter) strongly convex bound.
    """
    if len(fs) != 2 * T_pairs:
        raise ValueError("need one oracle per iteration (2 T_pairs)")
    if not problem.system.is_standard_form():
        raise ValueError("verify_bound requires standard form A = [I_m | D]")
    x0 = as_vector(x0)
    x0_prime = as_vector(x0_prime)
    lam0 = as_vector(lam0)

    b1 = run_exact_chain(problem, fs, AdmmState(x0, lam0), sigma)
    b2 = run_exact_chain(problem, fs, AdmmState(x0_prime, lam0), sigma)
    exact = exact_zcdp(b1, b2)

    beta, eta = problem.config.beta, problem.config.eta
    op_a = operator_norm(problem.system.A)
    dist0 = float(np.linalg.norm(x0 - x0_prime))

    # The contraction argument needs one (nu, mu) envelope containing every
    # oracle; the caller may supply a nominal one, otherwise the per-oracle
    # extremes are used.
    nu_env = nu if nu is not None else max(f.nu for f in fs)
    mu_env = mu if mu is not None else min(f.mu for f in fs)
    report = None
    if mu_env > 0 and problem.regularizer.mu_g > 0:
        op_ab = operator_norm(problem.system.A.T @ problem.system.B)
        try:
            report = amp_bound_sc(
                sigma, T_pairs, dist0, beta, eta, op_a,
                nu_env, mu_env, problem.regularizer.mu_g, op_ab,
            )
        except (EtaOutsideInterval, EmptyInterval):
            report = None
    if report is None:
        report = amp_bound_general(sigma, T_pairs, dist0, beta, eta, op_a)
    bound = report.amplified_dz
    return {
        "exact": exact,
        "bound": bound,
        "ok": bool(exact <= bound * (1.0 + 1e-9)),
        "kind": report.kind,
    }
