"""Shared instance generators for the property suites."""

import numpy as np
import pytest

from noisyadmm.engine import AdmmState
from noisyadmm.problem import (
    AdmmConfig,
    AdmmProblem,
    ConstraintSystem,
    QuadraticOracle,
    Regularizer,
)


def random_psd(rng, dim, lo, hi):
    """Symmetric matrix with eigenvalues sampled uniformly in [lo, hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return (q * rng.uniform(lo, hi, size=dim)) @ q.T


def random_convex_instance(seed):
    """A random convex instance: quadratic f with eigenvalues in [0, 1/eta],
    elastic-net (B = -I, c = 0) or strictly convex quadratic g, arbitrary A.

    Returns (problem, f, state1, state2).
    """
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 5))
    n = int(rng.integers(1, 9))
    beta = float(rng.uniform(0.2, 2.0))
    eta = float(rng.uniform(0.2, 2.0))
    A = rng.standard_normal((m, n))
    if seed % 2 == 0:
        B = -np.eye(m)
        c = np.zeros(m)
        reg = Regularizer.elastic_net(
            float(rng.uniform(0.0, 0.5)), float(rng.uniform(0.0, 0.5))
        )
    else:
        ell = int(rng.integers(1, m + 2))
        B = rng.standard_normal((m, ell))
        c = rng.standard_normal(m)
        reg = Regularizer.quadratic(
            random_psd(rng, ell, 0.1, 1.0), rng.standard_normal(ell)
        )
    problem = AdmmProblem(
        ConstraintSystem(A, B, c), reg, AdmmConfig(beta=beta, eta=eta)
    )
    f = QuadraticOracle(
        random_psd(rng, n, 0.0, 0.999 / eta), rng.standard_normal(n)
    )
    s1 = AdmmState(rng.standard_normal(n), rng.standard_normal(m))
    s2 = AdmmState(rng.standard_normal(n), rng.standard_normal(m))
    return problem, f, s1, s2


def random_sc_instance(seed):
    """A strongly convex instance: quadratic f with eigenvalues in [mu, nu],
    elastic-net g with c2 > 0 (so mu_g = 2 c2), random A, eta at the midpoint
    of the admissible interval.

    Returns (problem, f, state1, state2, nu, mu, mu_g, op_ab).
    """
    from noisyadmm.linalg import operator_norm
    from noisyadmm.norms import eta_midpoint

    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 5))
    n = int(rng.integers(1, 9))
    beta = float(rng.uniform(0.2, 2.0))
    mu = float(rng.uniform(0.1, 0.5))
    nu = float(rng.uniform(mu, 2.0 * mu))
    A = rng.standard_normal((m, n))
    c2 = float(rng.uniform(0.05, 0.5))
    reg = Regularizer.elastic_net(float(rng.uniform(0.0, 0.3)), c2)
    op_ab = operator_norm(A.T @ (-np.eye(m)))
    eta = eta_midpoint(nu, mu, reg.mu_g, beta, op_ab)
    problem = AdmmProblem(
        ConstraintSystem(A, -np.eye(m), np.zeros(m)), reg,
        AdmmConfig(beta=beta, eta=eta),
    )
    f = QuadraticOracle(random_psd(rng, n, mu, nu), rng.standard_normal(n))
    s1 = AdmmState(rng.standard_normal(n), rng.standard_normal(m))
    s2 = AdmmState(rng.standard_normal(n), rng.standard_normal(m))
    return problem, f, s1, s2, nu, mu, reg.mu_g, op_ab


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
