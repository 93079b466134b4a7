import numpy as np
import pytest

from noisyadmm.engine import admm_iteration
from noisyadmm.norms import (
    BadEta,
    ContractionReport,
    CustomNormParams,
    EtaOutsideInterval,
    ScNormParams,
    contraction_factor,
    custom_norm_sq,
    eta_interval,
    eta_midpoint,
    kappa_coefficient,
    sc_norm_sq,
)

from conftest import random_convex_instance, random_psd, random_sc_instance


# ------------------------------------------------------------- norm values

def _params(eta=0.5, beta=1.0, A=None):
    return CustomNormParams(eta, beta, np.eye(2) if A is None else A)


def test_custom_norm_zero():
    assert custom_norm_sq(np.zeros(2), np.zeros(2), _params()) == 0.0


def test_custom_norm_dual_cancellation():
    # lambda = beta A x collapses the dual term, leaving ||x||^2.
    p = _params(eta=0.7, beta=1.3)
    x = np.array([3.0, -4.0])
    lam = 1.3 * x
    assert custom_norm_sq(x, lam, p) == pytest.approx(25.0)


def test_custom_norm_absolute_homogeneity():
    p = _params(eta=0.4, beta=0.9, A=np.array([[1.0, 2.0], [0.0, 1.0]]))
    x, lam = np.array([1.0, -1.0]), np.array([0.5, 2.0])
    base = custom_norm_sq(x, lam, p)
    assert custom_norm_sq(-3.0 * x, -3.0 * lam, p) == pytest.approx(9.0 * base)


def test_custom_norm_rejects_bad_params():
    with pytest.raises(ValueError):
        CustomNormParams(0.0, 1.0, np.eye(1))
    with pytest.raises(ValueError):
        CustomNormParams(1.0, -1.0, np.eye(1))


def test_sc_norm_zero():
    p = ScNormParams(0.4, 1.0, np.eye(2), nu=1.0, mu=1.0)
    assert sc_norm_sq(np.zeros(2), np.zeros(2), p) == 0.0


def test_sc_norm_dual_cancellation():
    p = ScNormParams(0.4, 1.0, np.eye(2), nu=1.0, mu=1.0)
    x = np.array([1.0, 2.0])
    assert sc_norm_sq(x, 1.0 * x, p) == pytest.approx(p.kappa * 5.0)


def test_sc_norm_degenerate_kappa():
    # nu = mu with eta = 1/nu puts eta at 2/(nu+mu) where kappa hits zero;
    # the weighted form is no longer a norm and the call must fail.
    p = ScNormParams(1.0, 1.0, np.eye(1), nu=1.0, mu=1.0)
    assert kappa_coefficient(1.0, 1.0, 1.0) == pytest.approx(0.0)
    with pytest.raises(BadEta):
        sc_norm_sq(np.ones(1), np.zeros(1), p)


def test_sc_norm_eta_out_of_range():
    p = ScNormParams(3.0, 1.0, np.eye(1), nu=1.0, mu=1.0)
    with pytest.raises(BadEta):
        sc_norm_sq(np.ones(1), np.zeros(1), p)


# --------------------------------------------------------------- eta interval

def test_eta_interval_small_mu_row():
    low, high = eta_interval(0.02, 0.02, 0.2, 0.15, 1.0)
    assert low == pytest.approx(36.603, abs=1e-3)
    assert high == pytest.approx(50.0)
    assert eta_midpoint(0.02, 0.02, 0.2, 0.15, 1.0) == pytest.approx(
        43.3013, abs=1e-3
    )


def test_eta_interval_midpoint_20():
    assert eta_midpoint(0.045, 0.045, 0.2, 0.3, 1.0) == pytest.approx(20.0, abs=1e-9)


def test_eta_interval_large_mu_g_limit():
    # As mu_g grows the second lower-bound candidate goes to -inf and only
    # the first term remains.
    nu = mu = 0.1
    s = nu + mu
    first = 4.0 / (s + np.sqrt(s * s + 8 * nu * mu))
    low, _ = eta_interval(nu, mu, 1e12, 1.0, 1.0)
    assert low == pytest.approx(first, rel=1e-12)


def test_eta_interval_validation():
    with pytest.raises(ValueError):
        eta_interval(0.1, 0.2, 0.1, 1.0, 1.0)  # mu > nu
    with pytest.raises(ValueError):
        eta_interval(0.2, 0.1, 0.0, 1.0, 1.0)  # mu_g = 0


# ---------------------------------------------------------- contraction factor

STUDY_ROWS = [
    # (nu = mu, mu_g, beta, op_ab) -> (eta_mid, factor)
    (0.18, 0.2, 0.5, 1.0, 4.8113, 0.9149),
    (0.045, 0.2, 0.3, 1.0, 20.0, 0.8571),
    (0.02, 0.2, 0.15, 1.0, 43.3013, 0.7992),
]


@pytest.mark.parametrize("numu,mu_g,beta,op_ab,eta_mid,factor", STUDY_ROWS)
def test_contraction_table_rows(numu, mu_g, beta, op_ab, eta_mid, factor):
    eta = eta_midpoint(numu, numu, mu_g, beta, op_ab)
    assert eta == pytest.approx(eta_mid, abs=1e-3)
    report = contraction_factor(numu, numu, mu_g, beta, op_ab, eta)
    assert 0.0 < report.factor < 1.0
    assert report.factor == pytest.approx(factor, abs=1e-3)
    assert report.factor == pytest.approx(max(report.R / report.P,
                                              report.S / report.Q))


def test_contraction_rejects_eta_outside():
    with pytest.raises(EtaOutsideInterval):
        contraction_factor(0.18, 0.18, 0.2, 0.5, 1.0, eta=2.0 / 0.36)
    with pytest.raises(EtaOutsideInterval):
        contraction_factor(0.18, 0.18, 0.2, 0.5, 1.0, eta=0.01)


def test_contraction_report_json_round_trip():
    import json

    eta = eta_midpoint(0.045, 0.045, 0.2, 0.3, 1.0)
    report = contraction_factor(0.045, 0.045, 0.2, 0.3, 1.0, eta)
    parsed = json.loads(report.to_json())
    assert parsed["factor"] == report.factor
    assert parsed["eta_mid"] == report.eta_mid
    assert isinstance(report, ContractionReport)


# -------------------------------------------------------- iteration properties

def test_iteration_non_expansive_in_custom_norm():
    for seed in range(100):
        problem, f, s1, s2 = random_convex_instance(seed)
        p = CustomNormParams(
            problem.config.eta, problem.config.beta, problem.system.A
        )
        o1 = admm_iteration(s1, f, problem)
        o2 = admm_iteration(s2, f, problem)
        before = custom_norm_sq(s1.x - s2.x, s1.lam - s2.lam, p)
        after = custom_norm_sq(o1.x - o2.x, o1.lam - o2.lam, p)
        assert after <= before * (1.0 + 1e-9)


def test_iteration_contracts_in_sc_norm():
    for seed in range(60):
        problem, f, s1, s2, nu, mu, mu_g, op_ab = random_sc_instance(seed)
        eta, beta = problem.config.eta, problem.config.beta
        L = contraction_factor(nu, mu, mu_g, beta, op_ab, eta).factor
        p = ScNormParams(eta, beta, problem.system.A, nu=nu, mu=mu)
        o1 = admm_iteration(s1, f, problem)
        o2 = admm_iteration(s2, f, problem)
        before = sc_norm_sq(s1.x - s2.x, s1.lam - s2.lam, p)
        after = sc_norm_sq(o1.x - o2.x, o1.lam - o2.lam, p)
        assert after <= L * before * (1.0 + 1e-9)


def test_gradient_step_non_expansive():
    # phi(x) = x - eta grad f(x) with 0 <= eigenvalues <= 1/eta.
    for seed in range(50):
        problem, f, s1, s2 = random_convex_instance(seed)
        eta = problem.config.eta
        d1 = s1.x - eta * f.gradient(s1.x)
        d2 = s2.x - eta * f.gradient(s2.x)
        assert np.linalg.norm(d1 - d2) <= np.linalg.norm(s1.x - s2.x) * (
            1.0 + 1e-12
        )


def test_sc_gradient_step_bound():
    # ||dx - eta dg||^2 <= (1 - 2 eta nu mu/(nu+mu)) ||dx||^2
    #                      + eta (eta - 2/(nu+mu)) ||dg||^2 + 1e-8
    from noisyadmm.problem import QuadraticOracle

    rng_outer = np.random.default_rng(101)
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        mu = float(rng.uniform(0.1, 1.0))
        nu = float(rng.uniform(mu, 3.0 * mu))
        f = QuadraticOracle(random_psd(rng, n, mu, nu), rng.standard_normal(n))
        eta = float(rng.uniform(0.01, 2.0 / (nu + mu)))
        x1, x2 = rng_outer.standard_normal(n), rng_outer.standard_normal(n)
        dx = x1 - x2
        dg = f.gradient(x1) - f.gradient(x2)
        lhs = float(np.sum((dx - eta * dg) ** 2))
        rhs = (1.0 - 2.0 * eta * nu * mu / (nu + mu)) * float(dx @ dx) + eta * (
            eta - 2.0 / (nu + mu)
        ) * float(dg @ dg)
        assert lhs <= rhs + 1e-8
