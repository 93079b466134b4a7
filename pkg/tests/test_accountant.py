import json
import math

import numpy as np
import pytest

from noisyadmm.accountant import (
    AllUsersScheme,
    BadAlpha,
    WeakConvexityPreconditionViolated,
    ZeroSigma,
    all_users_bound,
    amp_bound_general,
    amp_bound_sc,
    expected_inverse_L,
    first_user_bound,
    first_user_bound_sc,
    gamma,
    gamma_closed_form,
    general_constant,
    lambda_mix,
    phi,
    renyi_gaussian,
    sc_constant,
    zcdp_gaussian,
)
from noisyadmm.norms import EtaOutsideInterval, eta_midpoint, kappa_coefficient


# ------------------------------------------------------- gaussian divergences

def test_zcdp_identical_means():
    assert zcdp_gaussian([1.0, 2.0], [1.0, 2.0], 0.5) == 0.0


def test_zcdp_hand_values():
    assert zcdp_gaussian([2.0], [0.0], 1.0) == pytest.approx(2.0)
    assert zcdp_gaussian([2.0], [0.0], 2.0) == pytest.approx(0.5)


def test_zcdp_rejects_zero_sigma():
    with pytest.raises(ZeroSigma):
        zcdp_gaussian([1.0], [0.0], 0.0)


def test_renyi_hand_values():
    assert renyi_gaussian([1.0], [0.0], 1.0, 2.0) == pytest.approx(1.0)
    assert renyi_gaussian([3.0], [0.0], 3.0, 3.0) == pytest.approx(1.5)


def test_renyi_rejects_bad_alpha():
    with pytest.raises(BadAlpha):
        renyi_gaussian([1.0], [0.0], 1.0, 1.0)


def test_renyi_over_alpha_equals_zcdp():
    x, x2, sigma = np.array([1.0, -2.0]), np.array([0.5, 0.0]), 0.7
    base = zcdp_gaussian(x, x2, sigma)
    for alpha in [1.0 + 1e-9, 1.5, 2.0, 5.0, 100.0]:
        assert renyi_gaussian(x, x2, sigma, alpha) / alpha == pytest.approx(base)


# ----------------------------------------------------------- phi / lambda / gamma

def test_phi_T1_is_one():
    for L in [0.01, 0.3, 0.999, 1.0]:
        assert phi(1, L) == pytest.approx(1.0)


def test_phi_at_one_is_inverse_T():
    assert phi(5, 1.0) == pytest.approx(0.2)


def test_phi_hand_value():
    # T=3, L=1/2: (sqrt2 - 1/sqrt2)/(2 sqrt2 - 1/(2 sqrt2)) = 2/7.
    assert phi(3, 0.5) == pytest.approx(2.0 / 7.0, rel=1e-12)


def test_phi_stable_near_one():
    for T in [2, 10, 50]:
        assert phi(T, 1.0 - 1e-9) == pytest.approx(1.0 / T, rel=1e-6)


def test_phi_upper_bound_grid():
    grid = np.linspace(0.01, 1.0, 100)
    for T in range(1, 51):
        for L in grid:
            assert phi(T, float(L)) <= 1.0 / T + 1e-15


def test_lambda_mix_hand_values():
    assert lambda_mix(2, 0.5) == pytest.approx(2.0 / 3.0)
    assert lambda_mix(4, 1.0) == pytest.approx(0.25)
    assert lambda_mix(1, 0.37) == pytest.approx(1.0)


def test_gamma_at_one():
    assert gamma(7, 1.0) == pytest.approx(1.0 / 7.0, rel=1e-9)
    assert gamma(2, 1.0) == pytest.approx(0.5, rel=1e-9)


def test_gamma_recurrence_equals_closed_form():
    assert abs(gamma(3, 0.5) - gamma_closed_form(3, 0.5)) <= 1e-12
    grid = np.linspace(0.01, 1.0, 100)
    for T in range(2, 51):
        for L in grid:
            L = float(L)
            assert abs(gamma(T, L) - gamma_closed_form(T, L)) <= 1e-12


# --------------------------------------------------------------- general bound

def test_general_constant_unit_parameters():
    assert general_constant(1.0, 1.0, 1.0) == pytest.approx(6.0)


def test_amp_bound_general_plug_in():
    report = amp_bound_general(1.0, 4, 1.0, 1.0, 1.0, 1.0)
    assert report.C == pytest.approx(6.0)
    assert report.amplified_dz == pytest.approx(0.75)
    assert report.total_iterations == 8
    assert report.kind == "general"


def test_amp_bound_general_T1_no_amplification():
    report = amp_bound_general(0.8, 1, 2.0, 0.5, 0.3, 1.2)
    assert report.amplified_dz == pytest.approx(report.C * report.local_dz)


def test_amp_bound_general_phi_form_matches():
    # At contraction 1 the phi form T phi_T(1)^2 = 1/T reproduces C/T exactly.
    report = amp_bound_general(1.0, 7, 1.5, 0.9, 0.4, 1.1)
    assert report.amplified_dz_phi == pytest.approx(report.amplified_dz)


def test_amp_bound_general_monotone_in_T_and_sigma():
    prev = math.inf
    for T in range(1, 10):
        cur = amp_bound_general(1.0, T, 1.0, 1.0, 1.0, 1.0).amplified_dz
        assert cur < prev
        prev = cur
    prev = math.inf
    for sigma in [0.5, 1.0, 2.0, 4.0]:
        cur = amp_bound_general(sigma, 3, 1.0, 1.0, 1.0, 1.0).amplified_dz
        assert cur < prev
        prev = cur


def test_amp_bound_general_rejects_zero_sigma():
    with pytest.raises(ZeroSigma):
        amp_bound_general(0.0, 1, 1.0, 1.0, 1.0, 1.0)


def test_report_json_round_trip():
    report = amp_bound_general(1.0, 4, 1.0, 1.0, 1.0, 1.0)
    parsed = json.loads(report.to_json())
    assert parsed["amplified_dz"] == report.amplified_dz
    assert parsed["T_pairs"] == 4
    assert parsed["total_iterations"] == 8


# ------------------------------------------------------------ first-user bound

def test_first_user_zero_delta():
    report = first_user_bound(1.0, 0.0, 1.0, 1.0, 1.0, 3)
    assert report.local_dz == 0.0
    assert report.amplified_dz == 0.0


def test_first_user_plug_in():
    report = first_user_bound(1.0, 1.0, 1.0, 1.0, 1.0, 2)
    assert report.local_dz == pytest.approx(0.5)
    assert report.amplified_dz == pytest.approx(1.5)  # C=6: 6 * 0.5 / 2
    assert report.total_iterations == 5  # 2 T + 1


# ------------------------------------------------------- strongly convex bound

_ROW = dict(nu=0.18, mu=0.18, mu_g=0.2, beta=0.5, op_ab=1.0)


def _row_eta():
    return eta_midpoint(_ROW["nu"], _ROW["mu"], _ROW["mu_g"], _ROW["beta"],
                        _ROW["op_ab"])


def test_amp_bound_sc_T1():
    eta = _row_eta()
    report = amp_bound_sc(1.0, 1, 1.0, _ROW["beta"], eta, 1.0, _ROW["nu"],
                          _ROW["mu"], _ROW["mu_g"], _ROW["op_ab"])
    kappa = kappa_coefficient(eta, _ROW["nu"], _ROW["mu"])
    expected_C = sc_constant(kappa, _ROW["beta"], eta, 1.0)
    assert report.C == pytest.approx(expected_C)
    assert report.amplified_dz == pytest.approx(
        expected_C * report.contraction * 0.5
    )
    assert report.kind == "strongly_convex"


def test_amp_bound_sc_zero_distance():
    eta = _row_eta()
    report = amp_bound_sc(1.0, 3, 0.0, _ROW["beta"], eta, 1.0, _ROW["nu"],
                          _ROW["mu"], _ROW["mu_g"], _ROW["op_ab"])
    assert report.amplified_dz == 0.0


def test_amp_bound_sc_beats_general_at_T10():
    eta = _row_eta()
    sc = amp_bound_sc(1.0, 10, 1.0, _ROW["beta"], eta, 1.0, _ROW["nu"],
                      _ROW["mu"], _ROW["mu_g"], _ROW["op_ab"])
    general = amp_bound_general(1.0, 10, 1.0, _ROW["beta"], eta, 1.0)
    assert sc.amplified_dz < general.amplified_dz


def test_amp_bound_sc_geometric_decay():
    eta = _row_eta()
    prev = None
    for T in range(1, 8):
        report = amp_bound_sc(1.0, T, 1.0, _ROW["beta"], eta, 1.0, _ROW["nu"],
                              _ROW["mu"], _ROW["mu_g"], _ROW["op_ab"])
        if prev is not None:
            ratio = report.amplified_dz / prev.amplified_dz
            assert ratio <= report.contraction ** 2 + 1e-12
        prev = report


def test_amp_bound_sc_phi_form_tighter():
    eta = _row_eta()
    report = amp_bound_sc(1.0, 6, 1.0, _ROW["beta"], eta, 1.0, _ROW["nu"],
                          _ROW["mu"], _ROW["mu_g"], _ROW["op_ab"])
    assert report.amplified_dz_phi <= report.amplified_dz * (1.0 + 1e-12)


def test_amp_bound_sc_propagates_bad_eta():
    with pytest.raises(EtaOutsideInterval):
        amp_bound_sc(1.0, 2, 1.0, _ROW["beta"], 0.01, 1.0, _ROW["nu"],
                     _ROW["mu"], _ROW["mu_g"], _ROW["op_ab"])


def test_first_user_sc_matches_base():
    eta = _row_eta()
    delta = 0.7
    fu = first_user_bound_sc(1.0, delta, _ROW["beta"], eta, 1.0, _ROW["nu"],
                             _ROW["mu"], _ROW["mu_g"], _ROW["op_ab"], 4)
    base = amp_bound_sc(1.0, 4, eta * delta, _ROW["beta"], eta, 1.0,
                        _ROW["nu"], _ROW["mu"], _ROW["mu_g"], _ROW["op_ab"])
    assert fu.local_dz == pytest.approx((eta * delta) ** 2 / 2.0)
    assert fu.amplified_dz == pytest.approx(base.amplified_dz)
    assert fu.total_iterations == 9  # 2 T + 1


# --------------------------------------------------------------- all users

def test_expected_inverse_L_permutation_N4():
    scheme = AllUsersScheme("permutation", 4)
    for user in range(1, 5):
        assert expected_inverse_L(scheme, user) == pytest.approx(25.0 / 48.0)


def test_expected_inverse_L_permutation_N1():
    assert expected_inverse_L(AllUsersScheme("permutation", 1), 1) == 1.0


def test_expected_inverse_L_random_stopping_N4():
    scheme = AllUsersScheme("random_stopping", 4)
    # T uniform on {3, 4}; user 1 sees L = T.
    assert expected_inverse_L(scheme, 1) == pytest.approx(7.0 / 24.0)
    # User 4 is reached only when T = 4 (L = 1); otherwise unused (1/inf = 0).
    assert expected_inverse_L(scheme, 4) == pytest.approx(0.5)


def test_expected_inverse_L_validates_user():
    scheme = AllUsersScheme("permutation", 3)
    with pytest.raises(ValueError):
        expected_inverse_L(scheme, 0)
    with pytest.raises(ValueError):
        expected_inverse_L(scheme, 4)


def test_all_users_scheme_validation():
    with pytest.raises(ValueError):
        AllUsersScheme("shuffle", 3)
    with pytest.raises(ValueError):
        AllUsersScheme("permutation", 0)


def test_all_users_bound_single_user():
    assert all_users_bound(2.0, 0.25, AllUsersScheme("permutation", 1)) == (
        pytest.approx(2.0 * 2.0 * 0.25)
    )


def test_all_users_bound_boundary_accepted():
    # alpha = 2: precondition C <= 1/(2*1) = 0.5, equality allowed.
    value = all_users_bound(2.0, 0.5, AllUsersScheme("permutation", 4))
    assert value == pytest.approx(2.0 * 2.0 * 0.5 * 25.0 / 48.0)


def test_all_users_bound_violated_precondition():
    with pytest.raises(WeakConvexityPreconditionViolated):
        all_users_bound(2.0, 0.6, AllUsersScheme("permutation", 4))


def test_all_users_bound_uses_worst_user():
    scheme = AllUsersScheme("random_stopping", 4)
    worst = max(expected_inverse_L(scheme, t) for t in range(1, 5))
    assert all_users_bound(2.0, 0.1, scheme) == pytest.approx(
        2.0 * 2.0 * 0.1 * worst
    )
