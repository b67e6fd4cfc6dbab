import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soliton_lab import manifold
from soliton_lab.manifold import (WARPINGS, constant_profile, curvature_pinch_report, get_metric,
                                  get_profile, get_warping, inverse_r_profile, solve_jacobi)

# f'' = (30/sqrt(r^2+1))^2 f, f(0)=0, f'(0)=1; 40-digit mpmath Taylor integration
ALPHA30 = {10.0: 6.1141203036552683721618e37, 25.0: 7.8883483688656455648608e49,
           50.0: 1.1901874541747182803278e59}
ALPHA30_FP50 = 7.2596584107982329584149e58


def test_log_helpers_agree_and_stay_finite():
    x = np.linspace(0.01, 30.0, 200)
    assert np.allclose(manifold.log_sinh(x), np.log(np.sinh(x)), rtol=1e-13, atol=0)
    ref = np.logaddexp(x, -x) - math.log(2.0)
    assert np.allclose(manifold.log_cosh(x), ref, rtol=1e-10, atol=0)
    big = np.array([800.0, 5e4])
    assert np.all(np.isfinite(manifold.log_sinh(big)))
    assert np.allclose(manifold.log_cosh(big), big - math.log(2.0))


def test_smoothstep7_is_c3_at_the_ends():
    s0, s1 = manifold.smoothstep7(np.array([0.0, 1.0]))[0]
    assert (s0, s1) == (0.0, 1.0)
    out = manifold.smoothstep7(np.array([0.0, 1.0]))
    for deriv in out[1:4]:
        assert np.allclose(deriv, 0.0, atol=1e-14)


@pytest.mark.parametrize("k", [0.0, 0.5, 1.0, 3.0])
def test_constant_curvature_jacobi(k):
    w = solve_jacobi(constant_profile(k), 6.0, 1e-10)
    r = np.linspace(1e-3, 6.0, 600)
    exact = r if k == 0 else np.sinh(k * r) / k
    assert np.max(np.abs(w.f(r) / exact - 1.0)) < 1e-8
    assert w.status == "complete"


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 4.0))
def test_jacobi_riccati_identity(k):
    # q = f/f' solves q' = 1 - a^2 q^2; the evaluator must be consistent with it
    w = solve_jacobi(constant_profile(k), 5.0, 1e-10)
    r = np.linspace(0.2, 4.9, 95)
    h = 1e-5
    fd = (w.ratio(r + h) - w.ratio(r - h)) / (2 * h)
    assert np.max(np.abs(fd - w.ratio_d1(r))) < 1e-6
    assert np.allclose(w.ratio(r), np.tanh(k * r) / k, rtol=1e-8)


def test_inverse_r_oracle_and_overflow_free_growth():
    w = solve_jacobi(inverse_r_profile(30.0), 50.0, 1e-10)
    for r, val in ALPHA30.items():
        assert abs(float(w.f(r)) / val - 1.0) < 1e-8
    assert abs(float(w.fp(50.0)) / ALPHA30_FP50 - 1.0) < 1e-8


def test_power_law_report_prefers_indicial_exponent():
    w = solve_jacobi(inverse_r_profile(30.0), 50.0, 1e-10)
    rep = manifold.power_law_report(w, 30.0, np.array([40.0, 50.0]))
    assert rep["matches"] == "indicial"
    assert rep["discrepancy"]
    assert abs(rep["observed_exponent"] - rep["indicial_exponent"]) < 0.05


def test_overflow_truncates_with_status():
    w = solve_jacobi(constant_profile(20.0), 60.0, 1e-8)
    assert w.status.startswith("overflow at r =")
    assert w.r_max < 60.0
    with pytest.raises(ValueError):
        w.f(59.0)


def test_log_space_solve_matches_doubly_exponential_closed_form():
    exact = manifold.sinh_sinh_warping()
    w = solve_jacobi(manifold.sinh_sinh_profile(), 41.0, 1e-10, log_space=True)
    r = np.linspace(0.5, 41.0, 400)
    assert np.max(np.abs(w.ratio(r) / exact.ratio(r) - 1.0)) < 1e-9
    assert np.max(np.abs(w.log_f(r) / exact.log_f(r) - 1.0)) < 1e-9
    assert np.all(np.isfinite(w.log_f(r)))


def test_jacobi_rejects_bad_input():
    with pytest.raises(ValueError):
        solve_jacobi(constant_profile(1.0), -1.0)
    with pytest.raises(ValueError):
        solve_jacobi(constant_profile(1.0), 1.0, tol=1.0)
    nan = manifold.CurvatureProfile(lambda r: np.full_like(r, np.nan), lambda r: r * 0, "nan")
    with pytest.raises(ValueError):
        solve_jacobi(nan, 1.0)


@pytest.mark.parametrize("name", sorted(WARPINGS))
def test_closed_forms_solve_their_jacobi_equation(name):
    w = get_warping(name)
    r = np.linspace(0.01, 8.0, 400)
    J = solve_jacobi(w.profile, 8.0, 1e-11, log_space=(name == "sinh-sinh"))
    assert np.max(np.abs(J.ratio(r) / w.ratio(r) - 1.0)) < 1e-8
    assert np.max(np.abs(J.log_f(r) - w.log_f(r))) < 1e-8


@pytest.mark.parametrize("name", sorted(WARPINGS))
def test_quotient_derivatives_match_finite_differences(name):
    w = get_warping(name)
    r = np.linspace(0.5, 7.5, 200)
    h = 1e-5
    assert np.max(np.abs((w.ratio(r + h) - w.ratio(r - h)) / (2 * h) - w.ratio_d1(r))) < 1e-8
    assert np.max(np.abs((w.ratio_d1(r + h) - w.ratio_d1(r - h)) / (2 * h) - w.ratio_d2(r))) < 1e-8


def test_example_pairs_are_ordered():
    r = np.linspace(0.0, 60.0, 3001)
    b1 = manifold.pair1_b_profile()
    assert np.all(b1(r) >= 1.0 - 1e-12)
    a2 = manifold.pair2_a_profile()
    assert np.all(a2(r) <= 2.0 + 1e-12) and np.all(a2(r) > 0)


def test_pair1_splice_is_smooth():
    b = manifold.pair1_b_profile()
    for seam in (2.0, 4.0):
        h = 1e-6
        left, right = b(np.array([seam - h])), b(np.array([seam + h]))
        assert abs(left[0] - right[0]) < 1e-5
        dl, dr = b.deriv(np.array([seam - h])), b.deriv(np.array([seam + h]))
        assert abs(dl[0] - dr[0]) < 1e-4


def test_tabulated_profile_roundtrip(tmp_path):
    r = np.linspace(0.0, 5.0, 51)
    path = tmp_path / "a.csv"
    np.savetxt(path, np.column_stack([r, 1.0 + 0.0 * r]), delimiter=",", header="r,a", comments="")
    p = manifold.load_profile_csv(path)
    w = solve_jacobi(p, 4.0, 1e-9)
    assert abs(float(w.f(3.0)) / math.sinh(3.0) - 1.0) < 1e-7


def test_registries_reject_unknown_names():
    for fn in (get_warping, get_metric, get_profile):
        with pytest.raises(ValueError):
            fn("no-such-thing")


def test_cor1_pinch_and_laplace_comparison():
    met = manifold.cor1_metric(1.0, 2.0)
    rep = curvature_pinch_report(met, constant_profile(1.0), constant_profile(2.0))
    assert rep.holds
    r = np.linspace(0.1, 6.0, 60)
    t = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
    R, T = np.meshgrid(r, t, indexing="ij")
    lap = met.h_r(R, T) / met.h(R, T)
    lo, hi = met.lower.dlog(R), met.upper.dlog(R)
    assert np.all(lo <= lap + 1e-12) and np.all(lap <= hi + 1e-12)


def test_cor1_theta_derivatives_match_finite_differences():
    met = manifold.cor1_metric(1.0, 2.0)
    R, T = np.meshgrid(np.linspace(0.3, 4.0, 12), np.linspace(0.1, 6.0, 17), indexing="ij")
    h = 1e-6
    fd_t = (met.h(R, T + h) - met.h(R, T - h)) / (2 * h)
    fd_rt = (met.h_r(R, T + h) - met.h_r(R, T - h)) / (2 * h)
    fd_tt = (met.h_theta(R, T + h) - met.h_theta(R, T - h)) / (2 * h)
    scale = np.abs(met.h(R, T))
    assert np.max(np.abs(fd_t - met.h_theta(R, T)) / scale) < 1e-7
    assert np.max(np.abs(fd_rt - met.h_rtheta(R, T)) / scale) < 1e-7
    assert np.max(np.abs(fd_tt - met.h_thetatheta(R, T)) / scale) < 1e-6


def test_cor2_pinch_report():
    met = manifold.cor2_metric(30.0, 40.0, r_max=10.0)
    rep = curvature_pinch_report(met, inverse_r_profile(30.0), inverse_r_profile(40.0), r_max=8.0)
    assert rep.holds


def test_pinch_report_detects_violation():
    met = manifold.cor1_metric(1.0, 2.0)
    rep = curvature_pinch_report(met, constant_profile(1.5), constant_profile(2.0))
    assert not rep.holds
    assert rep.max_K_plus_a2 > 1.0
