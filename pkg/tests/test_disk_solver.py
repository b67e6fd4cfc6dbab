import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soliton_lab import disk_solver as ds
from soliton_lab import manifold, radial
from soliton_lab.barriers import HypothesisError

HYP = manifold.get_metric("hyperbolic")
COR1 = manifold.cor1_metric(1.0, 2.0)

# radial shooting for div(grad u/W) = eps u/W on the hyperbolic disk, R = 2,
# phi = -0.5, eps = 0.1: value at the pole (DOP853 at rtol 1e-13, brentq on u(0))
CAPILLARY_U0 = 6.836743389023065


def _radial_dirichlet(c, R, m):
    prof = radial.integrate_bowl(manifold.hyperbolic_warping(), 2, c, R * 1.0001, 1e-12)
    ub = float(prof.evaluate(np.array([R]))[0][0])
    return lambda r: prof.evaluate(r)[0] - ub + m


# --------------------------------------------------------------------------
# grid and discretization


def test_grid_validation():
    with pytest.raises(ValueError):
        ds.solve_dirichlet(HYP, 1.0, 1.0, 0.0, (16, 64))
    with pytest.raises(ValueError):
        ds.solve_dirichlet(HYP, 1.0, 1.0, 0.0, (32, 33))
    with pytest.raises(ValueError):
        ds.solve_dirichlet(HYP, -1.0, 1.0, 0.0, (32, 32))


def test_jacobian_matches_finite_differences():
    disk = ds._Disk(COR1, 1.5, 32, 32)
    prob = ds._Problem(disk, "dirichlet", c=1.0, m=0.3)
    rng = np.random.default_rng(7)
    R, T = np.meshgrid(disk.r, disk.theta, indexing="ij")
    u = (0.3 * R**2 * np.cos(T) + 0.2 * R).ravel()
    v = rng.standard_normal(u.size)
    res, J, *_ = prob.evaluate(u, 1.0, jac=True)
    d = 1e-6
    rp = prob.evaluate(u + d * v, 1.0, jac=False)[0]
    rm = prob.evaluate(u - d * v, 1.0, jac=False)[0]
    fd = (rp - rm) / (2 * d)
    assert np.max(np.abs(J @ v - fd)) < 1e-6 * max(1.0, np.max(np.abs(fd)))


def test_grid_field_export(tmp_path):
    f = ds.solve_dirichlet(HYP, 1.0, 1.0, 0.0, (32, 32))
    csv_path, json_path = f.write(tmp_path / "disk")
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    assert data.dtype.names == ("r", "theta", "u") and len(data) == 32 * 32
    meta = json.loads(open(json_path).read())
    assert meta["grid"] == [32, 32] and meta["boundary_condition"]["type"] == "dirichlet"
    assert meta["schema"].startswith("soliton-lab/")


# --------------------------------------------------------------------------
# Dirichlet problem


def test_dirichlet_matches_radial_profile():
    f = ds.solve_dirichlet(HYP, 1.0, 3.0, 0.0, (64, 32))
    exact = _radial_dirichlet(1.0, 3.0, 0.0)(f.r)
    assert np.max(np.abs(f.u - exact[:, None])) < 1e-4
    assert f.symmetry_deviation() < 1e-10


def test_dirichlet_second_order_convergence():
    exact = _radial_dirichlet(1.0, 3.0, 0.0)
    errs = []
    for nr in (32, 64):
        f = ds.solve_dirichlet(HYP, 1.0, 3.0, 0.0, (nr, 32))
        errs.append(np.max(np.abs(f.u - exact(f.r)[:, None])))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_zero_speed_gives_constant():
    f = ds.solve_dirichlet(COR1, 0.0, 2.0, 5.0, (32, 32))
    assert np.max(np.abs(f.u - 5.0)) < 1e-12


@settings(max_examples=5, deadline=None)
@given(st.floats(-3.0, 3.0))
def test_boundary_value_shifts_solution(m):
    base = ds.solve_dirichlet(COR1, 1.0, 1.5, 0.0, (32, 32))
    moved = ds.solve_dirichlet(COR1, 1.0, 1.5, m, (32, 32))
    assert np.max(np.abs(moved.u - base.u - m)) < 1e-9


def test_maximum_principle_for_positive_speed():
    # div(grad u/W) = c/W > 0 makes u subharmonic-like: the maximum sits on the boundary
    f = ds.solve_dirichlet(COR1, 1.0, 2.0, 1.0, (48, 32))
    assert np.max(f.u) <= 1.0 + 1e-10
    assert f.center_value() < np.min(f.u[-1])


def test_initial_iterate_does_not_change_solution():
    a = ds.solve_dirichlet(COR1, 1.0, 2.0, 0.0, (32, 32))
    b = ds.solve_dirichlet(COR1, 1.0, 2.0, 0.0, (32, 32), u0=np.zeros((32, 32)))
    assert np.max(np.abs(a.u - b.u)) < 1e-9
    assert b.solver_stats["newton_iterations"] >= a.solver_stats["newton_iterations"]


def test_residual_and_stats():
    f = ds.solve_dirichlet(COR1, 1.0, 2.0, 0.0, (32, 32), 1e-10)
    assert np.max(np.abs(ds.soliton_residual(COR1, f))) <= 1e-10
    hist = f.solver_stats["residual_history"]
    assert hist[-1] <= 1e-10 and hist[-1] < hist[0]


def test_unreachable_tolerance_raises_solver_failure():
    with pytest.raises(ds.SolverFailure) as info:
        ds.solve_dirichlet(COR1, 1.0, 2.0, 0.0, (32, 32), 1e-30, max_iter=6)
    assert "residual_history" in info.value.stats


# --------------------------------------------------------------------------
# capillary problem


def test_capillary_zero_angle_is_flat():
    f = ds.solve_capillary(HYP, 2.0, 0.0, 0.5, (32, 32))
    assert np.max(np.abs(f.u)) < 1e-12


def test_capillary_matches_radial_shooting():
    errs = []
    for nr in (32, 64):
        f = ds.solve_capillary(HYP, 2.0, -0.5, 0.1, (nr, 32))
        errs.append(abs(f.center_value() - CAPILLARY_U0))
    assert errs[1] < 1e-3
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_capillary_rejects_bad_data():
    with pytest.raises(HypothesisError):
        ds.solve_capillary(HYP, 2.0, 1.0, 0.5, (32, 32))
    with pytest.raises(HypothesisError):
        ds.solve_capillary(HYP, 2.0, lambda t: 1.2 * np.cos(t), 0.5, (32, 32))
    with pytest.raises(ValueError):
        ds.solve_capillary(HYP, 2.0, 0.2, 0.0, (32, 32))


def test_capillary_uniqueness_from_different_starts():
    a = ds.solve_capillary(COR1, 1.5, -0.3, 0.5, (32, 32))
    b = ds.solve_capillary(COR1, 1.5, -0.3, 0.5, (32, 32), u0=np.full((32, 32), 3.0))
    assert np.max(np.abs(a.u - b.u)) < 1e-9


def test_capillary_monotone_in_contact_angle():
    u = ds.solve_capillary(COR1, 1.5, -0.3, 0.5, (32, 32))
    v = ds.solve_capillary(COR1, 1.5, -0.5, 0.5, (32, 32))
    assert np.all(u.u <= v.u + 1e-10)


def test_eps_u_stays_uniformly_bounded():
    bounds = [ds.solve_capillary(HYP, 2.0, -0.5, eps, (32, 32)).solver_stats["eps_u_max"]
              for eps in (1.0, 0.5, 0.25, 0.125, 0.0625)]
    assert max(bounds) <= bounds[0] + 1e-12


def test_contact_angle_identity_for_single_solve():
    # integrating the equation: eps int u/W dA = -int phi ds
    f = ds.solve_capillary(HYP, 2.0, -0.5, 0.25, (64, 64))
    d = ds._Disk(HYP, 2.0, 64, 64)
    prob = ds._Problem(d, "capillary", phi=np.full(64, -0.5))
    _, _, Wc, _, _ = prob.evaluate(f.u.ravel(), 0.25 * f.u.ravel(), jac=False)
    lhs = 0.25 * np.sum(d.vol * f.u.ravel() / Wc)
    rhs = 0.5 * np.sum(d.hb) * d.dt
    assert abs(lhs - rhs) < 1e-8 * rhs


# --------------------------------------------------------------------------
# continuation


def test_continuation_zero_angle():
    res = ds.continuation_C(HYP, 2.0, 0.0, grid=(32, 32))
    assert res.C == 0.0 and res.converged


def test_continuation_constant_and_identity():
    res = ds.continuation_C(HYP, 2.0, -0.5, grid=(64, 64))
    assert res.converged
    assert abs(res.C - 0.7207005144) < 1e-8
    assert res.identity_relative < 1e-4
    eps = [p[0] for p in res.eps_path]
    assert all(math.isclose(b, 0.5 * a) for a, b in zip(eps, eps[1:]))
    assert res.eps_path[-1][1] < 1e-7


def test_continuation_anisotropic_angle_on_pinched_metric():
    res = ds.continuation_C(COR1, 1.5, lambda t: -0.5 + 0.2 * np.cos(t), grid=(32, 32))
    assert res.converged and res.identity_relative < 1e-6


def test_isoperimetric_chain_lower_bound():
    # hyperbolic disks: L/A = coth(R/2) > 1 = (n-1)A, and C >= |phi| L/A
    res = ds.continuation_C(HYP, 2.0, -0.9, grid=(32, 32))
    ratio = ds.isoperimetric_ratio(HYP, 2.0)
    assert res.C >= 0.9 * ratio - 1e-6 and ratio >= 1.0


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0, 3.0])
def test_isoperimetric_ratio_hyperbolic(R):
    assert abs(ds.isoperimetric_ratio(HYP, R) / (1.0 / math.tanh(R / 2)) - 1.0) < 1e-7


def test_result_export():
    res = ds.continuation_C(HYP, 1.0, -0.3, grid=(32, 32))
    d = res.to_dict()
    assert d["grid"] == [32, 32] and d["converged"]
    json.dumps(d)


# --------------------------------------------------------------------------
# contact angle for a prescribed constant


def test_find_phi_trivial_and_invalid_targets():
    assert ds.find_phi_for_target_C(HYP, 1.0, 0.0) == 0.0
    with pytest.raises(HypothesisError):
        ds.find_phi_for_target_C(HYP, 1.0, 1.0)
    with pytest.raises(HypothesisError):
        ds.find_phi_for_target_C(manifold.get_metric("euclidean"), 1.0, 0.5)


def test_find_phi_hits_target():
    t = ds.find_phi_for_target_C(HYP, 1.0, 0.5)
    assert abs(t - (-0.22775509)) < 1e-6
    C = ds.continuation_C(HYP, 1.0, t, grid=(32, 32), tol=1e-7).C
    assert abs(C - 0.5) < 1e-6


def test_capillary_constant_is_odd_and_monotone():
    ts = [-0.8, -0.4, 0.4, 0.8]
    Cs = [ds.continuation_C(HYP, 1.0, t, grid=(32, 32)).C for t in ts]
    assert all(a > b for a, b in zip(Cs, Cs[1:]))
    assert abs(Cs[0] + Cs[-1]) < 1e-6 and abs(Cs[1] + Cs[2]) < 1e-6


# --------------------------------------------------------------------------
# exhaustion and comparison


def test_exhaustion_zero_speed():
    rep = ds.exhaustion_solve(HYP, 0.0, [1.5, 2.0], (32, 32))
    assert rep.sup_differences == [0.0] and rep.oracle_difference == 0.0


def test_exhaustion_matches_bowl_and_stays_sandwiched():
    rep = ds.exhaustion_solve(COR1, 1.0, [1.5, 2.5], (32, 32))
    assert rep.sandwich_ok
    hyp = ds.exhaustion_solve(HYP, 1.0, [2.0, 3.0], (32, 32))
    assert hyp.oracle_difference < 1e-4
    assert hyp.c_diff == 0.0


def test_exhaustion_inner_solutions_differ_by_constants():
    # on a rotational metric each inner solution is the bowl plus a grid-dependent shift
    rep = ds.exhaustion_solve(HYP, 1.0, [2.0, 3.0], (32, 32))
    a, b = (f.u[:32] - f.center_value() for f in rep.fields)
    assert np.max(np.abs(a - b)) < 1e-12


def test_exhaustion_rejects_unsorted_radii():
    with pytest.raises(ValueError):
        ds.exhaustion_solve(HYP, 1.0, [3.0, 2.0])


def test_comparison_identical_and_shifted():
    u = ds.solve_capillary(COR1, 1.5, -0.3, 0.5, (32, 32))
    assert ds.comparison_check(u, u, COR1) == 0.0
    shifted = ds.GridField(u.N_r, u.N_theta, u.R, u.u + 1.0, u.boundary_condition,
                           u.solver_stats, u.metric_name)
    with pytest.raises(HypothesisError):
        ds.comparison_check(shifted, u, COR1)


def test_comparison_preconditions():
    u = ds.solve_capillary(COR1, 1.5, -0.3, 0.5, (32, 32))
    v = ds.solve_capillary(COR1, 1.5, -0.5, 0.5, (32, 32))
    assert ds.comparison_check(u, v, COR1) == 0.0
    with pytest.raises(HypothesisError):
        ds.comparison_check(v, u, COR1)  # phi ordering reversed
    w = ds.solve_capillary(COR1, 1.5, -0.3, 0.25, (32, 32))
    with pytest.raises(HypothesisError):
        ds.comparison_check(u, w, COR1)
    g = ds.solve_capillary(COR1, 1.5, -0.3, 0.5, (32, 48))
    with pytest.raises(ValueError):
        ds.comparison_check(u, g, COR1)


def test_comparison_for_dirichlet_fields():
    lo = ds.solve_dirichlet(COR1, 1.0, 1.5, 0.0, (32, 32))
    hi = ds.solve_dirichlet(COR1, 1.0, 1.5, 0.5, (32, 32))
    assert ds.comparison_check(lo, hi, COR1) == 0.0
    with pytest.raises(HypothesisError):
        ds.comparison_check(hi, lo, COR1)
    c2 = ds.solve_dirichlet(COR1, 2.0, 1.5, 0.5, (32, 32))
    with pytest.raises(HypothesisError):
        ds.comparison_check(lo, c2, COR1)
