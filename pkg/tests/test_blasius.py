import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prandtl_toolkit import kernels
from prandtl_toolkit.blasius import (BlasiusFlow, blasius_profiles, solve_blasius,
                                     verify_blasius_signs)
from prandtl_toolkit.errors import ProfileError, ShootingError
from prandtl_toolkit.grid import Grid1D, WeightSpec, derivative, weighted_l2_norm

from conftest import rates


@pytest.fixture(scope="module")
def fpp0_taylor():
    """f''(0) from mpmath's Taylor-series integrator and a secant root."""
    mp.mp.dps = 20

    def end(s):
        F = mp.odefun(lambda t, z: [z[1], z[2], -z[0] * z[2]], 0, [0, 0, s],
                      tol=mp.mpf(10) ** -15, degree=20)
        return F(12)[1] - 1

    return float(mp.findroot(end, (0.46, 0.48), solver="secant", tol=1e-24))


def test_far_field_condition(sol):
    assert abs(sol.f1[-1] - 1.0) <= 1e-10


def test_zero_shoot_is_trivial():
    traj = kernels.rk4_blasius(0.0, 12.0, 512)
    assert np.all(traj == 0.0)
    assert kernels.rk4_blasius_end(0.0, 12.0, 512) - 1.0 < 0


def test_shoot_value_matches_taylor_oracle(sol, fpp0_taylor):
    assert abs(sol.shoot_value - fpp0_taylor) <= 1e-8


def test_shoot_value_richardson():
    # RK4 is fourth order in the step; the extrapolated values agree with the fine one
    s = [solve_blasius(1e-12, 12.0, n).shoot_value for n in (512, 1024, 2048)]
    extrap = s[2] + (s[2] - s[1]) / 15
    assert abs(extrap - s[2]) < 1e-10
    assert abs(s[1] - s[0]) / abs(s[2] - s[1]) > 10


def test_signs(sol):
    r = verify_blasius_signs(sol)
    assert r["fpp0_positive"] and r["fppp_nonpositive"]
    assert r["fp_in_range"] and r["fpp_nonnegative"]
    assert r["tail_log_slope"] <= -4.0
    assert r["superexponential_tail"]


def test_tail_slope_regression_oracle(sol):
    eta = sol.eta_grid.nodes
    m = (eta >= 6) & (eta <= 12)
    slope = np.polyfit(eta[m], np.log(sol.f2[m]), 1)[0]
    assert slope <= -4.0
    assert slope == pytest.approx(verify_blasius_signs(sol)["tail_log_slope"], rel=1e-12)


def test_profiles_at_wall_and_far_field(sol):
    g = Grid1D.uniform(30.0, 301)
    u, v, tail = blasius_profiles(sol, 0.0, 1.0, g)
    assert u[0] == 0.0 and v[0] == 0.0
    assert abs(u[-1] - 1.0) < 1e-9
    assert tail[-1] and not tail[0]
    # literal scaling: limit (eta f' - f)/sqrt(x + x0)
    for x, x0 in ((0.0, 1.0), (0.5, 2.0)):
        _, v, _ = blasius_profiles(sol, x, x0, g, scaling="literal")
        lim = (sol.eta_max * sol.f1[-1] - sol.f[-1]) / np.sqrt(x + x0)
        assert v[-1] > 0
        assert v[-1] == pytest.approx(lim, rel=1e-6)


def test_ode_residual_second_order():
    errs = []
    for n in (512, 1024, 2048):
        s = solve_blasius(1e-12, 12.0, n)
        g = s.eta_grid
        r = derivative(s.f, g, 3) + s.f * derivative(s.f, g, 2)
        errs.append(weighted_l2_norm(r, g, WeightSpec("poly", 0.0)))
    assert errs[-1] < 1e-4
    assert rates(errs).min() > 1.8


def test_f_over_eta_at_eta_max(sol):
    # recorded value only: f(12)/12 is about 0.90 because f ~ eta - 1.2168
    ratio = sol.f[-1] / sol.eta_max
    assert ratio == pytest.approx(1 - sol.beta / sol.eta_max, abs=1e-6)


def test_self_similar_pair_is_divergence_free(flow):
    y = np.linspace(0.0, 8.0, 161)
    errs = []
    for dx in (0.02, 0.01, 0.005):
        up = flow.fields(0.3 + dx, y)["u"]
        um = flow.fields(0.3 - dx, y)["u"]
        vy = derivative(flow.fields(0.3, y)["v"], Grid1D(y), 1, accuracy=4)
        errs.append(np.abs((up - um) / (2 * dx) + vy).max())
    assert errs[-1] < 1e-4
    assert errs[-1] < errs[0]


def test_analytic_derivatives_match_stencils(flow):
    g = Grid1D.uniform(10.0, 2001)
    fl = flow.fields(0.2, g.nodes)
    for k, order in (("u_y", 1), ("u_yy", 2), ("v_y", 1)):
        base = "u" if k.startswith("u") else "v"
        assert np.abs(derivative(fl[base], g, order, 4) - fl[k]).max() < 1e-6


def test_entrainment_and_flow_validation(sol):
    f = BlasiusFlow(sol, x0=2.0)
    assert f.v_inf(0.0) == pytest.approx(sol.beta / np.sqrt(2.0))
    with pytest.raises(ProfileError):
        BlasiusFlow(sol, x0=0.0)
    with pytest.raises(ProfileError):
        BlasiusFlow(sol, ue0=0.9, scaling="literal")


def test_solver_rejects_bad_input():
    with pytest.raises(ShootingError):
        solve_blasius(0.0)
    with pytest.raises(ShootingError):
        solve_blasius(1e-8, 5.0)


@settings(max_examples=20, deadline=None)
@given(x=st.floats(0.0, 2.0), y=st.floats(0.0, 15.0))
def test_fields_respect_oleinik_signs(flow, x, y):
    fl = flow.fields(x, y)
    assert 0.0 <= fl["u"] <= 1.0 + 1e-9
    assert fl["u_y"] >= -1e-12
    assert fl["v"] >= -1e-12
