import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prandtl_toolkit.errors import GridError, ProfileError
from prandtl_toolkit.grid import Grid1D, derivative
from prandtl_toolkit.norms import b_norm, b_norm_components, decompose, omega
from prandtl_toolkit.u0 import (LdeltaOperator, OperatorParts, delta_ladder, linf_embedding_check,
                                solve_L_delta, solve_theta, split_vs_direct, theta_weighted_estimate)

from conftest import rates


def _bump_forcing(y, c=2.0, w=1.0):
    t = (y - c) / w
    return np.where(np.abs(t) < 1, np.exp(-1 / np.maximum(1 - t * t, 1e-300)), 0.0)


def test_theta_zero_forcing():
    g = Grid1D.uniform(20.0, 401)
    th = solve_theta(np.zeros(g.n), 0.5, g)
    assert np.all(th.u == 0) and th.C1 == 0


def test_theta_flat_beyond_support():
    g = Grid1D.uniform(20.0, 2001)
    y = g.nodes
    th = solve_theta(_bump_forcing(y), 1.0, g)
    assert th.u[0] == 0.0
    assert np.abs(th.u_y[y >= 3]).max() < 1e-8
    assert np.abs(th.u_yy[y >= 3]).max() < 1e-8


def test_theta_residual_second_order():
    errs = []
    for n in (501, 1001, 2001):
        g = Grid1D.uniform(20.0, n)
        y = g.nodes
        F = _bump_forcing(y) + np.exp(-y) * np.sin(y)
        th = solve_theta(F, 0.7, g)
        r = -derivative(th.u, g, 3) + 0.7 * derivative(th.u, g, 2) - F
        m = (y > 0.5) & (y < 19.5)
        errs.append(np.abs(r[m]).max())
    assert rates(errs).min() > 1.8


def test_theta_rejects_bad_input():
    g = Grid1D.uniform(5.0, 51)
    with pytest.raises(ProfileError):
        solve_theta(np.ones(g.n), 0.0, g)
    with pytest.raises(GridError):
        solve_theta(np.ones(10), 1.0, g)


def test_theta_estimate_examples():
    g = Grid1D.uniform(20.0, 2001)
    assert theta_weighted_estimate(solve_theta(np.zeros(g.n), 1.0, g), 0, 0)["ratio"] == 0.0
    with pytest.raises(GridError):
        theta_weighted_estimate(solve_theta(np.exp(-g.nodes), 1.0, g), 0, 2.0)


def test_theta_estimate_bounded_uniformly():
    g = Grid1D.uniform(20.0, 2001)
    y = g.nodes
    rng = np.random.default_rng(3)
    ratios = []
    for delta in (0.1, 0.5, 1.0, 2.0, 5.0):
        for _ in range(2):
            F = _bump_forcing(y, rng.uniform(2, 8), rng.uniform(0.5, 1.5))
            ratios.append(theta_weighted_estimate(solve_theta(F, delta, g), 0.0, 0.0)["ratio"])
    # -u''' + delta u'' = F: each term alone is at most ||F|| up to quadrature error
    assert max(ratios) <= 2.0 + 1e-6
    assert min(ratios) >= 1.0 - 1e-3


def test_theta_estimate_weighted():
    g = Grid1D.uniform(20.0, 2001)
    th = solve_theta(np.exp(-g.nodes), 1.0, g)
    est = theta_weighted_estimate(th, 1.0, 0.5)
    assert np.isfinite(est["ratio"]) and est["ratio"] < 10


def _zero_parts(n):
    z = np.zeros(n)
    return OperatorParts(z, z, z, z, z, z, z, z, z)


def test_L_delta_zero_forcing(pp):
    op = LdeltaOperator.from_profiles(pp)
    s = solve_L_delta(op, np.zeros(pp.grid.n))
    assert np.all(s.u0 == 0) and s.kappa == 0.0 and s.residual == 0.0


def test_L_delta_matches_wronskian_without_base_flow(pp):
    g = pp.grid
    F = _bump_forcing(g.nodes)
    op = LdeltaOperator(g, 1.0, 1.0, _zero_parts(g.n), pp.u_par)
    assert np.abs(solve_L_delta(op, F).u0 - solve_theta(F, 1.0, g).u).max() < 1e-8


def test_L_delta_manufactured(flow):
    from prandtl_toolkit.degree import parallel_profiles
    errs = []
    for n in (501, 1001, 2001):
        p = parallel_profiles(flow, Grid1D.uniform(30.0, n))
        y = p.grid.nodes
        u = y ** 2 * np.exp(-y)
        u2 = (2 - 4 * y + y * y) * np.exp(-y)
        u3 = (-6 + 6 * y - y * y) * np.exp(-y)
        F = -u3 + (p.v_par + 0.01) * u2 - p.v_yy * u
        op = LdeltaOperator.from_profiles(p, delta=0.01)
        errs.append(np.abs(solve_L_delta(op, F).u0 - u).max())
    assert errs[-1] < 1e-5
    assert rates(errs).min() > 1.8


def test_split_matches_direct(stack):
    parts = OperatorParts.from_layers(stack.pp, 1e-4, stack.flow, stack.euler, stack.layer1)
    op = LdeltaOperator.from_profiles(stack.pp, 1e-4, 1e-3, parts)
    y = stack.pp.grid.nodes
    assert split_vs_direct(op, y ** 2 * np.exp(-y)) <= 1e-10
    assert split_vs_direct(op, np.sin(y) * np.exp(-0.3 * y)) <= 1e-10


def test_operator_validation(pp):
    with pytest.raises(ProfileError):
        LdeltaOperator.from_profiles(pp, delta=-1.0)
    with pytest.raises(ProfileError):
        LdeltaOperator.from_profiles(pp, eps=0.0)
    with pytest.raises(GridError):
        solve_L_delta(LdeltaOperator.from_profiles(pp), np.ones(3))


def test_euler_grid_too_short(stack):
    with pytest.raises(GridError):
        OperatorParts.from_layers(stack.pp, 4.0, stack.flow, stack.euler)


def test_decompose_u_par(pp):
    u_perp, kappa = decompose(pp.u_par, pp.u_par, pp.grid)
    assert kappa == 1.0
    assert np.all(u_perp == 0)


def test_decompose_orthogonal_and_scaled(pp):
    y = pp.grid.nodes
    g = y * np.exp(-y)
    w = g - omega(g, pp.u_par, pp.grid) / omega(pp.u_par, pp.u_par, pp.grid) * pp.u_par
    assert abs(decompose(w, pp.u_par, pp.grid)[1]) < 1e-12
    u_perp, kappa = decompose(3 * pp.u_par + w, pp.u_par, pp.grid)
    assert kappa == pytest.approx(3.0, rel=1e-12)
    assert np.allclose(u_perp, w, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(0.2, 3))
def test_decompose_idempotent(pp_coarse, a, b):
    y = pp_coarse.grid.nodes
    u = a * y * y * np.exp(-b * y) + pp_coarse.u_par
    u_perp, _ = decompose(u, pp_coarse.u_par, pp_coarse.grid)
    again, k = decompose(u_perp, pp_coarse.u_par, pp_coarse.grid)
    assert abs(k) < 1e-10
    assert np.allclose(again, u_perp, atol=1e-12)


def test_b_norm_examples(pp):
    g = pp.grid
    ve = np.full(g.n, 1.2)
    assert b_norm(np.zeros(g.n), pp.u_par, g, 1e-4, ve) == 0.0
    c = b_norm_components(pp.u_par, pp.u_par, g, 1e-4, ve)
    assert c["upsilon_perp"] == 0.0
    assert c["kappa_term"] == pytest.approx(1e-4 ** 0.25)
    with pytest.raises(ProfileError):
        b_norm(pp.u_par, pp.u_par, g, 1e-4, np.zeros(g.n))


@settings(max_examples=15, deadline=None)
@given(lam=st.floats(-100, 100).filter(lambda v: abs(v) > 1e-3))
def test_b_norm_homogeneous(pp_coarse, lam):
    g = pp_coarse.grid
    y = g.nodes
    u = y * np.exp(-y) + 0.5 * pp_coarse.u_par
    ve = 1 + 0.1 * np.exp(-y)
    base = b_norm(u, pp_coarse.u_par, g, 1e-3, ve)
    assert b_norm(lam * u, pp_coarse.u_par, g, 1e-3, ve) == pytest.approx(abs(lam) * base, rel=1e-10)


@pytest.fixture(scope="module")
def ladder(stack):
    parts = OperatorParts.from_layers(stack.pp, 1e-4, stack.flow, stack.euler, stack.layer1)
    y = stack.pp.grid.nodes
    return delta_ladder(stack.pp, y ** 2 * np.exp(-y), 1e-4, parts=parts), parts


def test_delta_ladder_monotone(ladder):
    L, _ = ladder
    assert L["monotone"]
    assert all(s.residual < 1e-8 for s in L["solutions"])


def test_u0_solution_fields(ladder, stack):
    s = ladder[0]["solutions"][-1]
    assert s.u0[0] == 0.0
    assert abs(omega(s.u_perp, stack.pp.u_par, s.grid)) <= 1e-10 * np.abs(s.u0).max()
    assert "b_norm" in s.norms and s.norms["b_norm"] > 0


def test_linf_embedding(ladder, stack):
    L, parts = ladder
    s = L["solutions"][-1]
    z = solve_L_delta(LdeltaOperator.from_profiles(stack.pp), np.zeros(stack.pp.grid.n))
    assert linf_embedding_check(z, stack.pp.u_par, parts.ve_trace)["ratio"] == 0.0
    chk = linf_embedding_check(s, stack.pp.u_par, parts.ve_trace)
    assert 0 < chk["ratio"] < 1
    # the left side carries the larger power of eps
    small = linf_embedding_check(s, stack.pp.u_par, parts.ve_trace, sigma=0.5)
    assert small["lhs"] < chk["lhs"]
