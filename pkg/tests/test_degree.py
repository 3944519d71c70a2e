import warnings
from dataclasses import replace

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad, quad

from prandtl_toolkit.blasius import BlasiusFlow
from prandtl_toolkit.degree import (apply_L_par, build_kernel_basis, calibrate_forcing, coercivity_probe,
                                    coercivity_ratio, compute_K, compute_n_frak, degree, degree_report,
                                    kernel_singular_values, parallel_profiles, scalar_identity_gap,
                                    tail_antiderivative, verify_cg_identity)
from prandtl_toolkit.grid import Grid1D, derivative, integrate
from prandtl_toolkit.norms import omega, upsilon_norm

from conftest import rates


def test_K_anchor_and_wall(pp):
    K = compute_K(pp)
    i1 = np.argmin(np.abs(pp.grid.nodes - 1.0))
    assert pp.grid.nodes[i1] == pytest.approx(1.0, abs=1e-12)
    assert K[i1] == pytest.approx(pp.u_par[i1], rel=1e-14)
    assert K[0] == 0.0


def test_K_closed_form_tail(pp):
    # v = c y / 3 below 3 and c beyond, so int_1^y v = c (y - 1) - 2c/3 for y > 3
    c = 1.1
    y = pp.grid.nodes
    v = np.where(y < 3, c * y / 3, c)
    syn = replace(pp, v_par=v)
    K = compute_K(syn)
    m = y > 3
    ref = pp.u_par[m] * np.exp(-c * (y[m] - 1) + 2 * c / 3)
    assert np.abs(K[m] / ref - 1).max() < 1e-5


def test_tail_antiderivative_examples():
    g = Grid1D.uniform(20.0, 2001)
    assert np.all(tail_antiderivative(np.zeros(g.n), g) == 0)
    I = tail_antiderivative(np.exp(-g.nodes), g)
    assert I[0] == pytest.approx(-1 + np.exp(-20.0), abs=1e-8)


def test_tail_antiderivative_round_trip():
    errs = []
    for n in (401, 801, 1601):
        g = Grid1D.uniform(30.0, n)
        f = np.exp(-g.nodes) * np.cos(g.nodes)
        I = tail_antiderivative(f, g)
        errs.append(np.abs(derivative(I, g, 1) - f).max())
    assert rates(errs).min() > 1.8


def test_tail_antiderivative_warns_without_decay():
    g = Grid1D.uniform(5.0, 101)
    with pytest.warns(UserWarning):
        tail_antiderivative(np.ones(g.n), g)


def test_degree_of_zero(pp):
    assert degree(np.zeros(pp.grid.n), compute_K(pp), pp.grid) == 0.0


def test_degree_of_narrow_bump_double_integral(pp):
    y = pp.grid.nodes
    K = compute_K(pp)
    bump = lambda z: np.exp(-0.5 * ((z - 2.0) / 0.1) ** 2)
    d = degree(bump(y), K, pp.grid)
    Ki = lambda t: np.interp(t, y, K)
    ref, _ = dblquad(lambda z, t: -Ki(t) * bump(z), 0, 20, lambda t: t, lambda t: 20.0, epsabs=1e-10)
    assert d == pytest.approx(ref, rel=1e-5)


def test_degree_annihilates_range(flow):
    vals = []
    for n in (1001, 2001, 4001):
        p = parallel_profiles(flow, Grid1D.uniform(20.0, n))
        y = p.grid.nodes
        t = (y - 5.0) / 2.0
        u = np.where(np.abs(t) < 1, np.exp(-1 / np.maximum(1 - t * t, 1e-300)), 0.0)
        vals.append(abs(degree(apply_L_par(u, p), compute_K(p), p.grid)) / upsilon_norm(u, p.grid))
    assert vals[-1] < 1e-6
    assert rates(vals).min() > 1.8


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-100, 100), b=st.floats(-100, 100))
def test_degree_linear(pp_coarse, a, b):
    p = pp_coarse
    y = p.grid.nodes
    K = compute_K(p)
    f, g = np.exp(-y) * np.sin(y), y * np.exp(-2 * y)
    lhs = degree(a * f + b * g, K, p.grid)
    rhs = a * degree(f, K, p.grid) + b * degree(g, K, p.grid)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(a) + abs(b))


def test_degree_report(pp):
    f = np.exp(-2 * pp.grid.nodes)
    r = degree_report(f, pp, n_frak=0.5)
    assert r.value == pytest.approx(degree(f, compute_K(pp), pp.grid), rel=1e-12)
    assert r.n_frak == 0.5


def test_L_par_kills_u_par(pp):
    r = apply_L_par(pp.u_par, pp)
    assert np.abs(r[3:-3]).max() < 1e-3


def test_L_par_of_constant(pp):
    # only round-off of the h^-3 stencil weights survives
    assert np.allclose(apply_L_par(np.ones(pp.grid.n), pp), -pp.v_yy, atol=1e-8)


def test_L_par_symbolic_oracle(flow):
    s = sp.symbols("y")
    expr = s ** 3 * sp.exp(-s)
    d2 = sp.lambdify(s, sp.diff(expr, s, 2))
    d3 = sp.lambdify(s, sp.diff(expr, s, 3))
    errs = []
    for n in (1001, 2001):
        p = parallel_profiles(flow, Grid1D.uniform(20.0, n))
        y = p.grid.nodes
        u = y ** 3 * np.exp(-y)
        ref = -d3(y) + p.v_par * d2(y) - u * p.v_yy
        errs.append(np.abs(apply_L_par(u, p, accuracy=4) - ref).max())
    assert errs[-1] < 1e-5
    assert errs[0] / errs[1] > 12


def test_kernel_basis_asymptotics(flow):
    p = parallel_profiles(flow, Grid1D.uniform(20.0, 4001))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        kb = build_kernel_basis(p)
    d = kb.diagnostics
    assert abs(d["tail_log_slope"] / p.v_par_inf - 1) < 0.05
    # the first node converges to the analytic wall limit of u_par a(y)
    assert abs(d["first_node_value"] / d["limit_value"] - 1) < 0.01


def test_kernel_basis_wall_limit_not_minus_one(pp):
    # recorded: the wall limit is -u(1)^2 g(0) / u'(0), about -0.418 for this base flow
    kb = build_kernel_basis(pp)
    A = kb.diagnostics["A"]
    assert kb.diagnostics["limit_value"] == pytest.approx(-A * pp.u_y[0])
    assert -0.43 < kb.diagnostics["limit_value"] < -0.40


def test_kernel_elements_residual_second_order(flow):
    res = {"ut": [], "up": []}
    for n in (1001, 2001, 4001):
        p = parallel_profiles(flow, Grid1D.uniform(20.0, n))
        kb = build_kernel_basis(p)
        y = p.grid.nodes
        m = (y >= y[1]) & (y <= 10)
        for k, u in (("ut", kb.u_tilde_s), ("up", kb.u_p_elem)):
            r = apply_L_par(u, p) * np.sqrt(1 + y * y)
            res[k].append(np.sqrt(np.trapezoid(r[m] ** 2, y[m])))
    assert rates(res["ut"]).min() > 1.8
    assert rates(res["up"]).min() > 1.5


def test_kernel_dimension_three(flow):
    s4 = []
    small = []
    for n in (201, 401, 801):
        p = parallel_profiles(flow, Grid1D.uniform(10.0, n))
        s = kernel_singular_values(p, 4)
        small.append(s[2])
        s4.append(s[3])
    assert small[-1] < small[0]
    assert small[-1] < 1e-3
    assert min(s4) > 0.1


def test_omega_u_par_positive(pp):
    w = omega(pp.u_par, pp.u_par, pp.grid)
    assert 0 < w < np.inf


def test_coercivity_rejects_kernel_direction(pp):
    assert coercivity_ratio(pp.u_par, pp) is None
    assert coercivity_ratio(np.zeros(pp.grid.n), pp) is None


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_coercivity_ratio_homogeneous(pp_coarse, seed):
    from prandtl_toolkit.degree import random_probe
    u = random_probe(pp_coarse.grid.nodes, np.random.default_rng(seed))
    r1 = coercivity_ratio(u, pp_coarse)
    r10 = coercivity_ratio(10 * u, pp_coarse)
    if r1 is not None:
        assert r10 == pytest.approx(r1, rel=1e-10)


def test_coercivity_probe_stable(flow, pp_coarse, pp):
    a = coercivity_probe(pp_coarse, 200, 42)
    b = coercivity_probe(pp, 200, 42)
    assert a["min_ratio"] > 0 and b["min_ratio"] > 0
    assert abs(b["min_ratio"] / a["min_ratio"] - 1) < 0.2
    assert sum(a["histogram"]) == 200


def test_coercivity_probe_worker_split_is_deterministic(pp_coarse):
    a = coercivity_probe(pp_coarse, 120, 7)
    b = coercivity_probe(pp_coarse, 120, 7, workers=4)
    assert np.array_equal(a["ratios"], b["ratios"])


def test_coercivity_probe_needs_trials(pp_coarse):
    with pytest.raises(ValueError):
        coercivity_probe(pp_coarse, 50)


def test_n_frak_constant_shear_no_euler(flat_stack):
    st_ = flat_stack
    nf = compute_n_frak(st_.pp, st_.g_ext1, st_.shear.ueY0, st_.shear.ue0, None)
    assert st_.shear.ueY0 == 0.0
    assert nf["n_frak"] == pytest.approx(nf["int_K_g"], rel=1e-14)
    assert nf["euler_missing"]


def test_int_K_g_oracle_and_calibration(pp):
    K = compute_K(pp)
    y = pp.grid.nodes
    c = calibrate_forcing(K, pp.grid)
    ref, _ = quad(lambda t: np.interp(t, y, K) * c * np.exp(-t), 0, 20, limit=400, epsabs=1e-12)
    nf = compute_n_frak(pp, c * np.exp(-y), 0.0, 1.0)
    assert nf["int_K_g"] == pytest.approx(ref, rel=1e-5)
    assert abs(nf["int_K_g"]) >= 1
    assert abs(nf["int_K_g"]) / c < 1     # c - 1 would not do
    assert abs(integrate(K * (c - 1) * np.exp(-y), pp.grid)) < 1


def test_scalar_identity_second_order(flow):
    gaps = [abs(scalar_identity_gap(parallel_profiles(flow, Grid1D.uniform(20.0, n))))
            for n in (1001, 2001, 4001)]
    assert rates(gaps).min() > 1.8


def test_cg_identity_zero_data(pp):
    z = np.zeros(pp.grid.n)
    out = verify_cg_identity(pp, {"g_ext1": z, "u1e_terms": z, "shear_terms": z},
                             {"u": z, "u_y": z, "u_yy": z}, {"u1e": 0.0, "v1e_Y": 0.0}, 0.0)
    assert out["lhs"] == 0.0 and out["rhs"] == 0.0


def test_cg_identity_synthetic_traces(sol):
    flow = BlasiusFlow(sol, 1.0, 0.9)
    p = parallel_profiles(flow, Grid1D.uniform(20.0, 2001))
    from prandtl_toolkit.prandtl import compute_f1, initial_trace_jet
    y = p.grid.nodes
    g = 2 * np.exp(-y)
    tr = {"u1e": 0.3, "u1e_x": -0.2, "v1e_Y": 0.2}
    f1 = compute_f1(flow, [0.0], y, tr, g, 0.1)
    parts = {k: v[0] for k, v in f1.ingredients.items()}
    fy = derivative(f1.values[0], p.grid, 1, 4)[0]
    u, uy, uyy = initial_trace_jet(y, 0.3, f1.values[0, 0], fy, flow.fields(0.0, 0.0)["u_xy"])
    out = verify_cg_identity(p, parts, {"u": u, "u_y": uy, "u_yy": uyy}, tr, 0.1)
    assert out["gap"] <= 5 * out["quad_error"]
