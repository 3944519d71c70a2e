"""Acceptance criteria, one function each, returning JSON-ready results."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .blasius import BlasiusFlow, solve_blasius, verify_blasius_signs
from .degree import (apply_L_par, build_kernel_basis, coercivity_probe, compute_K,
                     compute_n_frak, degree, parallel_profiles, scalar_identity_gap,
                     verify_cg_identity)
from .euler import euler_residual, make_shear, solve_v1e
from .expansion import residual_sweep
from .grid import Grid1D, Grid2D, bracket, derivative
from .norms import decompose, omega, upsilon_norm
from .pipeline import LayerConfig, build_layers
from .prandtl import corner_derivatives, initial_trace_jet
from .u0 import LdeltaOperator, OperatorParts, delta_ladder, solve_L_delta, solve_theta


@dataclass
class CriterionResult:
    id: int
    name: str
    checks: dict
    values: dict = field(default_factory=dict)
    runtime: float = 0.0        # kept out of bundles

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return {"id": self.id, "name": self.name, "passed": self.passed,
                "checks": {k: bool(v) for k, v in self.checks.items()}, "values": _plain(self.values)}


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


def _rates(errs):
    e = np.asarray(errs, float)
    return np.log2(e[:-1] / e[1:])


def _timed(fn):
    def wrapper(*a, **kw):
        t = time.perf_counter()
        res = fn(*a, **kw)
        res.runtime = time.perf_counter() - t
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ---------------------------------------------------------------------------
# shared data

_CACHE: dict = {}


def _blasius():
    if "sol" not in _CACHE:
        _CACHE["sol"] = solve_blasius(1e-10, 12.0)
    return _CACHE["sol"]


def _stack():
    if "stack" not in _CACHE:
        _CACHE["stack"] = build_layers(LayerConfig(), _blasius())
    return _CACHE["stack"]


def clear_cache():
    _CACHE.clear()


def fpp0_oracle(eta_max=12.0, rtol=1e-12):
    """f''(0) by adaptive DOP853 shooting with brentq."""
    def end(s):
        r = solve_ivp(lambda t, z: [z[1], z[2], -z[0] * z[2]], (0.0, eta_max), [0.0, 0.0, s],
                      method="DOP853", rtol=rtol, atol=1e-14)
        return r.y[1, -1] - 1.0
    return brentq(end, 0.3, 0.6, xtol=1e-14)


def _pp(n, y_max=20.0):
    flow = BlasiusFlow(_blasius())
    return parallel_profiles(flow, Grid1D.uniform(y_max, n))


# ---------------------------------------------------------------------------
# criteria


@_timed
def criterion_1():
    t = time.perf_counter()
    sol = solve_blasius(1e-10, 12.0)
    elapsed = time.perf_counter() - t
    signs = verify_blasius_signs(sol)
    oracle = fpp0_oracle()
    ratio = float(sol.f[-1] / sol.eta_max)
    checks = {
        "fp_end": abs(sol.f1[-1] - 1.0) <= 1e-8,
        "fp_range": signs["min_fp"] >= 0 and signs["max_fp"] <= 1 + 1e-8,
        "fpp_nonnegative": signs["min_fpp"] >= -1e-10,
        "fppp_nonpositive": signs["max_fppp"] <= 1e-10,
        "fpp0_oracle": abs(sol.shoot_value - oracle) <= 1e-6,
        "f_over_eta": 0.98 <= ratio <= 1.02,
        "runtime": elapsed < 1.0,
    }
    return CriterionResult(1, "Blasius integrity", checks, {
        "fpp0": sol.shoot_value, "fpp0_oracle": oracle, "fp_end_gap": abs(sol.f1[-1] - 1.0),
        "f_over_eta_at_12": ratio, "beta": sol.beta, **{k: signs[k] for k in
                                                         ("min_fp", "max_fp", "min_fpp", "max_fppp")}})


@_timed
def criterion_2():
    sol = _blasius()
    vals = {x0: sol.beta / np.sqrt(x0) for x0 in (0.5, 1.0, 2.0)}
    flows = {x0: float(BlasiusFlow(sol, x0, scaling="literal").v_inf(0.0)) for x0 in vals}
    checks = {f"x0={x0}": v > 0 and abs(flows[x0] - v) < 1e-12 for x0, v in vals.items()}
    return CriterionResult(2, "Positive entrainment", checks,
                           {"entrainment": {str(k): v for k, v in vals.items()}})


@_timed
def criterion_3():
    flow = BlasiusFlow(_blasius())
    hs = [0.04, 0.02, 0.01, 0.005]
    d = [corner_derivatives(flow, h) for h in hs]
    u2 = [abs(a) for a, _ in d]
    u3 = [abs(b) for _, b in d]
    f2 = [u2[i] / u2[i + 1] for i in range(3)]
    f3 = [u3[i] / u3[i + 1] for i in range(3)]
    checks = {"u_yy_factor": min(f2) >= 3.0, "u_yyy_factor": min(f3) >= 3.0}
    return CriterionResult(3, "Corner flatness", checks,
                           {"h": hs, "u_yy0": u2, "u_yyy0": u3, "factors_yy": f2, "factors_yyy": f3})


def _kernel_residuals(ns=(1001, 2001, 4001, 8001)):
    out = {"h": [], "u_par": [], "u_tilde_s": []}
    for n in ns:
        pp = _pp(n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            kb = build_kernel_basis(pp)
        y = pp.grid.nodes
        h = y[1]
        m = (y >= h) & (y <= pp.grid.y_max / 2)
        for name, u in (("u_par", pp.u_par), ("u_tilde_s", kb.u_tilde_s)):
            r = apply_L_par(u, pp) * bracket(y)
            out[name].append(float(np.sqrt(np.trapezoid((r * r)[m], y[m]))))
        out["h"].append(float(h))
        out["basis"] = kb
    return out


@_timed
def criterion_4():
    res = _kernel_residuals()
    r1 = _rates(res["u_par"])
    r2 = _rates(res["u_tilde_s"])
    checks = {"u_par_rate": bool(r1.min() >= 1.8), "u_tilde_s_rate": bool(r2.min() >= 1.8)}
    return CriterionResult(4, "Kernel membership", checks,
                           {"h": res["h"], "res_u_par": res["u_par"], "res_u_tilde_s": res["u_tilde_s"],
                            "rates_u_par": r1, "rates_u_tilde_s": r2})


@_timed
def criterion_5():
    pp = _pp(8001)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        kb = build_kernel_basis(pp)
    dg = kb.diagnostics
    first = dg["first_node_value"]
    checks = {
        "first_node_near_minus_one": abs(first + 1.0) <= 0.05,
        "tail_slope": abs(dg["tail_log_slope"] - pp.v_par_inf) <= 0.05 * pp.v_par_inf,
    }
    return CriterionResult(5, "Kernel asymptotics", checks, {
        "first_node_value": first, "analytic_limit": dg["limit_value"],
        "first_node_vs_limit": abs(first / dg["limit_value"] - 1.0),
        "tail_log_slope": dg["tail_log_slope"], "v_par_inf": pp.v_par_inf})


def bump_suite(count=20, seed=7):
    """Smooth compactly supported test functions exp(-1/(1-t^2)) on [c-w, c+w]."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        c = rng.uniform(2.0, 8.0)
        w = rng.uniform(0.8, 1.8)
        a = rng.normal()
        out.append((c, w, a))
    return out


def bump(y, c, w, a):
    t = (y - c) / w
    out = np.zeros_like(y)
    m = np.abs(t) < 1
    out[m] = a * np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


@_timed
def criterion_6():
    suite = bump_suite()
    ns = (1001, 2001, 4001)
    table = []
    for n in ns:
        pp = _pp(n)
        K = compute_K(pp)
        y = pp.grid.nodes
        row = []
        for c, w, a in suite:
            u = bump(y, c, w, a)
            row.append(abs(degree(apply_L_par(u, pp), K, pp.grid)) / upsilon_norm(u, pp.grid))
        table.append(row)
    t = np.array(table)
    # per-bump values can cross zero between grids, so monotonicity is
    # asked of the suite maximum and each bump only has to end below its start
    mx = t.max(axis=1)
    checks = {"finest_below_1e-4": bool(mx[-1] <= 1e-4),
              "max_decreasing": bool(np.all(mx[1:] < mx[:-1])),
              "each_decreased": bool(np.all(t[-1] < t[0]))}
    return CriterionResult(6, "Degree annihilates range", checks,
                           {"max_ratio_per_grid": t.max(axis=1), "min_rate": float(_rates(t.max(axis=1)).min())})


@_timed
def criterion_7(seed=42, trials=200, workers=1):
    t0 = time.perf_counter()
    out = {}
    for n in (1001, 2001):
        out[n] = coercivity_probe(_pp(n), trials, seed, workers=workers)
    elapsed = time.perf_counter() - t0
    a, b = out[1001]["min_ratio"], out[2001]["min_ratio"]
    change = abs(b - a) / a
    checks = {"positive": a > 0 and b > 0, "stable": change < 0.25, "runtime": elapsed < 60}
    return CriterionResult(7, "Coercivity probe", checks, {
        "min_ratio_coarse": a, "min_ratio_fine": b, "relative_change": change,
        "seed": seed, "trials": trials, "histogram_fine": out[2001]["histogram"]})


def compact_forcing(y, k=8):
    out = np.zeros_like(y)
    m = (y > 1) & (y < 3)
    out[m] = ((y[m] - 1) * (3 - y[m])) ** k
    return out


@_timed
def criterion_8():
    res, flat, gaps, hs = [], [], [], []
    for n in (1001, 2001, 4001):
        g = Grid1D.uniform(20.0, n)
        y = g.nodes
        F = compact_forcing(y)
        th = solve_theta(F, 1.0, g)
        r = -derivative(th.u, g, 3) + derivative(th.u, g, 2) - F
        m = (y >= 0.5) & (y <= g.y_max - 0.5)
        res.append(float(np.abs(r[m]).max()))
        flat.append(float(np.abs(th.u_y[y >= 4]).max()))
        pp = _pp(n)
        z = np.zeros(n)
        parts = OperatorParts(z, z, z, z, z, z, z, z, z)
        op = LdeltaOperator(g, 1.0, 1.0, parts, pp.u_par)
        gaps.append(float(np.abs(solve_L_delta(op, F).u0 - th.u).max()))
        hs.append(float(y[1]))
    rates = _rates(res)
    checks = {"residual_rate": bool(rates.min() >= 1.8), "flat_beyond_support": max(flat) <= 1e-8,
              "cross_validation": gaps[1] <= 1e-8}
    return CriterionResult(8, "Wronskian solver", checks, {
        "h": hs, "theta_residual": res, "rates": rates, "max_u_y_beyond_4": flat,
        "wronskian_vs_matrix": gaps, "cross_validation_h": hs[1]})


def _u0_forcing(y):
    return y ** 2 * np.exp(-y)


def _ladder():
    if "ladder" not in _CACHE:
        st = _stack()
        parts = OperatorParts.from_layers(st.pp, 1e-4, st.flow, st.euler, st.layer1)
        _CACHE["ladder"] = delta_ladder(st.pp, _u0_forcing(st.pp.grid.nodes), 1e-4, parts=parts)
    return _CACHE["ladder"]


@_timed
def criterion_9():
    L = _ladder()
    checks = {"monotone_gaps": L["monotone"]}
    return CriterionResult(9, "delta-limit stability", checks, {
        "deltas": L["deltas"], "gaps": L["gaps"], "kappa": [s.kappa for s in L["solutions"]]})


@_timed
def criterion_10():
    st = _stack()
    g = st.pp.grid
    sol = _ladder()["solutions"][-1]
    w = omega(sol.u_perp, st.pp.u_par, g)
    norm = float(np.sqrt(np.trapezoid(sol.u0 ** 2, g.nodes)))
    _, k_par = decompose(st.pp.u_par, st.pp.u_par, g)
    checks = {"omega_u_perp": abs(w) <= 1e-10 * norm, "kappa_u_par": abs(k_par - 1.0) <= 1e-10}
    return CriterionResult(10, "Decomposition exactness", checks,
                           {"omega_u_perp": w, "u0_l2": norm, "kappa_of_u_par": k_par, "kappa": sol.kappa})


def harmonic_errors(levels=((21, 41), (41, 81), (81, 161), (161, 321)), k=np.pi, L=1.0, Y_max=2.0):
    """Laplace test: v = e^{-kY} sin(kx) with u = -e^{-kY} cos(kx)."""
    errs, box = [], []
    for nx, ny in levels:
        Yg = Grid1D.uniform(Y_max, ny)
        shear = make_shear("exp_approach", 0.0, 1.0, Yg)
        g2 = Grid2D.uniform(L, nx, Yg)
        x, Y = g2.x_nodes, Yg.nodes
        ec = solve_v1e(shear, np.sin(k * x), g2,
                       side_bcs=(np.zeros_like(Y), np.sin(k * L) * np.exp(-k * Y)),
                       u_side=-np.exp(-k * Y), top_bc=np.exp(-k * Y_max) * np.sin(k * x))
        exact = np.exp(-k * Y)[None, :] * np.sin(k * x)[:, None]
        errs.append(float(np.abs(ec.v1e - exact).max()))
        box.append(euler_residual(ec)["divergence_box_sup"])
    return errs, box


@_timed
def criterion_11():
    errs, box = harmonic_errors()
    rates = _rates(errs)
    ec = _stack().euler
    div = euler_residual(ec)["divergence_box_sup"]
    checks = {"rate": bool(np.all(np.abs(rates - 2.0) <= 0.2)), "divergence": max(div, max(box)) <= 1e-8}
    return CriterionResult(11, "Euler elliptic solver", checks,
                           {"errors": errs, "rates": rates, "divergence_box_sup": div,
                            "harmonic_divergence": box})


def _cg_inputs(stack):
    pp = stack.pp
    y = pp.grid.nodes
    parts = {k: v[0] for k, v in stack.f1.ingredients.items()}
    u, uy, uyy = initial_trace_jet(y, *stack.extras["corner"])
    s0 = stack.euler.sample(np.zeros(1), np.zeros(1))
    traces = {"u1e": float(s0["u"][0]), "v1e_Y": float(s0["v_Y"][0])}
    return parts, {"u": u, "u_y": uy, "u_yy": uyy}, traces


@_timed
def criterion_12():
    gaps, hs = [], []
    for n in (1001, 2001, 4001, 8001):
        pp = _pp(n)
        gaps.append(abs(scalar_identity_gap(pp)))
        hs.append(float(pp.grid.nodes[1]))
    rates = _rates(gaps)
    st = _stack()
    parts, trace, traces = _cg_inputs(st)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cg = verify_cg_identity(st.pp, parts, trace, traces, st.shear.ueY0)
    checks = {"scalar_rate": bool(rates.min() >= 1.8), "identity_gap": cg["gap"] <= 5 * cg["quad_error"]}
    return CriterionResult(12, "Positivity identity", checks, {
        "h": hs, "scalar_gaps": gaps, "rates": rates, "lhs": cg["lhs"], "rhs": cg["rhs"],
        "gap": cg["gap"], "quad_error": cg["quad_error"]})


def nondegeneracy_sweep(amplitudes=(0.02, 0.05, 0.1)):
    rows = []
    sol = _blasius()
    for a in amplitudes:
        cfg = LayerConfig(shear_amplitude=a)
        st = build_layers(cfg, sol)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            nf = compute_n_frak(st.pp, st.g_ext1, st.shear.ueY0, st.shear.ue0, st.euler)
        rows.append({"amplitude": a, "delta_s": st.shear.delta_s, "c": st.forcing_c,
                     "int_K_g": nf["int_K_g"], "n_frak": nf["n_frak"],
                     "gap": abs(nf["n_frak"] - nf["int_K_g"])})
    return rows


@_timed
def criterion_13():
    rows = nondegeneracy_sweep()
    ds = np.array([r["delta_s"] for r in rows])
    gap = np.array([r["gap"] for r in rows])
    C = float(np.dot(ds, gap) / np.dot(ds, ds))        # gap = C delta_s, least squares
    rel = np.abs(gap / (C * ds) - 1.0)
    checks = {"nondegenerate": all(abs(r["int_K_g"]) >= 1.0 for r in rows),
              "linear_in_delta_s": bool(rel.max() <= 0.25)}
    return CriterionResult(13, "Non-degeneracy calibration", checks,
                           {"rows": rows, "fit_C": C, "max_relative_deviation": float(rel.max())})


@_timed
def criterion_14(theory_exponent=None):
    t = time.perf_counter()
    R = residual_sweep(theory_exponent=theory_exponent)
    elapsed = time.perf_counter() - t
    slope = R["slopes"]["r_u_sup"]
    checks = {"slope": abs(slope - R["theory_exponent"]) <= 0.3, "divergence": R["max_r_div"] <= 1e-8,
              "runtime": elapsed < 300}
    return CriterionResult(14, "Residual rates", checks, {
        "eps": R["eps"], "r_u_sup": [r.r_u_sup for r in R["reports"]],
        "r_u_l2": [r.r_u_l2 for r in R["reports"]], "r_div": [r.r_div_sup for r in R["reports"]],
        "slope_sup": slope, "slope_l2": R["slopes"]["r_u_l2"], "theory_exponent": R["theory_exponent"],
        "lower_bound_exponent": R["lower_bound_exponent"]})


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 15)}
