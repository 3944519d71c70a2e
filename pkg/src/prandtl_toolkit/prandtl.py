"""Prandtl corrector layer: first-order forcing, implicit x-march, final cutoff."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import solve_banded

from .blasius import BlasiusFlow
from .errors import GridError, MarchError, ProfileError
from .grid import Grid1D, Grid2D, derivative, integrate

# ---------------------------------------------------------------------------
# cutoff


def _psi_derivs(t):
    """psi(t) = exp(-1/t) for t > 0 (else 0) and its first three derivatives."""
    t = np.asarray(t, dtype=float)
    out = [np.zeros_like(t) for _ in range(4)]
    m = t > 1e-3                     # below this psi and all derivatives underflow
    if np.any(m):
        s = t[m]
        p = np.exp(-1.0 / s)
        out[0][m] = p
        out[1][m] = p / s ** 2
        out[2][m] = p * (1.0 - 2.0 * s) / s ** 4
        out[3][m] = p * (6.0 * s * s - 6.0 * s + 1.0) / s ** 6
    return out


def chi_jet(y):
    """chi and its first three derivatives: 1 on [0, 1], 0 on [2, inf)."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ProfileError("cutoff argument must be nonnegative")
    a0, a1, a2, a3 = _psi_derivs(2.0 - y)
    b0, b1, b2, b3 = _psi_derivs(y - 1.0)
    A = (a0, -a1, a2, -a3)
    S = (a0 + b0, -a1 + b1, a2 + b2, -a3 + b3)
    c0 = np.where(y <= 1.0, 1.0, 0.0)
    c1 = np.zeros_like(y)
    c2 = np.zeros_like(y)
    c3 = np.zeros_like(y)
    m = (y > 1.0) & (y < 2.0)
    if np.any(m):
        s0, s1, s2, s3 = (q[m] for q in S)
        q0 = A[0][m] / s0
        q1 = (A[1][m] - q0 * s1) / s0
        q2 = (A[2][m] - 2 * q1 * s1 - q0 * s2) / s0
        q3 = (A[3][m] - 3 * q2 * s1 - 3 * q1 * s2 - q0 * s3) / s0
        c0[m], c1[m], c2[m], c3[m] = q0, q1, q2, q3
    return c0, c1, c2, c3


def chi(y):
    return chi_jet(y)[0]


# ---------------------------------------------------------------------------
# forcing f^(1)


@dataclass(frozen=True, eq=False)
class ForcingF1:
    """f^(1) on (x, y) with its ingredients kept apart."""
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    ingredients: dict

    @property
    def at_x0(self):
        return self.values[0]

    def recombined(self):
        return sum(self.ingredients.values())


def euler_wall_traces(ec, x):
    """u1_e, u1_ex and v1_eY at Y = 0 along x."""
    s = ec.sample(x, np.zeros_like(np.asarray(x, float)))
    return {"u1e": s["u"], "u1e_x": s["u_x"], "v1e_Y": s["v_Y"]}


def compute_f1(flow: BlasiusFlow, x, y, traces: dict, g_ext1, ueY0: float) -> ForcingF1:
    """First-order Prandtl forcing on the tensor grid x by y.

    traces: u1e, u1e_x, v1e_Y at Y = 0, one value per x (zeros when the
    Euler corrector is absent). g_ext1: samples over y, or over (x, y).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    X, Yy = np.meshgrid(x, y, indexing="ij")
    fl = flow.fields(X, Yy)
    u0p = fl["u"] - flow.U
    v0p = fl["v"] - flow.v_inf(X)
    tr = {}
    for k in ("u1e", "u1e_x", "v1e_Y"):
        t = np.atleast_1d(np.asarray(traces.get(k, 0.0), dtype=float))
        if t.size not in (1, x.size):
            raise GridError(f"trace {k} has {t.size} values for {x.size} x nodes")
        tr[k] = np.broadcast_to(t, x.shape)[:, None]
    g = np.asarray(g_ext1, dtype=float)
    if g.ndim == 0:
        g = np.full(X.shape, float(g))
    elif g.shape == y.shape:
        g = np.broadcast_to(g, X.shape)
    elif g.shape != X.shape:
        raise GridError("g_ext1 does not match the (x, y) grid")
    ingredients = {
        "g_ext1": np.array(g, dtype=float),
        "u1e_terms": -(u0p * tr["u1e_x"] + fl["u_x"] * tr["u1e"] + tr["v1e_Y"] * Yy * fl["u_y"]),
        "shear_terms": -(ueY0 * Yy * fl["u_x"] + v0p * ueY0),
    }
    values = ingredients["g_ext1"] + ingredients["u1e_terms"] + ingredients["shear_terms"]
    return ForcingF1(x, y, values, ingredients)


# ---------------------------------------------------------------------------
# march


def _three_point(nodes):
    hm = nodes[1:-1] - nodes[:-2]
    hp = nodes[2:] - nodes[1:-1]
    d1 = (-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp)))
    d2 = (2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp)))
    return d1, d2


def apply_three_point(u, nodes):
    """(u_y, u_yy) at interior nodes with the march stencils; edges by 2nd-order
    one-sided formulas."""
    d1, d2 = _three_point(nodes)
    uy = np.empty_like(u)
    uyy = np.empty_like(u)
    uy[..., 1:-1] = d1[0] * u[..., :-2] + d1[1] * u[..., 1:-1] + d1[2] * u[..., 2:]
    uyy[..., 1:-1] = d2[0] * u[..., :-2] + d2[1] * u[..., 1:-1] + d2[2] * u[..., 2:]
    g = Grid1D(nodes, "graded" if not np.allclose(np.diff(nodes), nodes[1]) else "uniform")
    for k, arr in ((1, uy), (2, uyy)):
        full = derivative(u, g, k)
        arr[..., 0] = full[..., 0]
        arr[..., -1] = full[..., -1]
    return uy, uyy


def _solve_coupled(nodes, c0, cy, conv, p, q, rhs_m, rhs_c, u_bot, u_top):
    """Banded solve for interleaved (u_0, v_0, u_1, v_1, ...).

    momentum (interior i): c0 u_i + cy v_i + p (conv D1 u - D2 u)_i = rhs_m
    continuity (i >= 1):   (v_i - v_{i-1})/h_i + q (u_i + u_{i-1})/2 = rhs_c
    plus u_0 = u_bot, v_0 = 0, u_{n-1} = u_top.
    """
    n = nodes.size
    N = 2 * n
    ab = np.zeros((6, N))           # (l, u) = (3, 2): ab[2 + r - c, c]
    rhs = np.zeros(N)

    def put(r, c, val):
        ab[2 + r - c, c] += val

    put(0, 0, 1.0)
    rhs[0] = u_bot
    put(1, 1, 1.0)
    d1, d2 = _three_point(nodes)
    for i in range(1, n - 1):
        r = 2 * i
        k = i - 1
        put(r, 2 * (i - 1), p * (conv[i] * d1[0][k] - d2[0][k]))
        put(r, 2 * i, c0[i] + p * (conv[i] * d1[1][k] - d2[1][k]))
        put(r, 2 * (i + 1), p * (conv[i] * d1[2][k] - d2[2][k]))
        put(r, 2 * i + 1, cy[i])
        rhs[r] = rhs_m[i]
    put(2 * (n - 1), 2 * (n - 1), 1.0)
    rhs[2 * (n - 1)] = u_top
    h = np.diff(nodes)
    for i in range(1, n):
        r = 2 * i + 1
        put(r, 2 * i + 1, 1.0 / h[i - 1])
        put(r, 2 * i - 1, -1.0 / h[i - 1])
        put(r, 2 * i, 0.5 * q)
        put(r, 2 * i - 2, 0.5 * q)
        rhs[r] = rhs_c[i]
    z = solve_banded((3, 2), ab, rhs)
    return z[0::2], z[1::2]


@dataclass(frozen=True, eq=False)
class PrandtlLayer:
    i: int
    grid: Grid2D
    u: np.ndarray
    v: np.ndarray           # normalised with v(x, 0) = 0
    u_x: np.ndarray         # scheme-consistent x derivative
    u_y: np.ndarray
    u_yy: np.ndarray
    I: np.ndarray           # int_0^y u
    scheme: str
    substeps: np.ndarray
    report: dict = field(default_factory=dict)

    @property
    def up_bar(self):
        return self.u - self.u[:, :1]

    @property
    def vp_decay(self):
        """v normalised to vanish at the top of the grid."""
        return self.v - self.v[:, -1:]

    def decay_rate(self, y_lo=2.0):
        """Fitted M with |u_y| ~ exp(-M y) beyond y_lo (x = 0 trace)."""
        y = self.grid.y_grid.nodes
        a = np.abs(self.u_y[0])
        m = (y > y_lo) & (a > 1e-13)
        if m.sum() < 4:
            return float("inf")
        return float(-np.polyfit(y[m], np.log(a[m]), 1)[0])


def _base_fields(flow, x, y):
    fl = flow.fields(np.full_like(y, x), y)
    return fl["u"], fl["u_x"], fl["u_y"], fl["v"]


def _initial_slope(flow, y, u0, f0, dbot, dtop):
    """u_x and v at x = 0 from the layer equation on the initial trace."""
    ub, ubx, uby, vb = _base_fields(flow, 0.0, y)
    uy, uyy = apply_three_point(u0, y)
    rhs = f0 - ubx * u0 - vb * uy + uyy
    w, v = _solve_coupled(y, ub, uby, vb, 0.0, 1.0, rhs, np.zeros_like(y), dbot, dtop)
    return w, v


def _check_oleinik(ub, uby):
    if np.any(ub[1:] <= 0) or uby[0] <= 0:
        raise ProfileError("base profile violates ubar > 0 for y > 0 or ubar_y(0) > 0")


def march_prandtl_layer(flow: BlasiusFlow, forcing, bc_bottom, init, grid: Grid2D,
                        top_value=None, scheme: str = "bdf1", i: int = 1,
                        max_halvings: int = 10, growth_limit: float = 1e6) -> PrandtlLayer:
    """March the linearized Prandtl layer with v(x, 0) = 0 in x.

    forcing: (nx, ny) samples (or ForcingF1). bc_bottom: u(x, 0) per x node.
    init: u(0, y). top_value: u(x, y_max), default 0. Each step solves the
    coupled (u, v) system: momentum at nodes, box-scheme continuity between
    nodes, backward differences in x.
    """
    if scheme not in ("bdf1", "bdf2"):
        raise MarchError(f"unknown scheme {scheme!r}")
    f = forcing.values if isinstance(forcing, ForcingF1) else np.asarray(forcing, float)
    x = grid.x_nodes
    y = grid.y_grid.nodes
    nx, ny = grid.shape
    if f.shape != (nx, ny):
        raise GridError(f"forcing shape {f.shape} does not match grid {(nx, ny)}")
    bot = np.broadcast_to(np.asarray(bc_bottom, float), (nx,)).copy()
    top = np.zeros(nx) if top_value is None else np.broadcast_to(np.asarray(top_value, float), (nx,)).copy()
    u0 = np.asarray(init, dtype=float)
    if u0.shape != (ny,):
        raise GridError("initial trace does not match the y grid")
    if abs(u0[0] - bot[0]) > 1e-12 * max(1.0, abs(bot[0])):
        raise ProfileError("initial data does not match the bottom value at the corner")

    U = np.empty((nx, ny))
    V = np.empty((nx, ny))
    UX = np.empty((nx, ny))
    U[0] = u0
    dbot = np.gradient(bot, x, edge_order=2)
    dtop = np.gradient(top, x, edge_order=2)
    UX[0], V[0] = _initial_slope(flow, y, u0, f[0], dbot[0], dtop[0])
    V[0] -= V[0, 0]
    subs = np.zeros(nx, dtype=int)

    for j in range(1, nx):
        x0, x1 = x[j - 1], x[j]
        for halv in range(max_halvings + 1):
            m = 2 ** halv
            ok = True
            u_prev, u_prev2, h_prev = U[j - 1], (U[j - 2] if j >= 2 else None), (x[j - 1] - x[j - 2] if j >= 2 else None)
            for s in range(1, m + 1):
                xs = x0 + (x1 - x0) * s / m
                w = s / m
                fs = (1 - w) * f[j - 1] + w * f[j]
                bs = (1 - w) * bot[j - 1] + w * bot[j]
                ts = (1 - w) * top[j - 1] + w * top[j]
                dx = (x1 - x0) / m
                ub, ubx, uby, vb = _base_fields(flow, xs, y)
                _check_oleinik(ub, uby)
                if scheme == "bdf2" and u_prev2 is not None and abs(h_prev - dx) < 1e-12 * dx:
                    k, hist = 1.5, (2.0 * u_prev - 0.5 * u_prev2)
                else:
                    k, hist = 1.0, u_prev
                c0 = k * ub / dx + ubx
                rhs_m = fs + ub * hist / dx
                hc = hist / dx
                rhs_c = np.zeros(ny)
                rhs_c[1:] = 0.5 * (hc[1:] + hc[:-1])
                un, vn = _solve_coupled(y, c0, uby, vb, 1.0, k / dx, rhs_m, rhs_c, bs, ts)
                if not np.all(np.isfinite(un)) or np.max(np.abs(un)) > growth_limit * max(1.0, np.max(np.abs(u_prev))):
                    ok = False
                    break
                u_prev2, h_prev = u_prev, dx
                u_prev = un
                kk, hh = k, hist
            if ok:
                break
        else:
            raise MarchError(f"march unstable at x = {x1} after {max_halvings} halvings")
        U[j] = un
        V[j] = vn - vn[0]          # the solve leaves v(x, 0) at round-off
        UX[j] = (kk * un - hh) / dx
        subs[j] = m

    uy, uyy = apply_three_point(U, y)
    Iint = cumulative_trapezoid(U, y, axis=1, initial=0.0)
    layer = PrandtlLayer(i, grid, U, V, UX, uy, uyy, Iint, scheme, subs)
    layer.report.update(layer_report(layer, flow, f, bot))
    return layer


def layer_residual(layer: PrandtlLayer, flow: BlasiusFlow, f):
    """Momentum residual of the stored layer with its own derivative arrays."""
    x = layer.grid.x_nodes
    y = layer.grid.y_grid.nodes
    X, Yy = np.meshgrid(x, y, indexing="ij")
    fl = flow.fields(X, Yy)
    r = (fl["u"] * layer.u_x + layer.u * fl["u_x"] + fl["u_y"] * layer.v
         + fl["v"] * layer.u_y - layer.u_yy - f)
    return r


def layer_report(layer: PrandtlLayer, flow, f, bot) -> dict:
    r = layer_residual(layer, flow, f)
    dx = np.diff(layer.grid.x_nodes)[:, None]
    h = np.diff(layer.grid.y_grid.nodes)[None, :]
    box = (layer.v[:, 1:] - layer.v[:, :-1]) / h + 0.5 * (layer.u_x[:, 1:] + layer.u_x[:, :-1])
    return {
        "momentum_sup": float(np.abs(r[1:, 1:-1]).max()),
        "divergence_box_sup": float(np.abs(box).max()),
        "bottom_gap": float(np.abs(layer.u[:, 0] - bot).max()),
        "top_abs": float(np.abs(layer.u[:, -1]).max()),
        "max_substeps": int(layer.substeps.max()),
    }


def initial_trace_jet(y, u1e_00: float, f00: float, f_y00=None, ubar_xy00: float = 0.0):
    """(u, u_y, u_yy) of u(0, y) = (A + B y + D y^3) e^-y.

    u(0, 0) = -u1_e(0, 0) and the layer equation holds at the corner
    (-u_yy(0, 0) = f(0, 0)). With f_y00 given, D also zeroes the
    y-derivative of the equation at the corner (u_yyy = u ubar_xy - f_y),
    which keeps the x = 0 trace of v free of a log singularity at the wall.
    Otherwise D = 0.
    """
    A = -float(u1e_00)
    B = 0.5 * (A + float(f00))
    D = 0.0
    if f_y00 is not None:
        D = (-float(f_y00) + A * float(ubar_xy00) - 3.0 * B + A) / 6.0
    y = np.asarray(y, dtype=float)
    e = np.exp(-y)
    P = A + B * y + D * y ** 3
    P1 = B + 3.0 * D * y ** 2
    P2 = 6.0 * D * y
    return P * e, (P1 - P) * e, (P2 - 2.0 * P1 + P) * e


def initial_trace(y, u1e_00: float, f00: float, f_y00=None, ubar_xy00: float = 0.0):
    return initial_trace_jet(y, u1e_00, f00, f_y00, ubar_xy00)[0]


def corner_compatibility(layer: PrandtlLayer, f0) -> float:
    """Gap in the layer equation at (0, 0), where it reduces to -u_yy = f."""
    return float(abs(-layer.u_yy[0, 0] - f0[0]))


# ---------------------------------------------------------------------------
# final-layer cutoff


@dataclass(frozen=True, eq=False)
class CutoffLayer:
    eps: float
    un_p: np.ndarray
    vn_p: np.ndarray
    un_x: np.ndarray
    un_y: np.ndarray
    un_yy: np.ndarray
    vn_y: np.ndarray
    error_En: np.ndarray
    terms: dict
    chi: np.ndarray


def apply_final_cutoff(layer: PrandtlLayer, eps: float, f_n, flow: BlasiusFlow) -> CutoffLayer:
    """u^n = chi(sqrt(eps) y) u + sqrt(eps) chi' int_0^y u, v^n = chi v, and
    the error E^(n) the cutoff leaves in the layer equation."""
    if eps <= 0:
        raise ProfileError("eps must be positive")
    y = layer.grid.y_grid.nodes
    se = np.sqrt(eps)
    if y[-1] < 2.0 / se:
        raise GridError(f"y_max = {y[-1]} does not contain the cutoff support 2/sqrt(eps) = {2 / se:.4g}")
    x = layer.grid.x_nodes
    c0, c1, c2, c3 = (np.broadcast_to(c, layer.u.shape) for c in chi_jet(se * y))
    u, v, I = layer.u, layer.v, layer.I
    uy, uyy, ux = layer.u_y, layer.u_yy, layer.u_x
    un = c0 * u + se * c1 * I
    vn = c0 * v
    un_x = c0 * ux - se * c1 * v          # I_x = -v
    un_y = c0 * uy + 2 * se * c1 * u + eps * c2 * I
    un_yy = c0 * uyy + 3 * se * c1 * uy + 3 * eps * c2 * u + eps * se * c3 * I
    vn_y = c0 * (-ux) + se * c1 * v
    X, Yy = np.meshgrid(x, y, indexing="ij")
    fl = flow.fields(X, Yy)
    f_n = np.broadcast_to(np.asarray(f_n, dtype=float), u.shape)
    terms = {
        "outer_forcing": -(1 - c0) * f_n,
        "ubar_v": -fl["u"] * se * c1 * v,
        "ubar_x_int": fl["u_x"] * se * c1 * I,
        "vbar_u": 2 * fl["v"] * se * c1 * u,
        "vbar_int": eps * fl["v"] * c2 * I,
        "u_y": -3 * se * c1 * uy,
        "u": -3 * eps * c2 * u,
        "int": -eps * se * c3 * I,
    }
    E = sum(terms.values())
    return CutoffLayer(eps, un, vn, un_x, un_y, un_yy, vn_y, E, terms, c0[0].copy())


def cutoff_error_direct(cut: CutoffLayer, flow: BlasiusFlow, layer: PrandtlLayer, f_n):
    """E^(n) straight from its definition with the cut-off fields."""
    x = layer.grid.x_nodes
    y = layer.grid.y_grid.nodes
    X, Yy = np.meshgrid(x, y, indexing="ij")
    fl = flow.fields(X, Yy)
    return (fl["u"] * cut.un_x + cut.un_p * fl["u_x"] + fl["v"] * cut.un_y
            + cut.vn_p * fl["u_y"] - cut.un_yy - f_n)


# ---------------------------------------------------------------------------
# diagnostics on the base flow


def oleinik_bounds(flow: BlasiusFlow, grid: Grid2D, y0: float = 1.0) -> dict:
    x = grid.x_nodes
    y = grid.y_grid.nodes
    ys = y[y <= y0]
    X, Yy = np.meshgrid(x, ys, indexing="ij")
    fl = flow.fields(X, Yy)
    out = {k: float(np.abs(fl[k]).max()) for k in ("u", "v", "u_y", "u_yy", "u_x")}
    out["min_u_y"] = float(fl["u_y"].min())
    out["m0_positive"] = bool(out["min_u_y"] > 0)
    return out


def corner_derivatives(flow: BlasiusFlow, h: float, y_max: float = 4.0, accuracy: int = 2):
    """Stencil values of ubar_yy and ubar_yyy at (0, 0) from samples with spacing h."""
    g = Grid1D.uniform(y_max, int(round(y_max / h)) + 1)
    u = flow.fields(0.0, g.nodes)["u"]
    return float(derivative(u, g, 2, accuracy)[0]), float(derivative(u, g, 3, accuracy)[0])


def integral_condition(flow: BlasiusFlow, y_grid: Grid1D, u1e_00: float, f0, v1_trace) -> float:
    """Solvability gap at x = 0 for the layer-1 data.

    ubar_y(0) u1_e(0,0) E(0) - int ubar E (f - r) with E = exp(-int_1^y vbar)
    and r = v1 ubar_y - ubar v1_y.
    """
    y = y_grid.nodes
    fl = flow.fields(0.0, y)
    cv = cumulative_trapezoid(fl["v"], y, initial=0.0)
    E = np.exp(-(cv - np.interp(1.0, y, cv)))
    v1y = derivative(v1_trace, y_grid, 1)
    r = v1_trace * fl["u_y"] - fl["u"] * v1y
    return float(fl["u_y"][0] * u1e_00 * E[0] - integrate(fl["u"] * E * (f0 - r), y_grid))
