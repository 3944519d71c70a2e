"""Composite approximation (u_s, v_s, P_s) and its scaled Navier-Stokes residual."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import ConfigError, GridError
from .grid import Grid2D
from .pipeline import LayerConfig, LayerStack, build_layers
from .prandtl import CutoffLayer, apply_final_cutoff


def forcing_profile(spec: dict | None, y, eps: float) -> dict:
    """g^(u) components on y. spec: {"family": "exp" | "zero", "amplitude": c}.

    Only the first-order boundary-layer component g^{u,1}_{ext,p} is modelled;
    it enters the u equation with weight sqrt(eps).
    """
    y = np.asarray(y, dtype=float)
    spec = spec or {"family": "zero"}
    bad = sorted(set(spec) - {"family", "amplitude"})
    if bad:
        raise ConfigError(f"unknown forcing keys: {bad}")
    fam = spec.get("family", "zero")
    if fam == "zero":
        g1 = np.zeros_like(y)
    elif fam == "exp":
        g1 = float(spec.get("amplitude", 1.0)) * np.exp(-y)
    else:
        raise ConfigError(f"unknown forcing family {fam!r}")
    return {"g_u1_p": g1, "u": np.sqrt(eps) * g1, "v": np.zeros_like(y)}


# ---------------------------------------------------------------------------
# assembly


@dataclass(eq=False)
class ExpansionState:
    eps: float
    n: int
    N0: float
    grid: Grid2D
    us: np.ndarray
    vs: np.ndarray
    Ps: np.ndarray
    pieces: dict = field(repr=False)
    derivs: dict = field(repr=False)
    cutoff: CutoffLayer | None = None


def _zeros(shape):
    return np.zeros(shape)


def assemble(stack: LayerStack, eps: float, n: int = 1, N0: float = 1.0) -> ExpansionState:
    """u_s = u0_e + u0_p + sqrt(eps)(u1_e + u1_p), v_s = v0_p + v1_e + sqrt(eps) v1_p.

    Prandtl layers live on the layer-1 (x, y) grid; Euler fields are sampled
    at Y = sqrt(eps) y. n = 0 keeps only u0_e + u0_p and v0_p + v1_e.
    """
    if n not in (0, 1):
        raise ConfigError("only n = 0 and n = 1 are constructible; higher layers must be supplied")
    if eps <= 0:
        raise ConfigError("eps must be positive")
    lg = stack.layer1.grid
    x = lg.x_nodes
    y = lg.y_grid.nodes
    se = np.sqrt(eps)
    Ymax_e = stack.euler.grid.y_grid.y_max
    if se * y[-1] > Ymax_e:
        raise GridError(f"Euler strip Y_max = {Ymax_e} does not cover sqrt(eps) y_max = "
                        f"{se * y[-1]:.4g}; use Y_max >= {np.ceil(se * y[-1])}")
    if abs(stack.euler.grid.L - lg.L) > 1e-12:
        raise GridError("Euler and Prandtl x ranges differ")
    X, Yy = np.meshgrid(x, y, indexing="ij")
    Y = se * Yy
    fl = stack.flow.fields(X, Yy)
    v_inf = stack.flow.v_inf(X)
    U0 = stack.flow.U
    ue, ueY, ueYY = stack.shear(Y, 2)
    ev = stack.euler.sample(X, Y)
    # the wall trace of v1_e is the entrainment velocity; take it exactly so v_s(x, 0) = 0
    ev["v"] = np.where(Y == 0, v_inf, ev["v"])

    pieces = {
        "u0_e": ue, "u0_p": fl["u"] - U0, "v0_p": fl["v"] - v_inf, "v1_e": ev["v"],
    }
    d = {
        # u-fields: value, x, y, yy, xx
        "u": [fl["u"] - U0 + ue, fl["u_x"], fl["u_y"] + se * ueY, fl["u_yy"] + eps * ueYY, fl["u_xx"]],
        "v": [fl["v"] + (ev["v"] - v_inf)],
        "v_y": fl["v_y"] + se * ev["v_Y"],
        "P_x": _zeros(X.shape),
    }
    cut = None
    if n >= 1:
        cut = apply_final_cutoff(stack.layer1, eps, stack.f1.values, stack.flow)
        un_xx = np.gradient(cut.un_x, x, axis=0, edge_order=2)
        pieces.update({"u1_e": ev["u"], "u1_p": cut.un_p, "v1_p": cut.vn_p, "P1_e": None})
        add = [ev["u"] + cut.un_p, ev["u_x"] + cut.un_x, se * ev["u_Y"] + cut.un_y,
               eps * ev["u_YY"] + cut.un_yy, ev["u_xx"] + un_xx]
        d["u"] = [a + se * b for a, b in zip(d["u"], add)]
        d["v"] = [d["v"][0] + se * cut.vn_p]
        d["v_y"] = d["v_y"] + se * cut.vn_y
        d["P_x"] = se * ev["P_x"]
        P = _p1e_sample(stack, X, Y)
        pieces["P1_e"] = P
        Ps = se * P
    else:
        Ps = _zeros(X.shape)
    us = d["u"][0]
    vs = d["v"][0]
    return ExpansionState(eps, n, N0, lg, us, vs, Ps, pieces, d, cut)


def _p1e_sample(stack, X, Y):
    e = stack.euler
    k = min(3, e.grid.x_nodes.size - 1)
    sp = RectBivariateSpline(e.grid.x_nodes, e.Y, e.P1e, kx=k, ky=3)
    return sp.ev(X, np.minimum(Y, e.Y[-1]))


# ---------------------------------------------------------------------------
# residual


@dataclass(frozen=True, eq=False)
class ResidualReport:
    eps: float
    n: int
    r_u_l2: float
    r_u_sup: float
    r_v_l2: float
    r_v_sup: float
    r_div_l2: float
    r_div_sup: float
    extent: dict
    r_u: np.ndarray = field(repr=False)

    def row(self) -> dict:
        return {"eps": self.eps, "r_u_l2": self.r_u_l2, "r_u_sup": self.r_u_sup,
                "r_v_l2": self.r_v_l2, "r_v_sup": self.r_v_sup, "r_div": self.r_div_sup}


def _l2(r, x, y):
    return float(np.sqrt(np.trapezoid(np.trapezoid(r * r, y, axis=1), x)))


def ns_residual(state: ExpansionState, g_ext: dict | None = None) -> ResidualReport:
    """Residuals of the scaled Navier-Stokes equations on x nodes j >= 1.

    The u equation and the divergence use per-layer derivative fields;
    the v equation uses centred differences of the assembled v_s.
    """
    eps = state.eps
    x = state.grid.x_nodes
    y = state.grid.y_grid.nodes
    u, ux, uy, uyy, uxx = state.derivs["u"]
    v = state.derivs["v"][0]
    gu = 0.0 if g_ext is None else np.broadcast_to(g_ext["u"], u.shape)
    r_u = u * ux + v * uy + state.derivs["P_x"] - uyy - eps * uxx - gu

    # each layer pair is divergence-free on its own, so this checks the re-summation
    r_div = ux + state.derivs["v_y"]

    vx = np.gradient(v, x, axis=0, edge_order=2)
    vy_fd = np.gradient(v, y, axis=1, edge_order=2)
    vyy = np.gradient(vy_fd, y, axis=1, edge_order=2)
    vxx = np.gradient(vx, x, axis=0, edge_order=2)
    Py = np.gradient(state.Ps, y, axis=1, edge_order=2)
    gv = 0.0 if g_ext is None else np.broadcast_to(g_ext["v"], u.shape) / np.sqrt(eps)
    r_v = u * vx + v * vy_fd + Py / eps - vyy - eps * vxx - gv

    sl = (slice(1, None), slice(None))
    ri = (slice(1, None), slice(1, -1))
    return ResidualReport(
        eps, state.n,
        _l2(r_u[sl], x[1:], y), float(np.abs(r_u[sl]).max()),
        _l2(r_v[ri], x[1:], y[1:-1]), float(np.abs(r_v[ri]).max()),
        _l2(r_div[sl], x[1:], y), float(np.abs(r_div[sl]).max()),
        {"x_min": float(x[1]), "x_max": float(x[-1]), "y_max": float(y[-1])},
        r_u,
    )


# ---------------------------------------------------------------------------
# sweeps


def _fit(eps, vals):
    e = np.log(np.asarray(eps, float))
    v = np.log(np.asarray(vals, float))
    return float(np.polyfit(e, v, 1)[0])


def sweep_layer_config(eps_list, base: LayerConfig | None = None, h: float = 0.02) -> LayerConfig:
    """Layer config whose y range holds the cutoff support for every eps."""
    base = base or LayerConfig()
    # y_max a multiple of h keeps a node at y = 1 for the kernel anchor
    ny = int(np.ceil(max(40.0, 2.5 / np.sqrt(min(eps_list))) / h)) + 1
    y_max = (ny - 1) * h
    Y_needed = np.sqrt(max(eps_list)) * y_max
    Y_max = max(base.Y_max, float(np.ceil(Y_needed)))
    return LayerConfig(**{**base.to_dict(), "y_max": float(y_max), "ny": ny, "Y_max": Y_max})


def residual_sweep(eps_list=(4e-3, 2e-3, 1e-3, 5e-4), n: int = 1, theory_exponent: float | None = None,
                   cfg: LayerConfig | None = None, stack: LayerStack | None = None,
                   N0: float = 1.0) -> dict:
    """u-momentum residual across eps with fitted log-log slopes.

    The layer-1 march is eps-independent and is done once on the largest
    domain; only the cutoff and assembly change with eps.
    """
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    if len(eps_list) < 2:
        raise ConfigError("residual sweep needs at least two eps values")
    if stack is None:
        stack = build_layers(cfg or sweep_layer_config(eps_list))
    reports = []
    for eps in eps_list:
        st = assemble(stack, eps, n, N0)
        g = forcing_profile({"family": "exp", "amplitude": stack.forcing_c},
                            st.grid.y_grid.nodes, eps) if n >= 1 else None
        reports.append(ns_residual(st, g))
    theory = (n + 1) / 2 if theory_exponent is None else float(theory_exponent)
    slopes = {k: _fit(eps_list, [getattr(r, k) for r in reports])
              for k in ("r_u_sup", "r_u_l2")}
    return {
        "eps": eps_list, "reports": reports, "slopes": slopes,
        "theory_exponent": theory,
        "lower_bound_exponent": (n - 1 - 2 * N0) / 2,
        "max_r_div": max(r.r_div_sup for r in reports),
        "stack": stack,
    }


def inviscid_limit_table(stack: LayerStack, eps_list) -> dict:
    """Sup gaps between the n = 1 and n = 0 truncations across eps.

    This checks the internal ordering of the expansion; the remainder
    itself is never solved.
    """
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    if len(eps_list) < 3:
        raise ConfigError("inviscid limit table needs at least three eps values")
    rows = []
    for eps in eps_list:
        s1 = assemble(stack, eps, 1)
        s0 = assemble(stack, eps, 0)
        gu = float(np.abs(s1.us - s0.us).max())
        gv = float(np.abs(s1.vs - s0.vs).max())
        base_gap = float(np.abs(s1.us - s1.pieces["u0_e"] - s1.pieces["u0_p"]).max())
        rows.append({"eps": eps, "gap_u": gu, "gap_v": gv, "u_minus_leading": base_gap})
    out = {"rows": rows,
           "note": "gaps between truncations of the expansion; the remainder is not solved"}
    for k in ("gap_u", "gap_v", "u_minus_leading"):
        vals = [r[k] for r in rows]
        out["slope_" + k] = _fit(eps_list, vals) if all(v > 0 for v in vals) else 0.0
    return out

