"""omega functional, (u_perp, kappa) decomposition and the Upsilon norm."""
from __future__ import annotations

import numpy as np

from .errors import ProfileError
from .grid import Grid1D, bracket, derivative, integrate
from .prandtl import chi

LOC_SCALE = 10.0


def loc_weight(y):
    return chi(np.asarray(y, dtype=float) / LOC_SCALE)


def _l2(values, grid):
    return float(np.sqrt(max(integrate(values * values, grid, method="trapezoid"), 0.0)))


def omega(g, u_par, grid: Grid1D, accuracy: int = 2) -> float:
    """omega[g] = int g'' u_par''; both second derivatives by the same stencil,
    so omega[u_par] / omega[u_par] is exactly 1."""
    g2 = derivative(g, grid, 2, accuracy)
    p2 = derivative(u_par, grid, 2, accuracy)
    return integrate(g2 * p2, grid, method="trapezoid")


def decompose(u0, u_par, grid: Grid1D, accuracy: int = 2):
    """u0 = u_perp + kappa u_par with omega[u_perp] = 0."""
    w_par = omega(u_par, u_par, grid, accuracy)
    if not w_par > 0:
        raise ProfileError(f"omega[u_par] = {w_par} must be positive")
    kappa = omega(u0, u_par, grid, accuracy) / w_par
    return np.asarray(u0, float) - kappa * np.asarray(u_par, float), float(kappa)


def upsilon_components(h, grid: Grid1D, accuracy: int = 2) -> dict:
    y = grid.nodes
    br = bracket(y)
    loc = loc_weight(y)
    return {
        "h3_bracket": _l2(derivative(h, grid, 3, accuracy) * br, grid),
        "h2_bracket": _l2(derivative(h, grid, 2, accuracy) * br, grid),
        "h1_loc": _l2(derivative(h, grid, 1, accuracy) * loc, grid),
        "h_loc": _l2(np.asarray(h, float) * loc, grid),
    }


def upsilon_norm(h, grid: Grid1D, accuracy: int = 2) -> float:
    """||h'''<y>|| + ||h''<y>|| + ||h' chi(y/10)|| + ||h chi(y/10)||."""
    return float(sum(upsilon_components(h, grid, accuracy).values()))


def b_norm_components(u0, u_par, grid: Grid1D, eps: float, ve_trace, accuracy: int = 2) -> dict:
    """Components of ||u0||_B; ve_trace is v1_e(0, sqrt(eps) y) on the grid."""
    ve = np.asarray(ve_trace, dtype=float)
    if np.any(ve <= 0):
        raise ProfileError("v1_e trace must be positive for the B norm")
    u_perp, kappa = decompose(u0, u_par, grid, accuracy)
    q = eps ** 0.25
    far = _l2(q * derivative(u0, grid, 2, accuracy) * bracket(grid.nodes) / np.sqrt(ve), grid)
    return {"upsilon_perp": upsilon_norm(u_perp, grid, accuracy), "kappa_term": q * abs(kappa),
            "far_field": far, "kappa": kappa}


def b_norm(u0, u_par, grid: Grid1D, eps: float, ve_trace, accuracy: int = 2) -> float:
    c = b_norm_components(u0, u_par, grid, eps, ve_trace, accuracy)
    return c["upsilon_perp"] + c["kappa_term"] + c["far_field"]
