"""Kernel of L_par, the degree functional and the non-degeneracy quantity."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .blasius import BlasiusFlow
from .errors import ProfileError
from .grid import Grid1D, bracket, cumulative, derivative, integrate, stencil_triplets
from .norms import decompose, upsilon_norm


@dataclass(frozen=True, eq=False)
class ParallelProfiles:
    """x = 0 traces of the leading layer with their exact y-derivatives."""
    grid: Grid1D
    u_par: np.ndarray
    v_par: np.ndarray
    u_y: np.ndarray
    u_yy: np.ndarray
    u_yyy: np.ndarray
    u_x: np.ndarray
    v_y: np.ndarray
    v_yy: np.ndarray
    v_xx: np.ndarray
    v_par_inf: float
    u_inf: float


def parallel_profiles(flow: BlasiusFlow, grid: Grid1D) -> ParallelProfiles:
    y = grid.nodes
    fl = flow.fields(np.zeros_like(y), y)
    pp = ParallelProfiles(grid, fl["u"], fl["v"], fl["u_y"], fl["u_yy"], fl["u_yyy"], fl["u_x"],
                          fl["v_y"], fl["v_yy"], fl["v_xx"], float(flow.v_inf(0.0)), flow.U)
    if np.any(pp.u_par[1:] <= 0) or pp.u_y[0] <= 0:
        raise ProfileError("u_par must be positive for y > 0 with u_par'(0) > 0")
    return pp


def _qmethod(grid):
    return "simpson" if grid.is_uniform else "trapezoid"


def anchored_v_integral(pp: ParallelProfiles, anchor=1.0):
    """int_anchor^y v_par at every node."""
    g = pp.grid
    if np.min(np.abs(g.nodes - anchor)) > 1e-12:
        warnings.warn(f"no grid node at y = {anchor}; anchor value interpolated", stacklevel=2)
    c = cumulative(pp.v_par, g, _qmethod(g))
    return c - np.interp(anchor, g.nodes, c)


def compute_K(pp: ParallelProfiles):
    """K(y) = u_par exp(-int_1^y v_par)."""
    return pp.u_par * np.exp(-anchored_v_integral(pp))


def tail_antiderivative(f, grid: Grid1D, warn_tol=1e-8):
    """I_y[f] = -int_y^inf f, truncated at y_max."""
    f = np.asarray(f, dtype=float)
    if abs(f[-1]) * grid.y_max > warn_tol:
        warnings.warn("integrand does not decay at y_max; tail integral truncated", stacklevel=2)
    c = cumulative(f, grid, _qmethod(grid))
    return -(c[-1] - c)


def degree(f, K, grid: Grid1D) -> float:
    """d(f) = int K(y) I_y[f] dy."""
    return integrate(np.asarray(K) * tail_antiderivative(f, grid, warn_tol=np.inf), grid)


@dataclass(frozen=True, eq=False)
class DegreeReport:
    K: np.ndarray
    value: float
    tail: np.ndarray
    n_frak: float | None = None


def degree_report(f, pp: ParallelProfiles, n_frak=None) -> DegreeReport:
    K = compute_K(pp)
    tail = tail_antiderivative(f, pp.grid)
    return DegreeReport(K, integrate(K * tail, pp.grid), tail, n_frak)


# ---------------------------------------------------------------------------
# L_par and its kernel


def apply_L_par(u, pp: ParallelProfiles, accuracy: int = 2):
    """-u''' + v_par u'' - u v_par''."""
    g = pp.grid
    u = np.asarray(u, dtype=float)
    return (-derivative(u, g, 3, accuracy) + pp.v_par * derivative(u, g, 2, accuracy)
            - u * pp.v_yy)


@dataclass(frozen=True, eq=False)
class KernelBasis:
    u_par: np.ndarray
    u_tilde_s: np.ndarray
    u_p_elem: np.ndarray
    a_fun: np.ndarray
    g_fun: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def build_kernel_basis(pp: ParallelProfiles, tail_window=None) -> KernelBasis:
    """u_par, u_tilde_s = u_par a(y) and u^p spanning the kernel of L_par.

    a'(y) = u(1)^2 g / u^2 with g = exp(int_1^y v). The A / y^2 singular part
    (A = u(1)^2 g(0) / u'(0)^2) is integrated exactly; the rest is O(y).
    """
    g_ = pp.grid
    y = g_.nodes
    u = pp.u_par
    if np.any(u[1:] <= 0):
        raise ProfileError("u_par must be positive in the interior")
    Iv = anchored_v_integral(pp)
    g = np.exp(Iv)
    u1 = float(np.interp(1.0, y, u))
    A = u1 ** 2 * g[0] / pp.u_y[0] ** 2
    rem = np.zeros_like(y)
    rem[1:] = u1 ** 2 * g[1:] / u[1:] ** 2 - A / y[1:] ** 2
    crem = cumulative(rem, g_, _qmethod(g_))
    crem -= np.interp(1.0, y, crem)
    a = np.full_like(y, np.nan)
    a[1:] = A * (1.0 - 1.0 / y[1:]) + crem[1:]
    ut = np.empty_like(y)
    ut[1:] = u[1:] * a[1:]
    ut[0] = -A * pp.u_y[0]                  # limit of u a as y -> 0
    K = u * np.exp(-Iv)
    Et = np.exp(-Iv)
    up = ut * cumulative(K, g_, _qmethod(g_)) - u * cumulative(ut * Et, g_, _qmethod(g_))

    lo, hi = tail_window or (0.5 * g_.y_max, g_.y_max)
    m = (y >= lo) & (y <= hi)
    slope = float(np.polyfit(y[m], np.log(np.abs(ut[m])), 1)[0])
    diag = {
        "first_node_value": float(ut[1]),
        "limit_value": float(ut[0]),
        "tail_log_slope": slope,
        "v_par_inf": pp.v_par_inf,
        "A": float(A),
    }
    return KernelBasis(u, ut, up, a, g, diag)


def kernel_singular_values(pp: ParallelProfiles, k: int = 5, accuracy: int = 2):
    """Smallest singular values of the collocated L_par with no boundary rows
    (the ODE imposed at every node), each column scaled to unit-l2 norm of the
    sampled function (sqrt(h) weighting)."""
    g = pp.grid
    n = g.n
    rows = np.arange(n)
    M = np.zeros((n, n))
    for order, coef in ((3, -1.0), (2, pp.v_par)):
        r, c, w = stencil_triplets(g, order, accuracy, rows)
        np.add.at(M, (r, c), (coef if np.isscalar(coef) else coef[r]) * w)
    M[rows, rows] -= pp.v_yy
    s = np.linalg.svd(M, compute_uv=False)
    return np.sort(s)[:k]


# ---------------------------------------------------------------------------
# probes


def random_probe(y, rng, n_bumps=None):
    """Smooth random function with u(0) = 0: Gaussian bumps under exp(-y/4)."""
    y_max = y[-1]
    n_bumps = n_bumps or int(rng.integers(1, 5))
    s = np.zeros_like(y)
    for _ in range(n_bumps):
        c = rng.uniform(0.5, y_max / 2)
        w = rng.uniform(0.3, 2.0)
        s += rng.normal() * np.exp(-0.5 * ((y - c) / w) ** 2)
    return (1.0 - np.exp(-y)) * np.exp(-y / 4.0) * s


def coercivity_ratio(u, pp: ParallelProfiles, accuracy: int = 2, min_norm=1e-12):
    g = pp.grid
    u_perp, _ = decompose(u, pp.u_par, g, accuracy)
    den = upsilon_norm(u_perp, g, accuracy)
    if den < min_norm:
        return None
    num = np.sqrt(integrate((apply_L_par(u_perp, pp, accuracy) * bracket(g.nodes)) ** 2, g,
                            method="trapezoid"))
    return float(num / den)


def _probe_chunk(children, pp, accuracy):
    ratios, rejected = [], 0
    y = pp.grid.nodes
    for ss in children:
        rng = np.random.default_rng(ss)
        while True:
            r = coercivity_ratio(random_probe(y, rng), pp, accuracy)
            if r is not None:
                break
            rejected += 1
        ratios.append(r)
    return ratios, rejected


def coercivity_probe(pp: ParallelProfiles, trials: int = 200, seed: int = 42, accuracy: int = 2,
                     bins: int = 20, workers: int = 1) -> dict:
    """min over random u of ||L_par u_perp <y>|| / ||u_perp||_Upsilon.

    Trial k always draws from the k-th spawned seed, so the result does not
    depend on how trials are split over workers.
    """
    if trials < 100:
        raise ValueError("coercivity probe needs at least 100 trials")
    children = np.random.SeedSequence(seed).spawn(trials)
    workers = max(1, int(workers))
    chunks = [children[i::workers] for i in range(workers)]
    if workers == 1:
        parts = [_probe_chunk(chunks[0], pp, accuracy)]
    else:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda c: _probe_chunk(c, pp, accuracy), chunks))
    ratios = [0.0] * trials
    for i, (rs, _) in enumerate(parts):
        ratios[i::workers] = rs
    rejected = sum(r for _, r in parts)
    ratios = np.array(ratios)
    hist, edges = np.histogram(ratios, bins=bins)
    return {"min_ratio": float(ratios.min()), "median_ratio": float(np.median(ratios)),
            "trials": trials, "seed": seed, "rejected": rejected,
            "histogram": hist.tolist(), "bin_edges": edges.tolist(), "ratios": ratios}


# ---------------------------------------------------------------------------
# non-degeneracy


def calibrate_forcing(K, grid: Grid1D, profile=None) -> float:
    """Smallest integer c with |int K c profile| >= 1 (profile default e^-y)."""
    prof = np.exp(-grid.nodes) if profile is None else profile
    base = abs(integrate(K * prof, grid))
    if base == 0:
        raise ProfileError("forcing profile is orthogonal to K")
    return float(np.ceil(1.0 / base))


def compute_n_frak(pp: ParallelProfiles, g_ext1, ueY0: float, ue0: float,
                   euler=None) -> dict:
    """n = int K [g + u0_eY(0)(y u0_px + v0_p) + u0_e(0) int Delta v1_e dY]."""
    g_ = pp.grid
    y = g_.nodes
    K = compute_K(pp)
    g = np.asarray(g_ext1, dtype=float)
    v0p = pp.v_par - pp.v_par_inf
    shear = ueY0 * (y * pp.u_x + v0p)
    if euler is None:
        lap_int = 0.0
        missing = True
    else:
        lap = euler.laplacian_x0()
        lap_int = float(np.trapezoid(lap, euler.Y))
        missing = False
    intKg = integrate(K * g, g_)
    parts = {
        "forcing": intKg,
        "shear": integrate(K * shear, g_),
        "euler": ue0 * lap_int * integrate(K, g_),
    }
    return {"n_frak": float(sum(parts.values())), "int_K_g": float(intKg),
            "nondegeneracy": float(abs(intKg)), "parts": parts,
            "laplacian_integral": lap_int, "euler_missing": missing}


# ---------------------------------------------------------------------------
# identity checks


def _richardson(integrand, grid: Grid1D):
    """Trapezoid value on the grid and the h-vs-2h error estimate."""
    y = grid.nodes
    q_h = float(np.trapezoid(integrand, y))
    if (y.size - 1) % 2:
        q_2h = float(np.trapezoid(integrand[:-1][::2], y[:-1][::2])) + float(np.trapezoid(integrand[-2:], y[-2:]))
    else:
        q_2h = float(np.trapezoid(integrand[::2], y[::2]))
    return q_h, abs(q_h - q_2h) / 3.0


def scalar_identity_gap(pp: ParallelProfiles) -> float:
    """u_par'(0) + int u_par u0_px exp(-int_0^y v_par); zero in the continuum."""
    g = pp.grid
    E0 = np.exp(-cumulative(pp.v_par, g, "trapezoid"))
    return float(pp.u_y[0] + np.trapezoid(pp.u_par * pp.u_x * E0, g.nodes))


def verify_cg_identity(pp: ParallelProfiles, f1_parts: dict, layer_trace: dict,
                       euler_traces: dict, ueY0: float) -> dict:
    """Both sides of the integrated layer-1 solvability identity at x = 0.

    f1_parts: ingredients of f^(1) at x = 0. layer_trace: u, u_y, u_yy of
    the layer-1 initial trace. euler_traces: u1e, v1e_Y at (0, 0).
    r is taken from the trace equation: r = f - u ubar_x - v_par u_y + u_yy.
    """
    g = pp.grid
    y = g.nodes
    K = compute_K(pp)
    f1 = sum(f1_parts.values())
    r = f1 - layer_trace["u"] * pp.u_x - pp.v_par * layer_trace["u_y"] + layer_trace["u_yy"]
    v1eY = float(euler_traces["v1e_Y"])
    u0p = pp.u_par - pp.u_inf
    v0p = pp.v_par - pp.v_par_inf
    lhs_int = K * (r + v1eY * (y * pp.u_y - u0p))
    rhs_int = -K * (ueY0 * y * pp.u_x + v0p * ueY0) + K * f1_parts["g_ext1"]
    lhs, e1 = _richardson(lhs_int, g)
    rhs, e2 = _richardson(rhs_int, g)
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs), "quad_error": e1 + e2,
            "scalar_gap": scalar_identity_gap(pp)}
