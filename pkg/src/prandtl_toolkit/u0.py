"""Boundary-trace equation L_delta u0 = F: Wronskian and banded solvers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import GridError, ProfileError, SingularSystemError
from .grid import (Grid1D, WeightSpec, bracket, cumulative, derivative, stencil_triplets,
                   weighted_l2_norm)
from .norms import b_norm, b_norm_components, decompose, omega, upsilon_norm

__all__ = [
    "ThetaSolution", "solve_theta", "theta_weighted_estimate", "OperatorParts", "LdeltaOperator",
    "U0Solution", "solve_L_delta", "delta_ladder", "split_vs_direct", "linf_embedding_check",
    "decompose", "b_norm",
]

EXP_BLOCK = 30.0


# ---------------------------------------------------------------------------
# Wronskian path: -u''' + delta u'' = F


@dataclass(frozen=True, eq=False)
class ThetaSolution:
    grid: Grid1D
    u: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    c3: np.ndarray          # may underflow far out; c3 * e^{delta y} is kept in growth_term
    growth_term: np.ndarray
    delta: float
    C1: float
    F: np.ndarray

    @property
    def u_y(self):
        return self.c2 + self.delta * self.growth_term

    @property
    def u_yy(self):
        return self.delta ** 2 * self.growth_term

    @property
    def u_yyy(self):
        return self.delta ** 3 * self.growth_term - self.F


def _tail(g, grid, method):
    c = cumulative(g, grid, method)
    return c[-1] - c


def _damped_tail(F, grid: Grid1D, delta: float, method: str):
    """T(y) = int_y^inf F(s) e^{delta (y - s)} ds, evaluated blockwise so no
    exponential exceeds e^EXP_BLOCK."""
    y = grid.nodes
    n = y.size
    T = np.zeros(n)
    # block boundaries, walking down from y_max
    cuts = [n - 1]
    while cuts[-1] > 0:
        j = cuts[-1]
        i = int(np.searchsorted(y, y[j] - EXP_BLOCK / delta, side="left"))
        i = min(i, j - 2) if j >= 2 else 0
        cuts.append(max(i, 0))
    carry = 0.0
    for j, i in zip(cuts[:-1], cuts[1:]):
        seg = slice(i, j + 1)
        ys = y[seg]
        a = ys[0]
        w = F[seg] * np.exp(-delta * (ys - a))
        c = cumulative(w, Grid1D(ys - a, "graded" if not grid.is_uniform else "uniform"), method) \
            if ys.size >= 16 else np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(ys))])
        inner = (c[-1] - c) * np.exp(delta * (ys - a))
        T[seg] = inner + carry * np.exp(-delta * (ys[-1] - ys))
        carry = T[i]
    return T


def solve_theta(F, delta: float, grid: Grid1D, method: str | None = None) -> ThetaSolution:
    """Variation of parameters with fundamental solutions 1, y, e^{delta y}.

    c1 = int_y^inf F (delta s - 1)/delta^2, c2 = -int_y^inf F/delta,
    c3 e^{delta y} = int_y^inf F e^{delta (y - s)}/delta^2; u = u_p - u_p(0).
    """
    if not delta > 0:
        raise ProfileError("delta must be positive for the Wronskian path")
    F = np.asarray(F, dtype=float)
    if F.shape != grid.nodes.shape:
        raise GridError("F does not match the grid")
    y = grid.nodes
    method = method or ("simpson" if grid.is_uniform else "trapezoid")
    d2 = delta * delta
    c1 = _tail(F * (delta * y - 1.0), grid, method) / d2
    c2 = -_tail(F, grid, method) / delta
    growth = _damped_tail(F, grid, delta, method) / d2
    with np.errstate(under="ignore", over="ignore"):
        c3 = growth * np.exp(-delta * y)
    up = c1 + c2 * y + growth
    C1 = -float(up[0])
    return ThetaSolution(grid, C1 + up, c1, c2, c3, growth, float(delta), C1, F)


def theta_weighted_estimate(sol: ThetaSolution, m: float, n: float) -> dict:
    """||u''' <y>^m e^{ny}|| + delta ||u'' <y>^m e^{ny}|| against ||F <y>^m e^{ny}||."""
    y = sol.grid.nodes
    if n * y[-1] > 30.0:
        raise GridError(f"weight e^(n y_max) = e^{n * y[-1]:.3g} exceeds the cap e^30")
    w = bracket(y) ** m * np.exp(n * y)
    g = sol.grid
    lhs = (weighted_l2_norm(sol.u_yyy * w, g) + sol.delta * weighted_l2_norm(sol.u_yy * w, g))
    rhs = weighted_l2_norm(sol.F * w, g)
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)}


# ---------------------------------------------------------------------------
# operator data


@dataclass(frozen=True, eq=False)
class OperatorParts:
    """x = 0 traces entering v_s on the y grid.

    v1e_bar is v1_e(0, sqrt(eps) y) - v1_e(0, 0); v1e_YY, v1e_xx are taken at
    (0, sqrt(eps) y). v0p_xx is the x-curvature of the decaying leading
    layer v0_p = v_par - v1_e(x, 0).
    """
    v_par: np.ndarray
    v_par_yy: np.ndarray
    v0p_xx: np.ndarray
    v1p: np.ndarray
    v1p_yy: np.ndarray
    v1p_xx: np.ndarray
    v1e_bar: np.ndarray
    v1e_YY: np.ndarray
    v1e_xx: np.ndarray
    v1e_bottom_xx: float = 0.0
    ve_trace: np.ndarray | None = None

    @classmethod
    def parallel_only(cls, pp):
        z = np.zeros_like(pp.v_par)
        return cls(pp.v_par, pp.v_yy, z, z, z, z, z, z, z)

    @classmethod
    def from_layers(cls, pp, eps, flow, euler=None, layer1=None):
        """Traces from the Blasius flow, an Euler corrector and a layer-1 march."""
        y = pp.grid.nodes
        se = np.sqrt(eps)
        z = np.zeros_like(y)
        v_inf_xx = _v_inf_xx(flow)
        if euler is not None:
            Y = se * y
            if Y[-1] > euler.Y[-1]:
                raise GridError(f"Euler grid Y_max = {euler.Y[-1]} below sqrt(eps) y_max = {Y[-1]:.4g}")
            s = euler.sample(np.zeros_like(Y), Y)
            s0 = euler.sample(np.zeros(1), np.zeros(1))
            ve = s["v"]
            v1e_bar, v1e_YY, v1e_xx = ve - s0["v"][0], s["v_YY"], s["v_xx"]
            bottom_xx = float(s0["v_xx"][0])
        else:
            ve, v1e_bar, v1e_YY, v1e_xx, bottom_xx = None, z, z, z, v_inf_xx
        if layer1 is not None:
            # the layer-1 march has a sqrt(x) corner layer (the bottom data moves
            # in x while the x = 0 equation pins u_x(0, 0) = 0), so its second
            # x-derivative at x = 0 is unbounded; that eps^(3/2) term is dropped
            v1p = layer1.v[0]
            v1p_yy = derivative(v1p, pp.grid, 2)
        else:
            v1p = v1p_yy = z
        v1p_xx = z
        return cls(pp.v_par, pp.v_yy, pp.v_xx - v_inf_xx, v1p, v1p_yy, v1p_xx,
                   v1e_bar, v1e_YY, v1e_xx, bottom_xx, ve)


def _v_inf_xx(flow):
    # beta / sigma(x) with sigma^2 linear in x: (beta/sigma)'' = 3 beta sigma'^2 / sigma^3
    s = float(flow.sigma(0.0))
    sp = float(flow.dsigma(0.0))
    return 3.0 * flow.beta * sp * sp / s ** 3


def _coeffs(parts: OperatorParts, eps, delta):
    se = np.sqrt(eps)
    vs = parts.v_par + se * parts.v1p + parts.v1e_bar
    lap = (parts.v_par_yy + eps * (parts.v0p_xx + parts.v1e_bottom_xx) + se * parts.v1p_yy
           + eps * se * parts.v1p_xx + eps * parts.v1e_YY
           + eps * (parts.v1e_xx - parts.v1e_bottom_xx))
    return vs + delta, lap


def _split_coeffs(parts: OperatorParts, eps, delta):
    """(u'' coefficient, u coefficient) of L_par, sqrt(eps) A and J separately."""
    se = np.sqrt(eps)
    return {
        "L_par": (parts.v_par, -parts.v_par_yy),
        "A": (se * parts.v1p, -se * parts.v1p_yy),
        "J": (delta + parts.v1e_bar,
              -eps * parts.v0p_xx - eps * se * parts.v1p_xx - eps * (parts.v1e_YY + parts.v1e_xx)),
    }


# ---------------------------------------------------------------------------
# banded path


@dataclass(eq=False)
class LdeltaOperator:
    """-u''' + (v_s + delta) u'' - u Lap_eps v_s with u(0) = 0 and
    u'(y_max) = u''(y_max) = 0."""
    grid: Grid1D
    delta: float
    eps: float
    parts: OperatorParts
    u_par: np.ndarray
    accuracy: int = 4
    vs_trace: np.ndarray = field(init=False)
    laplacian_vs: np.ndarray = field(init=False)
    _cache: dict = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self):
        if self.delta < 0:
            raise ProfileError("delta must be nonnegative")
        if self.eps <= 0:
            raise ProfileError("eps must be positive")
        vsd, lap = _coeffs(self.parts, self.eps, self.delta)
        self.vs_trace = vsd - self.delta
        self.laplacian_vs = lap

    @classmethod
    def from_profiles(cls, pp, eps=1e-4, delta=0.0, parts=None, accuracy=4):
        return cls(pp.grid, float(delta), float(eps), parts or OperatorParts.parallel_only(pp),
                   pp.u_par, accuracy)

    def _interior(self, c2, c0, dtype):
        """Triplets of -D3 + c2 D2 + c0 I on rows 1..n-3."""
        n = self.grid.n
        rows = np.arange(1, n - 2)
        c2 = np.asarray(c2, dtype=dtype) * np.ones(n, dtype=dtype)
        c0 = np.asarray(c0, dtype=dtype) * np.ones(n, dtype=dtype)
        r3, k3, w3 = stencil_triplets(self.grid, 3, self.accuracy, rows, dtype)
        r2, k2, w2 = stencil_triplets(self.grid, 2, self.accuracy, rows, dtype)
        R = np.concatenate([r3, r2, rows])
        C = np.concatenate([k3, k2, rows])
        V = np.concatenate([-w3, c2[r2] * w2, c0[rows]])
        return R, C, V

    def triplets(self, dtype=np.longdouble):
        key = ("trip", np.dtype(dtype).name)
        if key in self._cache:
            return self._cache[key]
        n = self.grid.n
        vsd, lap = _coeffs(self.parts, self.eps, self.delta)
        R, C, V = self._interior(vsd, -lap, dtype)
        Rs, Cs, Vs = [R, [0]], [C, [0]], [V, np.ones(1, dtype=dtype)]
        for row, order in ((n - 2, 1), (n - 1, 2)):
            _, c, w = stencil_triplets(self.grid, order, self.accuracy, [n - 1], dtype)
            Rs.append(np.full(c.size, row))
            Cs.append(c)
            Vs.append(w)
        out = (np.concatenate(Rs).astype(int), np.concatenate(Cs).astype(int),
               np.concatenate(Vs).astype(dtype))
        self._cache[key] = out
        return out

    @property
    def matrix(self):
        n = self.grid.n
        R, C, V = self.triplets(np.longdouble)
        return sparse.csc_matrix((V.astype(float), (R, C)), shape=(n, n))

    def apply(self, u, dtype=np.longdouble):
        """Matrix rows applied to u (boundary rows included)."""
        R, C, V = self.triplets(dtype)
        out = np.zeros(self.grid.n, dtype=dtype)
        np.add.at(out, R, V * np.asarray(u, dtype=dtype)[C])
        return out

    def apply_interior(self, u):
        """-u''' + (v_s + delta) u'' - u Lap v_s by stencils at every node."""
        g = self.grid
        vsd, lap = _coeffs(self.parts, self.eps, self.delta)
        return (-derivative(u, g, 3, self.accuracy) + vsd * derivative(u, g, 2, self.accuracy)
                - lap * np.asarray(u, float))

    def apply_split(self, u):
        """Sum of L_par u, sqrt(eps) A u and J u assembled separately."""
        g = self.grid
        u = np.asarray(u, float)
        d3 = derivative(u, g, 3, self.accuracy)
        d2 = derivative(u, g, 2, self.accuracy)
        pieces = {}
        for name, (c2, c0) in _split_coeffs(self.parts, self.eps, self.delta).items():
            pieces[name] = c2 * d2 + c0 * u
        pieces["L_par"] = pieces["L_par"] - d3
        return pieces

    def rhs(self, F):
        b = np.array(F, dtype=np.longdouble)
        b[0] = 0
        b[-2:] = 0
        return b

    def smallest_singular_value(self, limit=4000):
        if self.grid.n > limit:
            return None
        return float(np.linalg.svd(self.matrix.toarray(), compute_uv=False).min())


def split_vs_direct(op: LdeltaOperator, u) -> float:
    """Max pointwise gap between the split and direct assemblies on u."""
    split = sum(op.apply_split(u).values())
    return float(np.max(np.abs(split - op.apply_interior(u))))


@dataclass(frozen=True, eq=False)
class U0Solution:
    grid: Grid1D
    u0: np.ndarray
    u_perp: np.ndarray
    kappa: float
    omega_u0: float
    omega_upar: float
    norms: dict
    eps: float
    delta: float
    residual: float
    refinements: int
    flags: dict


def _factor(op: LdeltaOperator):
    if "lu" not in op._cache:
        try:
            op._cache["lu"] = splu(op.matrix)
        except RuntimeError as exc:
            raise SingularSystemError(f"L_delta matrix is singular: {exc}",
                                      op.smallest_singular_value()) from exc
    return op._cache["lu"]


def _solve_refined(op: LdeltaOperator, F, iterations=4):
    """LU in double, residual in long double."""
    lu = _factor(op)
    b = op.rhs(F)
    x = np.zeros(op.grid.n, dtype=np.longdouble)
    scale = float(np.max(np.abs(b))) or 1.0
    res = np.inf
    k = 0
    for k in range(1, iterations + 1):
        r = b - op.apply(x)
        dx = lu.solve(np.asarray(r, dtype=float))
        if not np.all(np.isfinite(dx)):
            raise SingularSystemError("L_delta solve produced non-finite values",
                                      op.smallest_singular_value())
        x += dx
        res = float(np.max(np.abs(b - op.apply(x)))) / scale
        if res < 1e-17:
            break
    return np.asarray(x, dtype=float), res, k


def solve_L_delta(op: LdeltaOperator, F, ve_trace=None, refine_iterations=4,
                  decay_tol=1e-6) -> U0Solution:
    F = np.asarray(F, dtype=float)
    if F.shape != op.grid.nodes.shape:
        raise GridError("F does not match the grid")
    g = op.grid
    if not np.any(F):
        u = np.zeros(g.n)
        res, k = 0.0, 0
    else:
        u, res, k = _solve_refined(op, F, refine_iterations)
        u[0] = 0.0      # the identity row leaves only round-off here
    if res > 1e-8:
        raise SingularSystemError(f"L_delta solve did not converge (relative residual {res:.3g})",
                                  op.smallest_singular_value())
    u_perp, kappa = decompose(u, op.u_par, g, 2)
    w_par = omega(op.u_par, op.u_par, g, 2)
    norms = {"upsilon": upsilon_norm(u, g), "upsilon_perp": upsilon_norm(u_perp, g)}
    ve = ve_trace if ve_trace is not None else op.parts.ve_trace
    if ve is not None:
        norms.update(b_norm_components(u, op.u_par, g, op.eps, ve))
        norms["b_norm"] = b_norm(u, op.u_par, g, op.eps, ve)
    # curvature over the last tenth of the domain, relative to its peak
    u2 = np.abs(derivative(u, g, 2))
    far = g.nodes >= 0.9 * g.y_max
    peak = float(u2.max())
    tail_ratio = float(u2[far].max() / peak) if peak > 0 else 0.0
    flags = {"decay_ok": tail_ratio <= decay_tol, "tail_curvature_ratio": tail_ratio}
    return U0Solution(g, u, u_perp, kappa, omega(u, op.u_par, g, 2), w_par, norms,
                      op.eps, op.delta, res, k, flags)


def delta_ladder(pp, F, eps=1e-4, deltas=(1e-2, 1e-3, 1e-4, 0.0), parts=None, accuracy=4,
                 weight_m=0.0) -> dict:
    """Solutions along a decreasing delta ladder and the successive gaps."""
    sols = []
    for d in deltas:
        op = LdeltaOperator.from_profiles(pp, eps, d, parts, accuracy)
        sols.append(solve_L_delta(op, F))
    w = WeightSpec("poly", weight_m)
    gaps = [weighted_l2_norm(b.u0 - a.u0, pp.grid, w) for a, b in zip(sols[:-1], sols[1:])]
    return {"deltas": list(deltas), "solutions": sols, "gaps": gaps,
            "monotone": bool(all(b < a for a, b in zip(gaps[:-1], gaps[1:])))}


def linf_embedding_check(sol: U0Solution, u_par, ve_trace, sigma: float = 0.1) -> dict:
    """eps^{(1+sigma)/2} max|u_perp| against ||u0||_B."""
    lhs = sol.eps ** ((1 + sigma) / 2) * float(np.max(np.abs(sol.u_perp)))
    rhs = b_norm(sol.u0, u_par, sol.grid, sol.eps, ve_trace)
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0}
