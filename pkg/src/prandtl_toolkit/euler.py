"""Shear outer flow and the linearized Euler corrector (u1_e, v1_e, P1_e)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import RectBivariateSpline
from scipy.sparse.linalg import splu

from .errors import GridError, ProfileError, SingularSystemError
from .grid import Grid1D, Grid2D, bracket, derivative

SHEAR_FAMILIES = ("exp_approach", "tanh_plateau")


def _shear_eval(family, a, s, Y):
    Y = np.asarray(Y, dtype=float)
    if family == "exp_approach":
        e = np.exp(-Y / s)
        return 1.0 - a * e, a * e / s, -a * e / s ** 2, a * e / s ** 3
    if family == "tanh_plateau":
        t = np.tanh(Y / s)
        sech2 = 1.0 - t * t
        return (1.0 - a * (1.0 - t), a * sech2 / s, -2.0 * a * sech2 * t / s ** 2,
                2.0 * a * sech2 * (3.0 * t * t - 1.0) / s ** 3)
    raise ProfileError(f"unknown shear family {family!r}")


@dataclass(frozen=True, eq=False)
class ShearFlow:
    family: str
    amplitude: float
    scale: float
    grid: Grid1D
    u0e: np.ndarray
    u0e_Y: np.ndarray
    u0e_YY: np.ndarray
    delta_s: float

    def __call__(self, Y, order=0):
        """Closed-form u0_e and derivatives up to `order` (<= 3) at Y."""
        vals = _shear_eval(self.family, self.amplitude, self.scale, Y)
        return vals[: order + 1]

    @property
    def ue0(self) -> float:
        return float(self(0.0)[0])

    @property
    def ueY0(self) -> float:
        return float(self(0.0, 1)[1])


def shear_delta(u0e_YY, grid: Grid1D) -> float:
    return float(np.max(np.abs(u0e_YY * bracket(grid.nodes) ** 2)))


def make_shear(family: str, amplitude: float, scale: float, grid: Grid1D,
               lower_bound: float = 0.1) -> ShearFlow:
    if scale <= 0:
        raise ProfileError("shear scale must be positive")
    u, uY, uYY, _ = _shear_eval(family, amplitude, scale, grid.nodes)
    if np.min(np.abs(u)) < lower_bound:
        raise ProfileError(f"shear violates |u0_e| >= {lower_bound}: min {np.min(np.abs(u)):.3g}")
    return ShearFlow(family, float(amplitude), float(scale), grid, u, uY, uYY,
                     shear_delta(uYY, grid))


# ---------------------------------------------------------------------------
# elliptic solve

def _second_diff(nodes):
    """Tridiagonal 3-point d^2/dz^2 on interior nodes of a (possibly graded) grid."""
    hm = nodes[1:-1] - nodes[:-2]
    hp = nodes[2:] - nodes[1:-1]
    lo = 2.0 / (hm * (hm + hp))
    mid = -2.0 / (hm * hp)
    up = 2.0 / (hp * (hm + hp))
    return lo, mid, up


def _sample(data, nodes, name):
    if data is None:
        return None
    if callable(data):
        return np.asarray(data(nodes), dtype=float) * np.ones_like(nodes)
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0:
        return np.full(nodes.shape, float(arr))
    if arr.shape != nodes.shape:
        raise GridError(f"{name} has {arr.shape[0]} samples, grid has {nodes.size}")
    return arr


def side_profile(Y, Y_max, scale=1.0):
    """phi(Y): 1 at Y = 0, 0 at Y_max, decaying like exp(-Y/scale)."""
    e_top = np.exp(-Y_max / scale)
    return (np.exp(-np.asarray(Y) / scale) - e_top) / (1.0 - e_top)


def solve_elliptic(coef, grid: Grid2D, bottom, top, left, right):
    """Solve V_xx + V_YY - coef(Y) V = 0 with Dirichlet data on all sides.

    5-point finite differences (3-point per direction on graded grids),
    sparse LU. Returns V on the full (nx, nY) grid.
    """
    x = grid.x_nodes
    Y = grid.y_grid.nodes
    nx, ny = x.size, Y.size
    if nx < 3:
        raise GridError("need at least 3 x nodes")
    V = np.zeros((nx, ny))
    V[:, 0] = bottom
    V[:, -1] = top
    V[0, :] = left
    V[-1, :] = right
    mx, my = nx - 2, ny - 2
    ax = _second_diff(x)
    ay = _second_diff(Y)
    Dxx = sparse.diags([ax[0][1:], ax[1], ax[2][:-1]], [-1, 0, 1], shape=(mx, mx))
    Dyy = sparse.diags([ay[0][1:], ay[1] - coef[1:-1], ay[2][:-1]], [-1, 0, 1], shape=(my, my))
    A = (sparse.kron(Dxx, sparse.identity(my)) + sparse.kron(sparse.identity(mx), Dyy)).tocsc()

    rhs = np.zeros((mx, my))
    rhs[0, :] -= ax[0][0] * V[0, 1:-1]
    rhs[-1, :] -= ax[2][-1] * V[-1, 1:-1]
    rhs[:, 0] -= ay[0][0] * V[1:-1, 0]
    rhs[:, -1] -= ay[2][-1] * V[1:-1, -1]
    try:
        lu = splu(A)
    except RuntimeError as exc:
        smin = None
        if A.shape[0] <= 4000:
            smin = float(np.linalg.svd(A.toarray(), compute_uv=False)[-1])
        raise SingularSystemError(f"elliptic system is singular: {exc}", smin) from exc
    V[1:-1, 1:-1] = lu.solve(rhs.ravel()).reshape(mx, my)
    return V


@dataclass(frozen=True, eq=False)
class EulerCorrector:
    grid: Grid2D
    shear: ShearFlow
    v1e: np.ndarray
    u1e: np.ndarray
    P1e: np.ndarray
    v1e_Y: np.ndarray
    corner_gap: float
    decay: tuple

    @property
    def v1e_x0(self):
        return self.v1e[0]

    @property
    def Y(self):
        return self.grid.y_grid.nodes

    def bottom_trace(self, name="v"):
        return {"v": self.v1e, "u": self.u1e, "P": self.P1e}[name][:, 0]

    def laplacian_x0(self):
        """Delta v1_e at x = 0, from the equation it solves."""
        return self.shear.u0e_YY / self.shear.u0e * self.v1e[0]

    def splines(self):
        x, Y = self.grid.x_nodes, self.Y
        k = min(3, x.size - 1)
        return (RectBivariateSpline(x, Y, self.v1e, kx=k, ky=3),
                RectBivariateSpline(x, Y, self.u1e, kx=k, ky=3))

    def sample(self, x, Y):
        """Euler fields and derivatives at scattered points (x, Y).

        u_x is taken as -v_Y and P_x from the first momentum equation, so the
        sampled fields satisfy divergence and that equation exactly.
        Points beyond Y_max get the decayed values 0.
        """
        x, Y = np.broadcast_arrays(np.asarray(x, float), np.asarray(Y, float))
        sv, su = self.splines()
        inside = Y <= self.grid.y_grid.y_max
        Yc = np.where(inside, Y, self.grid.y_grid.y_max)
        out = {}
        for name, sp in (("v", sv), ("u", su)):
            out[name] = sp.ev(x, Yc)
            out[name + "_x"] = sp.ev(x, Yc, dx=1)
            out[name + "_Y"] = sp.ev(x, Yc, dy=1)
            out[name + "_xx"] = sp.ev(x, Yc, dx=2)
            out[name + "_YY"] = sp.ev(x, Yc, dy=2)
            out[name + "_xY"] = sp.ev(x, Yc, dx=1, dy=1)
        out["u_x"] = -out["v_Y"]
        out["u_xx"] = -out["v_xY"]
        out["u_xY"] = -sv.ev(x, Yc, dy=2)
        ue, ueY = self.shear(Yc, 1)
        out["P_x"] = -(ue * out["u_x"] + ueY * out["v"])
        out["P_Y"] = -ue * out["v_x"]
        for k in out:
            out[k] = np.where(inside, out[k], 0.0)
        return out


def _classify_decay(Y, trace):
    m = (Y > 1.0) & (np.abs(trace) > 1e-14)
    if m.sum() < 4:
        return ("exponential", float("inf"))
    lv = np.log(np.abs(trace[m]))
    A_e = np.vstack([Y[m], np.ones(m.sum())]).T
    A_a = np.vstack([np.log(Y[m]), np.ones(m.sum())]).T
    ce, re, *_ = np.linalg.lstsq(A_e, lv, rcond=None)
    ca, ra, *_ = np.linalg.lstsq(A_a, lv, rcond=None)
    re = re[0] if re.size else 0.0
    ra = ra[0] if ra.size else 0.0
    if re <= ra:
        return ("exponential", float(-ce[0]))
    return ("algebraic", float(-ca[0]))


def solve_v1e(shear: ShearFlow, bottom_bc, grid: Grid2D, side_bcs=None, u_side=None,
              top_bc=None, side_scale: float = 1.0, require_positive: bool = False,
              corner_tol: float = 1e-8) -> EulerCorrector:
    """Solve Delta V = (u0_eYY/u0_e) V on the strip and rebuild u1_e, P1_e.

    bottom_bc: samples (or callable) of v1_e(x, 0). side_bcs: (left, right)
    traces in Y; the default is bottom value times side_profile. u_side:
    u1_e(0, Y); top_bc: v1_e(x, Y_max), default 0.
    """
    x = grid.x_nodes
    Y = grid.y_grid.nodes
    if not np.array_equal(Y, shear.grid.nodes):
        raise GridError("shear flow and Euler grid must share Y nodes")
    bottom = _sample(bottom_bc, x, "bottom_bc")
    if require_positive and np.any(bottom <= 0):
        raise ProfileError("bottom data v1_e(x, 0) must be positive")
    top = _sample(top_bc, x, "top_bc")
    if top is None:
        top = np.zeros_like(x)
    if side_bcs is None:
        phi = side_profile(Y, Y[-1], side_scale)
        left, right = bottom[0] * phi, bottom[-1] * phi
        if top_bc is not None:
            left = left + top[0] * (1 - phi)
            right = right + top[-1] * (1 - phi)
    else:
        left = _sample(side_bcs[0], Y, "left side data")
        right = _sample(side_bcs[1], Y, "right side data")
    scale = max(1.0, float(np.max(np.abs(bottom))))
    corner_gap = float(max(abs(left[0] - bottom[0]), abs(right[0] - bottom[-1]),
                           abs(left[-1] - top[0]), abs(right[-1] - top[-1])))
    if corner_gap > corner_tol * scale:
        raise ProfileError(f"side data inconsistent at the corners (gap {corner_gap:.3g})")

    coef = shear.u0e_YY / shear.u0e
    V = solve_elliptic(coef, grid, bottom, top, left, right)

    uside = _sample(u_side, Y, "u_side")
    if uside is None:
        uside = np.zeros_like(Y)
    vY = derivative(V, grid.y_grid, 1)
    U = uside[None, :] - cumulative_trapezoid(vY, x, axis=0, initial=0.0)

    # P_Y = -u0_e v_x integrated down from Y_max; gauge at the top keeps the
    # first momentum equation exact there
    vx = _x_derivative(V, x)
    ux = _x_derivative(U, x)
    top_flux = shear.u0e[-1] * ux[:, -1] + shear.u0e_Y[-1] * V[:, -1]
    P_top = -cumulative_trapezoid(top_flux, x, initial=0.0)
    PY = -shear.u0e[None, :] * vx
    tail = cumulative_trapezoid(PY[:, ::-1], -Y[::-1], axis=1, initial=0.0)[:, ::-1]
    P = P_top[:, None] - tail
    decay = _classify_decay(Y, V[0])
    return EulerCorrector(grid, shear, V, U, P, vY, corner_gap, decay)


def _x_derivative(F, x):
    # 4th-order stencils keep the one-sided edge columns from leaking an
    # O(h) error into P_x through the pressure reconstruction
    if x.size >= 16:
        return derivative(F.T, Grid1D(x, "uniform" if np.allclose(np.diff(x), x[1]) else "graded"),
                          1, accuracy=4).T
    return np.gradient(F, x, axis=0, edge_order=2)


def box_divergence(ec: EulerCorrector):
    """Divergence in the scheme u1_e was built with: forward difference in x,
    averaged stencil v_Y."""
    dx = np.diff(ec.grid.x_nodes)[:, None]
    return np.diff(ec.u1e, axis=0) / dx + 0.5 * (ec.v1e_Y[1:] + ec.v1e_Y[:-1])


def euler_residual(ec: EulerCorrector) -> dict:
    """Interior residuals of both momentum equations and the divergence."""
    x = ec.grid.x_nodes
    Y = ec.Y
    sh = ec.shear
    u, v, P = ec.u1e, ec.v1e, ec.P1e
    ux = np.gradient(u, x, axis=0, edge_order=2)
    vx = np.gradient(v, x, axis=0, edge_order=2)
    Px = np.gradient(P, x, axis=0, edge_order=2)
    PY = np.gradient(P, Y, axis=1, edge_order=2)
    vY = np.gradient(v, Y, axis=1, edge_order=2)
    r1 = sh.u0e * ux + sh.u0e_Y * v + Px
    r2 = sh.u0e * vx + PY
    rd = ux + vY
    box = box_divergence(ec)
    sl = (slice(1, -1), slice(1, -1))

    def l2(r):
        r = r[sl]
        return float(np.sqrt(np.trapezoid(np.trapezoid(r * r, Y[1:-1], axis=1), x[1:-1])))

    return {
        "momentum_x_l2": l2(r1), "momentum_x_sup": float(np.abs(r1[sl]).max()),
        "momentum_Y_l2": l2(r2), "momentum_Y_sup": float(np.abs(r2[sl]).max()),
        "divergence_l2": l2(rd), "divergence_sup": float(np.abs(rd[sl]).max()),
        "divergence_box_sup": float(np.abs(box).max()),
    }
