"""Blasius similarity solution f''' + f f'' = 0 and the self-similar boundary layer."""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.interpolate import BPoly

from . import kernels
from .errors import ProfileError, ShootingError
from .grid import Grid1D


@dataclass(frozen=True, eq=False)
class BlasiusSolution:
    eta_grid: Grid1D
    f: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    shoot_value: float
    eta_max: float
    tol: float
    iterations: int

    @property
    def f3(self):
        return -self.f * self.f2

    @property
    def beta(self) -> float:
        """lim (eta f' - f), read off at eta_max."""
        return float(self.eta_max * self.f1[-1] - self.f[-1])

    def summary(self) -> dict:
        return {"shoot_value": self.shoot_value, "eta_max": self.eta_max,
                "tol": self.tol, "iterations": self.iterations}


def _shoot(s, eta_max, n):
    return kernels.rk4_blasius_end(float(s), float(eta_max), int(n)) - 1.0


def solve_blasius(tol: float = 1e-10, eta_max: float = 12.0, n: int = 4096,
                  max_iter: int = 200) -> BlasiusSolution:
    """Shoot on s = f''(0) until |f'(eta_max) - 1| <= tol.

    Bisection until the bracket is tight, then safeguarded secant.
    """
    if tol <= 0:
        raise ShootingError("tol must be positive")
    if eta_max < 10:
        raise ShootingError("eta_max must be at least 10")
    if eta_max / n < 1e-12:
        raise ShootingError("step size underflow")

    lo, f_lo = 0.0, _shoot(0.0, eta_max, n)     # trivial solution, f' = 0
    hi = 1.0
    f_hi = _shoot(hi, eta_max, n)
    it = 2
    while f_hi <= 0:
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = _shoot(hi, eta_max, n)
        it += 1
        if hi > 1e6:
            raise ShootingError(f"could not bracket the shoot value in [0, {hi}]")

    while hi - lo > 1e-3 and it < max_iter:
        mid = 0.5 * (lo + hi)
        f_mid = _shoot(mid, eta_max, n)
        it += 1
        if f_mid > 0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid

    a, fa, b, fb = lo, f_lo, hi, f_hi
    s, fs = (a, fa) if abs(fa) < abs(fb) else (b, fb)
    while abs(fs) > tol:
        if it >= max_iter:
            raise ShootingError(f"no convergence after {it} shots, bracket [{lo}, {hi}]")
        cand = b - fb * (b - a) / (fb - fa) if fb != fa else 0.5 * (lo + hi)
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        fc = _shoot(cand, eta_max, n)
        it += 1
        if fc > 0:
            hi = cand
        else:
            lo = cand
        a, fa, b, fb = b, fb, cand, fc
        s, fs = cand, fc
        if hi - lo < 1e-15 * hi:
            break

    traj = kernels.rk4_blasius(float(s), float(eta_max), int(n))
    grid = Grid1D(np.linspace(0.0, eta_max, n + 1), "uniform")
    return BlasiusSolution(grid, traj[:, 0].copy(), traj[:, 1].copy(), traj[:, 2].copy(),
                           float(s), float(eta_max), float(tol), it)


def ode_derivatives(f0, f1, f2, order):
    """[f, f', ..., f^(order)] from (f, f', f'') using f''' = -f f''."""
    d = [np.asarray(f0, float), np.asarray(f1, float), np.asarray(f2, float)]
    for k in range(order - 2):
        # f^(k+3) = -sum_j C(k, j) f^(j) f^(k-j+2)
        acc = np.zeros_like(d[0])
        for j in range(k + 1):
            acc = acc + comb(k, j) * d[j] * d[k - j + 2]
        d.append(-acc)
    return d[: order + 1]


def _quintic_hermite(x, y, dy, d2y):
    # Bernstein form of the degree-5 Hermite interpolant on each interval
    h = np.diff(x)
    y0, y1 = y[:-1], y[1:]
    p0, p1 = dy[:-1] * h, dy[1:] * h
    q0, q1 = d2y[:-1] * h * h, d2y[1:] * h * h
    c = np.stack([
        y0,
        y0 + p0 / 5,
        y0 + 2 * p0 / 5 + q0 / 20,
        y1 - 2 * p1 / 5 + q1 / 20,
        y1 - p1 / 5,
        y1,
    ])
    return BPoly(c, x)


class BlasiusInterpolant:
    """Quintic Hermite interpolation of f, f', f'' with higher derivatives
    from the ODE. Beyond eta_max the asymptote f = eta - beta is used and
    flagged."""

    def __init__(self, sol: BlasiusSolution):
        self.sol = sol
        eta = sol.eta_grid.nodes
        d = ode_derivatives(sol.f, sol.f1, sol.f2, 4)
        self._p = [_quintic_hermite(eta, *d[k:k + 3]) for k in range(3)]
        self.beta = sol.beta
        self.eta_max = sol.eta_max

    def __call__(self, eta, order=2):
        """List of f^(k)(eta), k = 0..order, and a mask of tail points."""
        eta = np.asarray(eta, dtype=float)
        if np.any(eta < 0):
            raise ProfileError("eta must be nonnegative")
        tail = eta > self.eta_max
        inside = np.where(tail, self.eta_max, eta)
        f0, f1, f2 = (p(inside) for p in self._p)
        if np.any(tail):
            f0 = np.where(tail, eta - self.beta, f0)
            f1 = np.where(tail, 1.0, f1)
            f2 = np.where(tail, 0.0, f2)
        return ode_derivatives(f0, f1, f2, order), tail


class BlasiusFlow:
    """Self-similar leading-order layer (ubar, vbar) and its derivatives.

    scaling="consistent": sigma = sqrt((2x + x0)/U), a divergence-free
    solution of the Prandtl equations with free stream U.
    scaling="literal": sigma = sqrt(x + x0), identical at x = 0 only.
    """

    def __init__(self, sol: BlasiusSolution, x0: float = 1.0, ue0: float = 1.0,
                 scaling: str = "consistent"):
        if x0 <= 0:
            raise ProfileError("x0 must be positive")
        if ue0 <= 0:
            raise ProfileError("free-stream value must be positive")
        if scaling not in ("consistent", "literal"):
            raise ProfileError(f"unknown scaling {scaling!r}")
        if scaling == "literal" and ue0 != 1.0:
            raise ProfileError("literal scaling is only defined for U = 1")
        self.sol = sol
        self.interp = BlasiusInterpolant(sol)
        self.x0 = float(x0)
        self.U = float(ue0)
        self.scaling = scaling
        self.beta = sol.beta

    def sigma(self, x):
        x = np.asarray(x, dtype=float)
        if self.scaling == "consistent":
            s2 = (2.0 * x + self.x0) / self.U
        else:
            s2 = x + self.x0
        if np.any(s2 <= 0):
            raise ProfileError("x outside the self-similar range")
        return np.sqrt(s2)

    def dsigma(self, x):
        s = self.sigma(x)
        return 1.0 / (self.U * s) if self.scaling == "consistent" else 0.5 / s

    def v_inf(self, x=0.0):
        """lim_{y->inf} vbar = beta / sigma (entrainment)."""
        return self.beta / self.sigma(x)

    def fields(self, x, y, tail_flag=False):
        """Dict of ubar, vbar and derivatives on the broadcast of (x, y)."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        s = self.sigma(x)
        sp = self.dsigma(x)
        a = sp / s
        ap = -2.0 * a * a
        eta = y / s
        (F0, F1, F2, F3, F4), tail = self.interp(eta, 4)
        U = self.U
        G = eta * F1 - F0
        G1 = eta * F2
        G2 = F2 + eta * F3
        G3 = 2.0 * F3 + eta * F4
        H = eta * G1 + G
        H1 = 3.0 * eta * F2 + eta * eta * F3
        out = {
            "u": U * F1,
            "u_y": U * F2 / s,
            "u_yy": U * F3 / s ** 2,
            "u_yyy": U * F4 / s ** 3,
            "u_x": -U * a * eta * F2,
            "u_xy": -U * a * (F2 + eta * F3) / s,
            "u_xx": -U * (ap * eta * F2 - a * a * eta * F2 - a * a * eta * eta * F3),
            "v": G / s,
            "v_y": G1 / s ** 2,
            "v_yy": G2 / s ** 3,
            "v_yyy": G3 / s ** 4,
            "v_x": -a * H / s,
            "v_xy": -a * H1 / s ** 2,
            "v_xx": -ap * H / s + a * a * (eta * H1 + H) / s,
        }
        if tail_flag:
            out["tail"] = tail
        return out


def blasius_profiles(sol: BlasiusSolution, x: float, x0: float, y_grid: Grid1D,
                     ue0: float = 1.0, scaling: str = "consistent"):
    """(ubar, vbar, tail_mask) sampled on y_grid at station x."""
    flow = BlasiusFlow(sol, x0, ue0, scaling)
    fl = flow.fields(x, y_grid.nodes, tail_flag=True)
    return fl["u"], fl["v"], fl["tail"]


def verify_blasius_signs(sol: BlasiusSolution, tail_window=(6.0, None)) -> dict:
    f1, f2, f3 = sol.f1, sol.f2, sol.f3
    eta = sol.eta_grid.nodes
    lo, hi = tail_window[0], tail_window[1] or sol.eta_max
    m = (eta >= lo) & (eta <= hi) & (f2 > 0)
    lf = np.log(f2[m])
    slope = float(np.polyfit(eta[m], lf, 1)[0])
    gauss = float(np.polyfit(eta[m] ** 2, lf, 1)[0])
    return {
        "min_fp": float(f1.min()),
        "max_fp": float(f1.max()),
        "min_fpp": float(f2.min()),
        "max_fppp": float(f3.max()),
        "fpp0": float(f2[0]),
        "fpp0_positive": bool(f2[0] > 0),
        "fp_in_range": bool(f1.min() >= 0 and f1.max() <= 1 + 1e-8),
        "fpp_nonnegative": bool(f2.min() >= -1e-10),
        "fppp_nonpositive": bool(f3.max() <= 1e-10),
        "tail_log_slope": slope,
        "tail_gauss_coeff": gauss,
        "superexponential_tail": bool(slope <= -4.0),
    }
