"""Grids, finite-difference stencils, quadrature and weighted norms."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate as _integ
from scipy import sparse

from .errors import GridError

MIN_NODES = 16
MAX_SPACING_RATIO = 1.2


def bracket(y):
    """Japanese bracket <y> = sqrt(1 + y^2)."""
    y = np.asarray(y, dtype=float)
    return np.sqrt(1.0 + y * y)


@dataclass(frozen=True, eq=False)
class Grid1D:
    nodes: np.ndarray
    kind: str = "uniform"

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < MIN_NODES:
            raise GridError(f"grid needs at least {MIN_NODES} nodes, got {nodes.size}")
        if nodes[0] != 0.0:
            raise GridError("grid must start at 0")
        h = np.diff(nodes)
        if np.any(h <= 0):
            raise GridError("grid nodes must be strictly increasing")
        if self.kind not in ("uniform", "graded"):
            raise GridError(f"unknown grid kind {self.kind!r}")
        if self.kind == "graded":
            ratio = np.maximum(h[1:] / h[:-1], h[:-1] / h[1:])
            if ratio.size and ratio.max() > MAX_SPACING_RATIO + 1e-12:
                raise GridError(f"adjacent spacing ratio {ratio.max():.3f} exceeds {MAX_SPACING_RATIO}")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def y_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def is_uniform(self) -> bool:
        h = self.h
        return bool(np.all(np.abs(h - h[0]) <= 1e-12 * max(1.0, self.y_max)))

    @classmethod
    def uniform(cls, y_max: float, n: int) -> "Grid1D":
        if y_max <= 0:
            raise GridError("y_max must be positive")
        return cls(np.linspace(0.0, float(y_max), int(n)), "uniform")

    @classmethod
    def graded(cls, y_max: float, h0: float, ratio: float = 1.05) -> "Grid1D":
        """Geometric stretching from spacing h0 at y = 0, all steps scaled
        down by a common factor so the grid ends exactly at y_max."""
        if not (1.0 <= ratio <= MAX_SPACING_RATIO):
            raise GridError(f"stretching ratio must lie in [1, {MAX_SPACING_RATIO}]")
        if h0 <= 0 or h0 >= y_max:
            raise GridError("h0 must lie in (0, y_max)")
        steps = [h0]
        while sum(steps) < y_max:
            steps.append(steps[-1] * ratio)
        steps = np.asarray(steps) * (y_max / sum(steps))
        nodes = np.concatenate([[0.0], np.cumsum(steps)])
        nodes[-1] = y_max
        return cls(nodes, "graded")

    def refine(self) -> "Grid1D":
        """Insert midpoints (halves every spacing)."""
        mid = 0.5 * (self.nodes[1:] + self.nodes[:-1])
        out = np.empty(2 * self.n - 1)
        out[0::2] = self.nodes
        out[1::2] = mid
        return Grid1D(out, self.kind)

    def coarsen(self) -> "Grid1D":
        if (self.n - 1) % 2:
            raise GridError("coarsen needs an even number of cells")
        return Grid1D(self.nodes[::2], self.kind)

    def to_json(self) -> str:
        return json.dumps({"nodes": [float(v) for v in self.nodes],
                           "y_max": self.y_max, "kind": self.kind})

    @classmethod
    def from_json(cls, text: str) -> "Grid1D":
        d = json.loads(text)
        extra = set(d) - {"nodes", "y_max", "kind"}
        if extra:
            raise GridError(f"unknown grid keys: {sorted(extra)}")
        g = cls(np.asarray(d["nodes"], dtype=float), d.get("kind", "uniform"))
        if abs(g.y_max - float(d["y_max"])) > 1e-12 * max(1.0, g.y_max):
            raise GridError("y_max does not match last node")
        return g

    def __eq__(self, other):
        return (isinstance(other, Grid1D) and self.kind == other.kind
                and np.array_equal(self.nodes, other.nodes))

    def __hash__(self):
        return hash((self.kind, self.n, self.nodes.tobytes()))


@dataclass(frozen=True, eq=False)
class Grid2D:
    x_nodes: np.ndarray
    y_grid: Grid1D

    def __post_init__(self):
        x = np.ascontiguousarray(self.x_nodes, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise GridError("x grid needs at least 2 nodes")
        if x[0] != 0.0 or np.any(np.diff(x) <= 0):
            raise GridError("x nodes must start at 0 and increase")
        x.setflags(write=False)
        object.__setattr__(self, "x_nodes", x)

    @property
    def L(self) -> float:
        return float(self.x_nodes[-1])

    @property
    def shape(self):
        return (self.x_nodes.size, self.y_grid.n)

    @classmethod
    def uniform(cls, L: float, nx: int, y_grid: Grid1D) -> "Grid2D":
        if L <= 0:
            raise GridError("L must be positive")
        return cls(np.linspace(0.0, float(L), int(nx)), y_grid)


# ---------------------------------------------------------------------------
# finite differences

def fornberg_weights(z, x, m, dtype=float):
    """Weights of the m-th derivative at points z from stencils x.

    Vectorised over rows: z has shape (r,), x shape (r, k). Returns (r, k).
    """
    z = np.asarray(z, dtype=dtype)
    x = np.asarray(x, dtype=dtype)
    r, k = x.shape
    c = np.zeros((k, m + 1, r), dtype=dtype)
    c1 = np.ones(r, dtype=dtype)
    c4 = x[:, 0] - z
    c[0, 0] = 1
    for i in range(1, k):
        mn = min(i, m)
        c2 = np.ones(r, dtype=dtype)
        c5 = c4
        c4 = x[:, i] - z
        for j in range(i):
            c3 = x[:, i] - x[:, j]
            c2 = c2 * c3
            if j == i - 1:
                for s in range(mn, 0, -1):
                    c[i, s] = c1 * (s * c[i - 1, s - 1] - c5 * c[i - 1, s]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for s in range(mn, 0, -1):
                c[j, s] = (c4 * c[j, s] - s * c[j, s - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m, :].T


def stencil_layout(grid: Grid1D, order: int, accuracy: int = 2, rows=None):
    """Stencil start index and width for each requested row.

    Interior rows use the most centred window; uniform grids drop one point
    when the symmetric window already has the requested accuracy.
    """
    n = grid.n
    width = order + accuracy
    if n < width + 2:
        raise GridError(f"grid too coarse for derivative order {order}")
    rows = np.arange(n) if rows is None else np.asarray(rows)
    w_int = width - 1 if (grid.is_uniform and width % 2 == 0) else width
    start = np.clip(rows - w_int // 2, 0, n - w_int)
    widths = np.full(rows.shape, w_int)
    # near the ends the window is one-sided and needs the full width
    edge = (rows - w_int // 2 < 0) | (rows - w_int // 2 > n - w_int)
    widths[edge] = width
    start[edge] = np.clip(rows[edge] - width // 2, 0, n - width)
    return rows, start, widths


def _weights_for(grid, order, accuracy, rows, dtype):
    rows, start, widths = stencil_layout(grid, order, accuracy, rows)
    nodes = grid.nodes.astype(dtype) if dtype is not float else grid.nodes
    out = []
    for w in np.unique(widths):
        sel = widths == w
        idx = start[sel, None] + np.arange(w)[None, :]
        wts = fornberg_weights(nodes[rows[sel]], nodes[idx], order, dtype=dtype)
        out.append((rows[sel], idx, wts))
    return out


@lru_cache(maxsize=64)
def _diff_matrix_cached(grid: Grid1D, order: int, accuracy: int):
    data, ri, ci = [], [], []
    for rows, idx, wts in _weights_for(grid, order, accuracy, None, float):
        ri.append(np.repeat(rows, idx.shape[1]))
        ci.append(idx.ravel())
        data.append(wts.ravel())
    n = grid.n
    return sparse.csr_matrix((np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))),
                             shape=(n, n))


def diff_matrix(grid: Grid1D, order: int, accuracy: int = 2):
    if not 0 <= order <= 4:
        raise GridError("derivative order must be in 0..4")
    return _diff_matrix_cached(grid, int(order), int(accuracy))


def stencil_triplets(grid: Grid1D, order: int, accuracy: int, rows, dtype=float):
    """(row, col, weight) triplets for the given rows, in the requested dtype."""
    R, C, V = [], [], []
    for r, idx, wts in _weights_for(grid, order, accuracy, rows, dtype):
        R.append(np.repeat(r, idx.shape[1]))
        C.append(idx.ravel())
        V.append(wts.ravel())
    return np.concatenate(R), np.concatenate(C), np.concatenate(V)


def derivative(values, grid: Grid1D, order: int = 1, accuracy: int = 2):
    """order-th derivative of sampled values (last axis runs along the grid)."""
    values = np.asarray(values, dtype=float)
    if order == 0:
        return values.copy()
    D = diff_matrix(grid, order, accuracy)
    if values.ndim == 1:
        return D @ values
    return (D @ values.reshape(-1, grid.n).T).T.reshape(values.shape)


# ---------------------------------------------------------------------------
# quadrature

def _check_bounds(grid, a, b):
    lo, hi = grid.nodes[0], grid.nodes[-1]
    tol = 1e-12 * max(1.0, hi)
    if not (lo - tol <= a <= hi + tol and lo - tol <= b <= hi + tol):
        raise GridError(f"integration bounds [{a}, {b}] outside grid [{lo}, {hi}]")


def integrate(values, grid: Grid1D, lo=None, hi=None, method="auto"):
    """Integral of sampled values over [lo, hi] (defaults: whole grid).

    Simpson on uniform grids when the bounds are the grid ends, composite
    trapezoid otherwise, with linear interpolation at off-node endpoints.
    """
    values = np.asarray(values, dtype=float)
    y = grid.nodes
    a = y[0] if lo is None else float(lo)
    b = y[-1] if hi is None else float(hi)
    _check_bounds(grid, a, b)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    if a == b:
        return 0.0
    full = a == y[0] and b == y[-1]
    if method == "simpson" or (method == "auto" and full and grid.is_uniform):
        if not full:
            raise GridError("simpson only over the full grid")
        return sign * float(_integ.simpson(values, x=y))
    i0 = np.searchsorted(y, a, side="right")
    i1 = np.searchsorted(y, b, side="left")
    xs = np.concatenate([[a], y[i0:i1], [b]])
    fs = np.concatenate([[np.interp(a, y, values)], values[i0:i1], [np.interp(b, y, values)]])
    return sign * float(np.trapezoid(fs, xs))


def cumulative(values, grid: Grid1D, method="trapezoid"):
    """Running integral from y = 0 at every node."""
    values = np.asarray(values, dtype=float)
    if method == "simpson":
        return _integ.cumulative_simpson(values, x=grid.nodes, initial=0.0)
    return _integ.cumulative_trapezoid(values, x=grid.nodes, initial=0.0)


def cumulative_from(values, grid: Grid1D, anchor: float, method="trapezoid"):
    """Running integral int_anchor^y values, anchor interpolated if off-node."""
    c = cumulative(values, grid, method)
    return c - np.interp(anchor, grid.nodes, c)


def tail_integral(values, grid: Grid1D, method="trapezoid"):
    """int_y^{y_max} values at every node."""
    c = cumulative(values, grid, method)
    return c[-1] - c


# ---------------------------------------------------------------------------
# weights and norms

@dataclass(frozen=True)
class WeightSpec:
    kind: str = "poly"
    m: float = 0.0
    samples: np.ndarray | None = field(default=None, compare=False)

    def evaluate(self, grid: Grid1D) -> np.ndarray:
        y = grid.nodes
        if self.kind == "poly":
            w = bracket(y) ** self.m
        elif self.kind == "inv_v1e":
            if self.samples is None:
                raise GridError("inv_v1e weight needs v1e samples")
            v = np.asarray(self.samples, dtype=float)
            if np.any(v <= 0):
                raise GridError("v1e trace must be positive for the w0 weight")
            w = bracket(y) / v
        elif self.kind == "custom":
            w = np.asarray(self.samples, dtype=float)
        else:
            raise GridError(f"unknown weight kind {self.kind!r}")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise GridError("weight must be positive and finite on every node")
        return w


def weighted_l2_norm(values, grid: Grid1D, weight: WeightSpec | None = None, lo=None, hi=None):
    w = 1.0 if weight is None else weight.evaluate(grid)
    v = np.asarray(values, dtype=float) * w
    return float(np.sqrt(max(integrate(v * v, grid, lo, hi, method="trapezoid"), 0.0)))
