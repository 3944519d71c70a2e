"""Builds the layer stack (Blasius, shear, Euler corrector, layer-1 march) from one config."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .blasius import BlasiusFlow, BlasiusSolution, solve_blasius
from .degree import ParallelProfiles, calibrate_forcing, compute_K, parallel_profiles
from .errors import ConfigError
from .euler import EulerCorrector, ShearFlow, make_shear, solve_v1e
from .grid import Grid1D, Grid2D, derivative
from .prandtl import (ForcingF1, PrandtlLayer, compute_f1, euler_wall_traces, initial_trace,
                      march_prandtl_layer)


def grid_scale() -> float:
    """TOOLKIT_GRID_SCALE multiplies default node counts."""
    raw = os.environ.get("TOOLKIT_GRID_SCALE", "1")
    try:
        s = float(raw)
    except ValueError as exc:
        raise ConfigError(f"TOOLKIT_GRID_SCALE={raw!r} is not a number") from exc
    if s <= 0:
        raise ConfigError("TOOLKIT_GRID_SCALE must be positive")
    return s


def scaled(n: int, minimum: int = 16) -> int:
    # scale intervals, not nodes, so 2001 -> 501 keeps the node at y = 1
    return max(minimum, int(round((n - 1) * grid_scale())) + 1)


@dataclass(frozen=True)
class LayerConfig:
    # Blasius
    tol: float = 1e-10
    eta_max: float = 12.0
    blasius_n: int = 4096
    x0: float = 1.0
    # shear
    shear_family: str = "exp_approach"
    shear_amplitude: float = 0.05
    shear_scale: float = 1.0
    # Euler strip
    L: float = 1.0
    Y_max: float = 20.0
    euler_nx: int = 41
    euler_nY: int = 401
    c_u: float = 0.5
    side_scale: float = 1.0
    # layer-1 march
    y_max: float = 20.0
    ny: int = 2001
    nx: int = 41
    scheme: str = "bdf1"
    # forcing g_ext1 = c e^{-y}; c = None calibrates
    forcing_c: float | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "LayerConfig":
        known = set(cls.__dataclass_fields__)
        bad = sorted(set(d) - known)
        if bad:
            raise ConfigError(f"unknown layer keys: {bad}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class LayerStack:
    config: LayerConfig
    sol: BlasiusSolution
    shear: ShearFlow
    flow: BlasiusFlow
    euler: EulerCorrector
    pp: ParallelProfiles
    forcing_c: float
    g_ext1: np.ndarray
    f1: ForcingF1
    layer1: PrandtlLayer
    extras: dict = field(default_factory=dict)

    @property
    def y_grid(self) -> Grid1D:
        return self.pp.grid


def build_layers(cfg: LayerConfig | None = None, sol: BlasiusSolution | None = None) -> LayerStack:
    cfg = cfg or LayerConfig()
    sol = sol or solve_blasius(cfg.tol, cfg.eta_max, cfg.blasius_n)
    Yg = Grid1D.uniform(cfg.Y_max, cfg.euler_nY)
    shear = make_shear(cfg.shear_family, cfg.shear_amplitude, cfg.shear_scale, Yg)
    flow = BlasiusFlow(sol, cfg.x0, shear.ue0)
    eg = Grid2D.uniform(cfg.L, cfg.euler_nx, Yg)
    # bottom data cancels the entrainment of the leading layer
    euler = solve_v1e(shear, flow.v_inf(eg.x_nodes), eg,
                      u_side=lambda Y: cfg.c_u * np.exp(-Y / cfg.side_scale),
                      side_scale=cfg.side_scale, require_positive=True)
    yg = Grid1D.uniform(cfg.y_max, cfg.ny)
    pp = parallel_profiles(flow, yg)
    y = yg.nodes
    c = cfg.forcing_c if cfg.forcing_c is not None else calibrate_forcing(compute_K(pp), yg)
    g = c * np.exp(-y)
    lg = Grid2D.uniform(cfg.L, cfg.nx, yg)
    traces = euler_wall_traces(euler, lg.x_nodes)
    f1, layer1, corner = march_layer1(flow, lg, traces, g, shear.ueY0, cfg.scheme)
    return LayerStack(cfg, sol, shear, flow, euler, pp, float(c), g, f1, layer1,
                      {"corner": corner})


def march_layer1(flow: BlasiusFlow, grid: Grid2D, traces: dict, g_ext1, ueY0: float,
                 scheme: str = "bdf1"):
    """f1, the marched first-order layer and its corner data from wall traces."""
    x = grid.x_nodes
    y = grid.y_grid.nodes
    f1 = compute_f1(flow, x, y, traces, g_ext1, ueY0)
    u1e = np.broadcast_to(np.asarray(traces["u1e"], dtype=float), x.shape)
    corner = corner_data(f1, grid.y_grid, flow, u1e[0])
    init = initial_trace(y, *corner)
    layer1 = march_prandtl_layer(flow, f1, -u1e, init, grid, scheme=scheme)
    return f1, layer1, corner


def corner_data(f1: ForcingF1, y_grid: Grid1D, flow: BlasiusFlow, u1e00: float):
    """(u1_e(0,0), f(0,0), f_y(0,0), ubar_xy(0,0)) for the layer-1 initial trace."""
    f_y00 = derivative(f1.values[0], y_grid, 1, accuracy=4)[0]
    return (float(u1e00), float(f1.values[0, 0]), float(f_y00),
            float(flow.fields(0.0, 0.0)["u_xy"]))


def with_overrides(cfg: LayerConfig, **kw) -> LayerConfig:
    return replace(cfg, **kw)
