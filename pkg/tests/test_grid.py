import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from prandtl_toolkit.errors import GridError
from prandtl_toolkit.grid import (Grid1D, WeightSpec, cumulative, derivative, diff_matrix,
                                  integrate, weighted_l2_norm)

from conftest import rates


def test_derivative_of_constant_is_zero():
    g = Grid1D.uniform(5.0, 51)
    for order in (1, 2, 3, 4):
        assert np.abs(derivative(np.ones(g.n), g, order)).max() < 1e-9


def test_second_derivative_of_square_is_two():
    g = Grid1D.uniform(3.0, 31)
    assert np.allclose(derivative(g.nodes ** 2, g, 2), 2.0, atol=1e-9)


def test_third_derivative_of_exp_second_order():
    errs = []
    for n in (201, 401, 801):
        g = Grid1D.uniform(4.0, n)
        d3 = derivative(np.exp(-g.nodes), g, 3)
        i = np.argmin(np.abs(g.nodes - 2.0))
        errs.append(abs(d3[i] + np.exp(-2.0)))
    assert errs[-1] < 1e-4
    assert rates(errs).min() > 1.8


@pytest.mark.parametrize("accuracy", [2, 4])
@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_stencils_exact_on_polynomials(order, accuracy):
    # a stencil of formal accuracy p for the k-th derivative uses p + k nodes
    g = Grid1D.graded(3.0, 0.05, 1.07)
    y = g.nodes / 3.0
    deg = order + accuracy - 1
    u = y ** deg
    exact = np.zeros_like(y) if order > deg else \
        np.prod(np.arange(deg, deg - order, -1)) * y ** (deg - order) / 3.0 ** order
    assert np.abs(derivative(u, g, order, accuracy) - exact).max() < 1e-7 * max(1.0, np.abs(exact).max())


def test_integrate_examples():
    g = Grid1D.uniform(10.0, 2001)
    assert integrate(np.zeros(g.n), g) == 0.0
    assert abs(integrate(g.nodes, g, 0.0, 1.0) - 0.5) < 1e-10
    assert abs(integrate(np.exp(-g.nodes), g) - (1 - np.exp(-10.0))) < 1e-6


def test_integrate_off_node_bounds_and_orientation():
    g = Grid1D.uniform(2.0, 21)
    assert abs(integrate(g.nodes, g, 0.05, 1.05) - 0.55) < 1e-12
    assert integrate(g.nodes, g, 1.0, 0.0) == pytest.approx(-0.5)
    with pytest.raises(GridError):
        integrate(g.nodes, g, 0.0, 3.0)


def test_weighted_norm_examples():
    g = Grid1D.uniform(1.0, 101)
    assert weighted_l2_norm(np.zeros(g.n), g) == 0.0
    assert abs(weighted_l2_norm(np.ones(g.n), g, WeightSpec("poly", 0.0)) - 1.0) < 1e-12
    g = Grid1D.uniform(20.0, 4001)
    got = weighted_l2_norm(np.exp(-g.nodes), g, WeightSpec("poly", 1.0))
    ref = np.sqrt(quad(lambda y: np.exp(-2 * y) * (1 + y * y), 0, 20, epsabs=1e-14)[0])
    assert abs(got - ref) < 1e-5


def test_weight_rejects_nonpositive():
    g = Grid1D.uniform(1.0, 21)
    with pytest.raises(GridError):
        WeightSpec("inv_v1e", samples=np.zeros(21)).evaluate(g)


def test_quadrature_second_order_on_gaussian():
    errs = []
    # on [0, 1.5] the end slope is nonzero, so the trapezoid rule is only second order
    ref = quad(lambda y: np.exp(-y * y), 0, 1.5, epsabs=1e-15)[0]
    for n in (41, 81, 161, 321):
        g = Grid1D.uniform(1.5, n)
        errs.append(abs(integrate(np.exp(-g.nodes ** 2), g, method="trapezoid") - ref))
    e = np.array(errs)
    assert np.all(e[:-1] / e[1:] >= 3.5)


def test_diff_then_integrate_recovers_endpoints():
    errs = []
    for n in (201, 401, 801):
        g = Grid1D.uniform(4.0, n)
        t = (g.nodes - 2.0) / 1.5
        u = np.where(np.abs(t) < 1, np.exp(-1 / np.maximum(1 - t * t, 1e-300)), 0.0) + np.sin(g.nodes)
        du = derivative(u, g, 1)
        errs.append(abs(integrate(du, g, method="trapezoid") - (u[-1] - u[0])))
    assert errs[-1] < 1e-5
    assert rates(errs).min() > 1.8


def test_cumulative_matches_integrate():
    g = Grid1D.uniform(3.0, 301)
    c = cumulative(np.cos(g.nodes), g)
    assert abs(c[-1] - integrate(np.cos(g.nodes), g, method="trapezoid")) < 1e-13
    assert c[0] == 0.0


def test_grid_json_round_trip():
    g = Grid1D.graded(10.0, 0.01)
    assert Grid1D.from_json(g.to_json()) == g
    d = json.loads(g.to_json())
    assert set(d) == {"nodes", "y_max", "kind"}
    d["extra"] = 1
    with pytest.raises(GridError):
        Grid1D.from_json(json.dumps(d))


def test_grid_rejects_bad_nodes():
    with pytest.raises(GridError):
        Grid1D(np.r_[np.linspace(0, 1, 19), 0.5])
    with pytest.raises(GridError):
        Grid1D(np.linspace(0.1, 1.0, 20))


def test_graded_grid_respects_ratio():
    g = Grid1D.graded(3.0, 0.05, 1.07)
    h = np.diff(g.nodes)
    assert g.y_max == 3.0
    assert np.allclose(h[1:] / h[:-1], 1.07)
    assert h[0] <= 0.05


def test_refine_coarsen_inverse():
    g = Grid1D.uniform(4.0, 41)
    assert g.refine().coarsen() == g
    assert g.refine().n == 81


def test_diff_matrix_matches_derivative():
    g = Grid1D.uniform(2.0, 41)
    u = np.sin(g.nodes)
    assert np.allclose(diff_matrix(g, 2) @ u, derivative(u, g, 2), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), order=st.integers(1, 4))
def test_derivative_is_linear(a, b, order):
    g = Grid1D.uniform(3.0, 61)
    u, v = np.sin(g.nodes), np.exp(-g.nodes)
    lhs = derivative(a * u + b * v, g, order)
    rhs = a * derivative(u, g, order) + b * derivative(v, g, order)
    assert np.allclose(lhs, rhs, atol=1e-8 * (1 + abs(a) + abs(b)) * 61 ** order)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-1e3, 1e3).filter(lambda c: c == 0 or abs(c) > 1e-100))
def test_weighted_norm_homogeneous(c):
    g = Grid1D.uniform(5.0, 51)
    u = np.exp(-g.nodes) * np.cos(g.nodes)
    w = WeightSpec("poly", 2.0)
    assert weighted_l2_norm(c * u, g, w) == pytest.approx(abs(c) * weighted_l2_norm(u, g, w), rel=1e-12, abs=1e-300)
