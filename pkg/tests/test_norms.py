import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from anisowave.anisotropy import heat_anisotropy, make_anisotropy
from anisowave.errors import InvalidArgument
from anisowave.geometry import Cylinder, parabolic_boundary
from anisowave.grid import Grid
from anisowave.norms import (
    adaptivity_norm, aniso_sobolev_norm, besov_wavelet_norm, derivative, kondratiev_norm, kondratiev_orders,
    modulus_besov_seminorm, rho_field, w21_norm,
)
from anisowave.transform import forward, unit_coefficient_tree

BOX2 = ((0.0, 1.0), (0.0, 1.0))


@pytest.fixture
def tree(cdf22):
    x = np.random.default_rng(7).standard_normal((32, 128))
    return forward(Grid(x, BOX2), cdf22, heat_anisotropy(1), 2)


def test_besov_single_coefficient(tree):
    e = unit_coefficient_tree(tree, 1, (1, 1), (2, 2))
    alpha, p = 0.7, 2.0
    beta = alpha / 1 + 0.5 - 1 / p
    r = besov_wavelet_norm(e, alpha, p, 3.0)
    assert r.value == pytest.approx(8 ** beta)
    assert r.terms["coarse"] == 0
    assert r.levels[0] == 0 and r.levels[1] == pytest.approx(8**beta)


def test_besov_zero_tree(tree):
    from anisowave.transform import zeros_like

    assert besov_wavelet_norm(zeros_like(tree), 1.0, 2, 2).value == 0


def test_besov_alpha_lower_bound(tree):
    with pytest.raises(InvalidArgument):
        besov_wavelet_norm(tree, 0.0, 2, 2)
    with pytest.raises(InvalidArgument):
        besov_wavelet_norm(tree, 0.5, 0.5, 2)  # bound is N_s (1/p - 1) = 1
    besov_wavelet_norm(tree, 1.01, 0.5, 2)
    with pytest.raises(InvalidArgument):
        besov_wavelet_norm(tree, 1.0, math.inf, 2)


@given(st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.sampled_from([1.0, 2.0, 3.0]))
def test_besov_homogeneous(c, p):
    from anisowave.filters import make_spline_filters

    x = np.random.default_rng(0).standard_normal((32, 128))
    bank = make_spline_filters(2, 2)
    A = heat_anisotropy(1)
    t1 = forward(Grid(x, BOX2), bank, A, 2)
    t2 = forward(Grid(c * x, BOX2), bank, A, 2)
    assert besov_wavelet_norm(t2, 0.5, p, p).value == pytest.approx(abs(c) * besov_wavelet_norm(t1, 0.5, p, p).value)


@given(st.integers(0, 10**6))
def test_besov_triangle_inequality(seed):
    from anisowave.filters import make_spline_filters

    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 32, 128))
    bank = make_spline_filters(2, 2)
    A = heat_anisotropy(1)
    n = lambda z: besov_wavelet_norm(forward(Grid(z, BOX2), bank, A, 2), 0.8, 2, 1).value
    assert n(x + y) <= n(x) + n(y) + 1e-12


def test_adaptivity_single_coefficient(tree):
    e = unit_coefficient_tree(tree, 1, (1, 1), (0, 0))
    r = adaptivity_norm(e, 1.0, 2.0)
    assert r.params["tau"] == pytest.approx(2 / 3)
    assert r.value == pytest.approx(1.0)
    with pytest.raises(InvalidArgument):
        adaptivity_norm(e, -1, 2)


@pytest.mark.parametrize("order,deg", [(1, 2), (2, 3), (3, 3), (4, 5)])
def test_derivative_exact_on_polynomials(order, deg):
    x = np.linspace(0, 1, 40)
    f = x**deg
    exact = math.factorial(deg) / math.factorial(deg - order) * x ** (deg - order)
    assert np.allclose(derivative(f, 0, order, x[1] - x[0]), exact, atol=1e-6)


def test_derivative_needs_samples():
    with pytest.raises(InvalidArgument):
        derivative(np.ones(3), 0, 2, 0.1)


def test_sobolev_linear():
    g = Grid.sample(lambda x: x, (256,), ((0, 1),))
    r = aniso_sobolev_norm(g, [1], 2)
    assert r.value == pytest.approx(1 / math.sqrt(3) + 1, rel=1e-5)


def test_sobolev_sine_second_derivative():
    g = Grid.sample(lambda x, t: np.sin(np.pi * x) + 0 * t, (256, 4), BOX2)
    r = aniso_sobolev_norm(g, [2, 1], 2)
    assert r.terms["axes"][0] == pytest.approx(np.pi**2 / math.sqrt(2), rel=1e-4)
    assert r.terms["axes"][1] == pytest.approx(0, abs=1e-12)
    with pytest.raises(InvalidArgument):
        aniso_sobolev_norm(g, [2], 2)
    with pytest.raises(InvalidArgument):
        aniso_sobolev_norm(g, [2, -1], 2)


def test_w21_counts_mixed_pairs_twice():
    g = Grid.sample(lambda x, y, t: x * y + 0 * t, (16, 16, 8), ((0, 1),) * 3)
    r = w21_norm(g, 2)
    assert r.terms["mixed_second"] == pytest.approx(2.0)
    assert r.terms["pure_second"] == pytest.approx(0, abs=1e-9)
    assert w21_norm(g, 2, include_mixed=False).terms["mixed_second"] == 0
    with pytest.raises(InvalidArgument):
        w21_norm(Grid.zeros((8,), ((0, 1),)), 2)


def test_kondratiev_orders():
    assert kondratiev_orders("2/3", heat_anisotropy(1)) == (2, 1)
    assert kondratiev_orders(1, make_anisotropy((1, 1), 2)) == (1, 1)
    with pytest.raises(InvalidArgument, match="axis 0"):
        kondratiev_orders("1/2", heat_anisotropy(1))


def test_kondratiev_constant_function():
    cyl = Cylinder.unit(1)
    A = heat_anisotropy(1)
    g = Grid(np.full((32, 64), 2.0), cyl.box)
    M = parabolic_boundary(cyl, list(g.spacing / 4))
    rho = rho_field(g, M, A)
    gamma = 0.25
    r = kondratiev_norm(g, "2/3", A, gamma, 2, M)
    expect = math.sqrt(g.cell_volume * np.sum((2.0 * rho ** (2 / 3 - gamma)) ** 2))
    assert r.value == pytest.approx(expect)
    assert kondratiev_norm(g, "2/3", A, gamma, 2, rho=rho, seminorm_only=True).value == pytest.approx(0, abs=1e-10)


def test_kondratiev_classical_weights_differ():
    cyl = Cylinder.unit(1)
    A = heat_anisotropy(1)
    g = Grid.sample(lambda x, t: np.sin(np.pi * x) * np.exp(-t), (32, 64), cyl.box)
    M = parabolic_boundary(cyl, list(g.spacing / 4))
    a = kondratiev_norm(g, "2/3", A, 0.1, 2, M).value
    b = kondratiev_norm(g, "2/3", A, 0.1, 2, M, classical_weights=True).value
    assert a != b and a > 0 and b > 0
    with pytest.raises(InvalidArgument):
        kondratiev_norm(g, "2/3", A, 0.1, 2)
    with pytest.raises(InvalidArgument):
        kondratiev_norm(g, "2/3", A, 0.1, 0.5, M)


def test_modulus_vanishes_on_low_degree():
    g = Grid.sample(lambda x, y: 3 * x - y + 1, (64, 64), BOX2)
    assert modulus_besov_seminorm(g, [0.5, 0.5], 2, 2, [2, 2]).value == pytest.approx(0, abs=1e-10)
    with pytest.raises(InvalidArgument):
        modulus_besov_seminorm(g, [1.0, 0.5], 2, 2, [1, 1])


def test_modulus_cusp_threshold():
    # |x|^(1/2) has smoothness 1/2 + 1/p in L_p; the seminorm grows with resolution above it
    def val(n, a):
        g = Grid.sample(lambda x: np.abs(x) ** 0.5, (n,), ((-1, 1),))
        return modulus_besov_seminorm(g, [a], 2, 2, [2]).value

    assert val(4096, 0.8) / val(1024, 0.8) < 1.05
    assert val(4096, 1.2) / val(1024, 1.2) > 1.2
