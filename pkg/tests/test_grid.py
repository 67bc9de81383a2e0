import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from wavespec.errors import ParameterError
from wavespec.grid import (
    antiderivative,
    chebyshev_lobatto,
    inner_product,
    make_grid,
    make_strip,
    spectral_derivative,
    weighted_seminorm,
)


def test_fourier_grid_wavenumbers():
    g = make_grid(np.pi, 16)
    assert sorted(np.round(g.wavenumbers).astype(int)) == list(range(-8, 8))


def test_nodes_and_spacing():
    g = make_grid(10.0, 64)
    assert g.x[0] == -10.0
    assert_allclose(np.diff(g.x), 20.0 / 64)
    assert g.dx == pytest.approx(20.0 / 64)


@pytest.mark.parametrize(
    "Lx, Nx, message",
    [(np.pi, 15, "Nx must be even"), (np.pi, 8, "at least 16"), (0.0, 16, "Lx must be positive"), (-1.0, 16, "Lx")],
)
def test_bad_grids(Lx, Nx, message):
    with pytest.raises(ParameterError, match=message):
        make_grid(Lx, Nx)


def test_derivative_of_sine():
    g = make_grid(np.pi, 32)
    assert np.abs(spectral_derivative(g, np.sin(g.x)) - np.cos(g.x)).max() <= 1e-12


@pytest.mark.parametrize("order", [1, 2, 3])
def test_derivative_of_constant(order):
    g = make_grid(3.0, 32)
    assert np.abs(spectral_derivative(g, np.full(32, 2.5), order)).max() <= 1e-13


def test_second_derivative_of_gaussian():
    g = make_grid(20.0, 256)
    exact = -2 * (1 - 2 * g.x**2) * np.exp(-(g.x**2))
    assert np.abs(spectral_derivative(g, np.exp(-(g.x**2)), 2) - exact).max() <= 1e-8


def test_nyquist_zeroed_for_odd_orders():
    g = make_grid(np.pi, 16)
    nyq = np.cos(8 * g.x)  # (-1)^j on the grid
    assert np.abs(spectral_derivative(g, nyq, 1)).max() <= 1e-12
    assert_allclose(spectral_derivative(g, nyq, 2), -64 * nyq, atol=1e-10)


def test_derivative_matrix_matches_function():
    g = make_grid(5.0, 32)
    u = np.random.default_rng(0).standard_normal(32)
    for order in (1, 2):
        assert_allclose(g.derivative_matrix(order) @ u, spectral_derivative(g, u, order), atol=1e-10)


def test_antiderivative_inverts_derivative():
    g = make_grid(np.pi, 32)
    u = np.sin(3 * g.x) + np.cos(g.x)
    assert_allclose(spectral_derivative(g, antiderivative(g, u)), u, atol=1e-12)


def test_inner_products():
    g = make_grid(np.pi, 32)
    assert inner_product(g, np.sin(g.x), np.sin(g.x)) == pytest.approx(np.pi)
    assert abs(inner_product(g, np.sin(g.x), np.cos(g.x))) <= 1e-14
    assert inner_product(g, np.ones(32), np.ones(32)) == pytest.approx(2 * np.pi)


def test_weighted_seminorm_examples():
    g = make_grid(np.pi, 32)
    assert weighted_seminorm(g, np.zeros(32)) == 0.0
    assert weighted_seminorm(g, np.exp(1j * g.x)) == pytest.approx(np.sqrt(np.pi), rel=1e-13)
    assert weighted_seminorm(g, np.full(32, 3.0)) <= 1e-14


@settings(max_examples=30, deadline=None)
@given(n=st.integers(-7, 7), order=st.integers(1, 4))
def test_fourier_modes_are_eigenfunctions(n, order):
    g = make_grid(2.0, 16)
    mode = np.exp(1j * n * np.pi * g.x / 2.0)
    expect = (1j * n * np.pi / 2.0) ** order * mode
    assert_allclose(spectral_derivative(g, mode, order), expect, atol=1e-10 * (1 + abs(n)) ** order)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_inner_product_conjugate_symmetric(seed):
    g = make_grid(4.0, 32)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    v = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    assert inner_product(g, u, v) == pytest.approx(np.conj(inner_product(g, v, u)), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), k1=st.floats(0, 5), k2=st.floats(0, 5))
def test_weighted_seminorm_monotone_in_k(seed, k1, k2):
    g = make_grid(4.0, 32)
    u = np.random.default_rng(seed).standard_normal(32)
    lo, hi = sorted((k1, k2))
    assert weighted_seminorm(g, u, hi) >= weighted_seminorm(g, u, lo) * (1 - 1e-14)


def test_strip_endpoints_and_chebyshev():
    s = make_strip(make_grid(3.0, 16), 12)
    assert s.z[0] == -1.0 and s.z[-1] == 0.0
    assert np.all(np.diff(s.z) > 0)
    t, D = chebyshev_lobatto(12)
    assert_allclose(D @ t**3, 3 * t**2, atol=1e-11)
    with pytest.raises(ParameterError):
        make_strip(make_grid(3.0, 16), 6)
