import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from wavespec.checks import dno_coercivity_constant
from wavespec.dno import (
    apply_dno,
    apply_dno_direct,
    build_flattening,
    compute_Z_v,
    dno_matrix,
    flat_dno_symbol,
    frechet_dno,
)
from wavespec.errors import ConvergenceError, DegenerateDomainError
from wavespec.grid import inner_product, make_grid, make_strip, weighted_seminorm


def periodic_surface(grid, amp=0.1):
    """Smooth periodic surface with both parities."""
    x = np.pi * grid.x / grid.half_length
    return amp * (np.exp(np.cos(x)) - np.i0(1.0)) + 0.3 * amp * np.sin(2 * x)


@pytest.fixture(scope="module")
def strip():
    return make_strip(make_grid(np.pi, 64), 24)


@pytest.mark.parametrize(
    "xi, k, expected",
    [(0.0, 0.0, 0.0), (1.0, 0.0, math.tanh(1.0)), (3.0, 4.0, 5 * math.tanh(5.0))],
)
def test_flat_symbol(xi, k, expected):
    assert flat_dno_symbol(xi, k) == pytest.approx(expected, rel=1e-15, abs=0)


def test_flat_symbol_values():
    # frozen decimals of tanh(1), sqrt(2) tanh(sqrt(2)), 5 tanh(5)
    assert flat_dno_symbol(1.0) == pytest.approx(0.761594, abs=5e-7)
    assert flat_dno_symbol(1.0, 1.0) == pytest.approx(1.256367, abs=5e-7)
    assert flat_dno_symbol(3.0, 4.0) == pytest.approx(4.99955, abs=5e-6)


def test_flattening_flat_and_constant(strip):
    m = build_flattening(np.zeros(64), strip)
    assert_allclose(m.g11, 1.0)
    assert_allclose(m.g12, 0.0)
    assert_allclose(m.g22, 1.0)
    assert_allclose(m.sqrt_det, 1.0)
    c = -0.3
    m = build_flattening(np.full(64, c), strip)
    assert_allclose(m.g12, 0.0, atol=1e-15)
    assert_allclose(m.g22, (1 + c) ** -2)


def test_flattening_spot_check():
    grid = make_grid(40.0, 256)
    s = make_strip(grid, 17)
    eta = -0.01 / np.cosh(grid.x / 2) ** 2
    m = build_flattening(eta, s)
    j, i = 131, 8
    x, z = grid.x[j], s.z[i]
    assert (x, z) == pytest.approx((0.9375, -0.5))
    e = -0.01 / math.cosh(x / 2) ** 2
    ex = 0.01 * math.tanh(x / 2) / math.cosh(x / 2) ** 2
    assert m.g12[i, j] == pytest.approx(-ex * (z + 1) / (1 + e), rel=1e-9)
    assert m.g22[i, j] == pytest.approx((1 + (z + 1) ** 2 * ex**2) / (1 + e) ** 2, rel=1e-12)


def test_degenerate_domain(strip):
    with pytest.raises(DegenerateDomainError):
        build_flattening(np.full(64, -0.995), strip)
    with pytest.raises(DegenerateDomainError):
        apply_dno(np.full(64, -1.2), 0.0, np.ones(64), strip)


@pytest.mark.parametrize("k, factor", [(0.0, math.tanh(1.0)), (1.0, math.sqrt(2) * math.tanh(math.sqrt(2)))])
def test_flat_cosine(strip, k, factor):
    x = strip.base.x
    assert_allclose(apply_dno(np.zeros(64), k, np.cos(x), strip), factor * np.cos(x), atol=1e-12)


def test_flat_constant_is_annihilated(strip):
    assert np.abs(apply_dno(np.zeros(64), 0.0, np.full(64, 2.0), strip)).max() <= 1e-13


def test_flat_matrix_is_fourier_multiplier(strip):
    g = strip.base
    for k in (0.0, 0.7):
        G = dno_matrix(np.zeros(64), k, strip).matrix
        expected = g.multiplier_matrix(flat_dno_symbol(g.wavenumbers, k))
        assert np.abs(G - expected).max() <= 1e-10


def test_iterative_matches_direct_solve(strip):
    eta = periodic_surface(strip.base)
    u = np.cos(strip.base.x) + 0.2 * np.sin(3 * strip.base.x)
    for k in (0.0, 0.8):
        assert_allclose(apply_dno(eta, k, u, strip), apply_dno_direct(eta, k, u, strip), atol=1e-10)


def test_nonconvergence_is_reported(strip):
    eta = periodic_surface(strip.base, amp=0.3)
    with pytest.raises(ConvergenceError):
        apply_dno(eta, 0.0, np.cos(strip.base.x), strip, maxit=1)


def test_matrix_properties_on_wave(small_wave):
    r = dno_matrix(small_wave.eta, 0.0, small_wave.strip, symmetrize=False)
    assert r.asymmetry <= 1e-8
    assert np.abs(r.matrix.sum(axis=1)).max() <= 1e-9
    sym = dno_matrix(small_wave.eta, 0.0, small_wave.strip)
    assert np.abs(sym.matrix.sum(axis=1)).max() <= 1e-12
    assert np.linalg.eigvalsh(sym.matrix).min() >= -1e-10


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), k=st.floats(0.0, 2.0))
def test_dno_symmetric_on_random_pairs(strip, seed, k):
    eta = periodic_surface(strip.base)
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, 64))
    u = np.fft.irfft(np.fft.rfft(u) * (np.arange(33) < 12), 64)
    v = np.fft.irfft(np.fft.rfft(v) * (np.arange(33) < 12), 64)
    g = strip.base
    lhs = inner_product(g, apply_dno(eta, k, u, strip), v)
    rhs = inner_product(g, u, apply_dno(eta, k, v, strip))
    assert abs(lhs - rhs) <= 1e-8 * np.sqrt(inner_product(g, u, u).real * inner_product(g, v, v).real)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_quadratic_form_increasing_in_k(strip, seed):
    eta = periodic_surface(strip.base)
    u = np.random.default_rng(seed).standard_normal(64)
    ks = np.linspace(0.0, 2.0, 5)
    forms = [inner_product(strip.base, apply_dno(eta, k, u, strip), u).real for k in ks]
    assert np.all(np.diff(forms) > 0)


def test_coercivity_constant_stable_under_refinement():
    """min (G u, u) / |u|_k^2 over a fixed family of smooth u, on two grids."""
    consts = []
    for n in (48, 96):
        g = make_grid(np.pi, n)
        s = make_strip(g, 24)
        eta = periodic_surface(g)
        ratios = []
        for m in range(1, 6):
            for k in (0.0, 1.0):
                u = np.cos(m * g.x) + 0.5 * np.sin((m + 1) * g.x)
                form = inner_product(g, apply_dno(eta, k, u, s), u).real
                ratios.append(form / weighted_seminorm(g, u, k) ** 2)
        consts.append(min(ratios))
    assert min(consts) > 0
    assert consts[0] == pytest.approx(consts[1], rel=1e-8)


def test_Z_v_flat(strip):
    x = strip.base.x
    Z, v = compute_Z_v(np.zeros(64), np.zeros(64), strip)
    assert np.abs(Z).max() == 0 and np.abs(v).max() == 0
    Z, v = compute_Z_v(np.zeros(64), np.cos(x), strip)
    assert_allclose(Z, math.tanh(1.0) * np.cos(x), atol=1e-12)
    assert_allclose(v, -np.sin(x), atol=1e-12)


def test_frechet_trivial_cases(strip):
    x = strip.base.x
    eta = periodic_surface(strip.base)
    assert np.abs(frechet_dno(eta, np.cos(x), np.zeros(64), 0.5, strip)).max() <= 1e-14
    bump = np.exp(-4 * x**2)
    assert np.abs(frechet_dno(np.zeros(64), np.full(64, 1.5), bump, 0.0, strip)).max() <= 1e-12


def _central_difference(eta, phi, h, k, strip, t=1e-5):
    return (apply_dno(eta + t * h, k, phi, strip) - apply_dno(eta - t * h, k, phi, strip)) / (2 * t)


def test_frechet_flat_bump(strip):
    x = strip.base.x
    phi, h = np.cos(x), np.exp(-4 * x**2)
    fd = _central_difference(np.zeros(64), phi, h, 0.0, strip)
    an = frechet_dno(np.zeros(64), phi, h, 0.0, strip)
    assert np.linalg.norm(an - fd) / np.linalg.norm(fd) <= 1e-6


def test_frechet_random_directions(strip):
    g = strip.base
    eta = periodic_surface(g)
    phi = np.sin(g.x) + 0.3 * np.cos(2 * g.x)
    rng = np.random.default_rng(7)
    for _ in range(10):
        c = np.zeros(33, dtype=complex)
        c[:8] = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        h = np.fft.irfft(c, 64)
        k = rng.uniform(0, 1.5)
        fd = _central_difference(eta, phi, h, k, strip)
        an = frechet_dno(eta, phi, h, k, strip)
        assert np.linalg.norm(an - fd) / np.linalg.norm(fd) <= 1e-5


def test_coercivity_constant_flat_oracle(flat_wave):
    xi = np.abs(flat_wave.grid.wavenumbers)
    for k in (0.0, 0.5):
        r = np.sqrt(xi**2 + k**2)
        r = r[r > 0]
        expected = np.min((1 + r) * np.tanh(r) / r)
        assert_allclose(dno_coercivity_constant(flat_wave, k), expected, rtol=1e-8)


def test_coercivity_constant_positive_on_wave(small_wave):
    assert dno_coercivity_constant(small_wave, 0.0) > 0.5
