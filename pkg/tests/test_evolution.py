import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from wavespec.errors import NumericalError, ParameterError
from wavespec.evolution import (
    WavePacket,
    linear_evolve,
    packet_growth_fit,
    sandwich_width,
    simpson_weights,
)
from wavespec.operators import apply_J, assemble_L
from wavespec.spectra import refine_eigenpair


def gaussian_packet(sigma0=1e-2, a=1.0, k0=0.5, half=1.0, nk=2001, n=4):
    """sigma(k) = sigma0 - a (k - k0)^2 with identical unit vectors.

    The norm is then exactly proportional to exp(sigma0 t) t^(-1/4), up to
    the exponentially small tails cut off by the window.
    """
    k = np.linspace(k0 - half, k0 + half, nk)
    vec = np.zeros((nk, n))
    vec[:, 0] = 1.0
    return WavePacket(k, simpson_weights(k), sigma0 - a * (k - k0) ** 2, vec, 1.0, sigma0, k0, (k[0], k[-1]))


@given(st.integers(1, 40), st.floats(-3.0, 3.0), st.floats(0.1, 5.0))
def test_simpson_exact_for_cubics(m, a, length):
    x = np.linspace(a, a + length, 2 * m + 1)
    w = simpson_weights(x)
    exact = ((a + length) ** 4 - a**4) / 4 - ((a + length) ** 2 - a**2) / 2
    assert_allclose(w @ (x**3 - x), exact, rtol=1e-11, atol=1e-11)


def test_simpson_rejects_even_nodes():
    with pytest.raises(ParameterError):
        simpson_weights(np.linspace(0, 1, 4))
    assert_allclose(simpson_weights([0.3]), [1.0])


def test_gaussian_packet_norm_closed_form():
    p = gaussian_packet()
    t = np.array([200.0, 800.0, 2000.0])
    # 2 * 2 pi * int exp(2 sigma t) dk = 4 pi exp(2 sigma0 t) sqrt(pi / (2 a t))
    expected = 0.5 * np.log(4 * np.pi * np.sqrt(np.pi / (2 * t))) + 1e-2 * t
    assert_allclose(p.log_norm(t), expected, rtol=1e-10)
    assert_allclose(np.log(p.norm(t)), expected, rtol=1e-10)


def test_gaussian_packet_fit_recovers_quarter():
    p = gaussian_packet()
    t = np.linspace(2 / p.sigma0, 20 / p.sigma0, 64)
    sigma, rho = packet_growth_fit(p, t)
    # the model uses log(1 + t) where the exact decay is log t, a 1/t bias
    assert_allclose(sigma, p.sigma0, rtol=1e-4)
    assert_allclose(rho, 0.25, rtol=1e-2)
    assert sandwich_width(p, t, m=2) < 1e-2


def test_single_mode_packet_has_no_algebraic_decay():
    k = np.array([0.3])
    p = WavePacket(k, np.ones(1), np.array([0.05]), np.ones((1, 4)), 0.5, 0.05, 0.3)
    t = np.linspace(40.0, 400.0, 16)
    sigma, rho = packet_growth_fit(p, t)
    assert_allclose(sigma, 0.05, rtol=1e-10)
    assert abs(rho) < 1e-8


def test_fit_window_enforced():
    p = gaussian_packet()
    with pytest.raises(ParameterError):
        packet_growth_fit(p, np.linspace(1.0, 2000.0, 10))
    with pytest.raises(NumericalError):
        packet_growth_fit(p, [200.0, 300.0])
    with pytest.raises(NumericalError):
        packet_growth_fit(p, np.linspace(200.0, 250.0, 10))
    with pytest.raises(ParameterError):
        packet_growth_fit(p, np.linspace(200.0, 2000.0, 10), sigma0=-1.0)


def test_log_norm_does_not_overflow():
    p = gaussian_packet(sigma0=1.0)
    assert np.isinf(p.norm(1e4)).all()
    assert_allclose(p.log_norm(1e4), 1e4 + 0.5 * np.log(4 * np.pi * np.sqrt(np.pi / 2e4)), rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_field_is_real(seed):
    rng = np.random.default_rng(seed)
    nk, n = 5, 6
    k = np.linspace(0.1, 0.5, nk)
    vec = rng.standard_normal((nk, n)) + 1j * rng.standard_normal((nk, n))
    p = WavePacket(k, simpson_weights(k), rng.uniform(0.0, 0.1, nk), vec)
    f = p.field(3.0, np.linspace(-5.0, 5.0, 7))
    assert f.shape == (7, n)
    assert np.abs(f.imag).max() <= 1e-13 * np.abs(f).max()


@pytest.fixture(scope="module")
def jl_k0(small_wave):
    k = 0.0283
    L = assemble_L(small_wave, k)
    return k, L, apply_J(L, "JL").matrix


def test_evolve_zero_data(small_wave, jl_k0):
    k, _, JL = jl_k0
    t, V = linear_evolve(small_wave, k, np.zeros(JL.shape[0]), 1.0, 0.25, JL=JL)
    assert_allclose(t, [0, 0.25, 0.5, 0.75, 1.0])
    assert not V.any()
    with pytest.raises(ParameterError):
        linear_evolve(small_wave, k, np.zeros(3), 1.0, 0.1, JL=JL)
    with pytest.raises(ParameterError):
        linear_evolve(small_wave, k, np.ones(JL.shape[0]), 1.0, 0.1, method="rk4", JL=JL)


def test_eigenmode_grows_at_sigma(small_wave, jl_k0):
    k, _, JL = jl_k0
    sigma, vec, resid = refine_eigenpair(JL, 1.9e-3)
    assert resid < 1e-10
    T = 3.0 / sigma
    t, V = linear_evolve(small_wave, k, vec, T, T / 30, JL=JL)
    ratio = np.linalg.norm(V, axis=1) / np.linalg.norm(vec)
    assert_allclose(ratio, np.exp(sigma * t), rtol=1e-6)


def test_midpoint_conserves_form_and_matches_eig(small_wave, jl_k0):
    k, L, JL = jl_k0
    x = small_wave.grid.x
    V0 = np.concatenate([np.exp(-((x / 8) ** 2)), np.tanh(x / 8) * np.exp(-((x / 16) ** 2))])
    T = 200.0
    tm, Vm = linear_evolve(small_wave, k, V0, T, T / 400, method="midpoint", JL=JL)
    q = np.array([V @ L.matrix @ V for V in Vm])
    assert np.abs(q - q[0]).max() <= 1e-8 * abs(q[0])
    te, Ve = linear_evolve(small_wave, k, V0, T, T / 400, method="eig", JL=JL)
    assert_allclose(te, tm)
    # halving the step cuts the error against the exact propagator by about 4
    _, Vh = linear_evolve(small_wave, k, V0, T, T / 800, method="midpoint", JL=JL)
    e1 = np.linalg.norm(Vm[-1] - Ve[-1])
    e2 = np.linalg.norm(Vh[-1] - Ve[-1])
    assert 3.5 < e1 / e2 < 4.5
