"""Periodic Fourier grid in x and Chebyshev grid on the vertical strip [-1, 0].

Grid functions are plain numpy arrays whose last axis has length ``grid.n``;
every routine takes the grid explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [-Lx, Lx) with ``n`` nodes."""

    half_length: float
    n: int

    def __post_init__(self):
        if not self.half_length > 0:
            raise ParameterError("Lx must be positive")
        if self.n % 2:
            raise ParameterError("Nx must be even")
        if self.n < 16:
            raise ParameterError("Nx must be at least 16")

    @property
    def length(self) -> float:
        return 2.0 * self.half_length

    @property
    def dx(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.n)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Wavenumbers pi*n/Lx in FFT order, n = 0..N/2-1, -N/2..-1."""
        return np.pi * np.fft.fftfreq(self.n, d=1.0 / self.n) / self.half_length

    @cached_property
    def rwavenumbers(self) -> np.ndarray:
        return np.pi * np.arange(self.n // 2 + 1) / self.half_length

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """1 on the rfft modes, 0 on the Nyquist mode."""
        m = np.ones(self.n // 2 + 1)
        m[-1] = 0.0
        return m

    @cached_property
    def fourier_matrix(self) -> np.ndarray:
        return np.fft.fft(np.eye(self.n), axis=0)

    def multiplier_matrix(self, symbol: np.ndarray) -> np.ndarray:
        """Dense real matrix of the Fourier multiplier ``symbol`` (FFT order)."""
        F = self.fourier_matrix
        M = np.fft.ifft(symbol[:, None] * F, axis=0)
        return M.real

    def derivative_matrix(self, order: int = 1) -> np.ndarray:
        return self._derivative_matrices(order)

    def _derivative_matrices(self, order):
        cache = self.__dict__.setdefault("_dmat_cache", {})
        if order not in cache:
            cache[order] = self.multiplier_matrix(_derivative_symbol(self, order).astype(complex))
            cache[order].setflags(write=False)
        return cache[order]

    def reflect(self, u: np.ndarray) -> np.ndarray:
        """u(-x) on the grid (node j maps to node N - j mod N)."""
        idx = (-np.arange(self.n)) % self.n
        return u[..., idx]


def make_grid(Lx: float, Nx: int) -> Grid1D:
    return Grid1D(float(Lx), int(Nx))


def _derivative_symbol(grid: Grid1D, order: int) -> np.ndarray:
    xi = grid.wavenumbers
    sym = (1j * xi) ** order
    if order % 2:
        sym[grid.n // 2] = 0.0
    return sym


def spectral_derivative(grid: Grid1D, u, order: int = 1) -> np.ndarray:
    """Fourier derivative of ``u`` along its last axis.

    The Nyquist coefficient is dropped for odd orders so that real input gives
    real output and the discrete first derivative stays skew-symmetric.
    """
    if order < 1:
        raise ParameterError("derivative order must be >= 1")
    u = np.asarray(u)
    if u.shape[-1] != grid.n:
        raise ParameterError(f"grid function has length {u.shape[-1]}, grid has {grid.n}")
    if np.iscomplexobj(u):
        return np.fft.ifft(_derivative_symbol(grid, order) * np.fft.fft(u, axis=-1), axis=-1)
    xi = grid.rwavenumbers
    sym = (1j * xi) ** order
    if order % 2:
        sym = sym * grid.nyquist_mask
    return np.fft.irfft(sym * np.fft.rfft(u, axis=-1), n=grid.n, axis=-1)


def antiderivative(grid: Grid1D, u) -> np.ndarray:
    """Mean-free periodic antiderivative of the mean-free part of ``u``."""
    u = np.asarray(u, dtype=float)
    xi = grid.rwavenumbers
    inv = np.zeros_like(xi, dtype=complex)
    inv[1:-1] = 1.0 / (1j * xi[1:-1])
    return np.fft.irfft(inv * np.fft.rfft(u, axis=-1), n=grid.n, axis=-1)


def inner_product(grid: Grid1D, u, v) -> complex:
    """Quadrature of int u conj(v) dx over one period (exact for trig polynomials)."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape[-1] != grid.n or v.shape[-1] != grid.n:
        raise ParameterError("grid functions do not match the grid")
    return complex(grid.dx * np.sum(u * np.conj(v)))


def l2_norm(grid: Grid1D, u) -> float:
    return float(np.sqrt(grid.dx * np.sum(np.abs(u) ** 2)))


def seminorm_weight(xi, k):
    r = np.sqrt(np.asarray(xi) ** 2 + k**2)
    return r / np.sqrt(1.0 + r)


def weighted_seminorm(grid: Grid1D, u, k: float = 0.0) -> float:
    """L2 norm of the multiplier sqrt(xi^2+k^2)/(1+sqrt(xi^2+k^2))^(1/2) applied to u."""
    u = np.asarray(u)
    if u.shape[-1] != grid.n:
        raise ParameterError("grid function does not match the grid")
    uh = np.fft.fft(u, axis=-1)
    w = seminorm_weight(grid.wavenumbers, k)
    # Parseval: dx * sum|u|^2 = (dx / N) * sum|u_hat|^2
    return float(np.sqrt(grid.dx / grid.n * np.sum(np.abs(w * uh) ** 2)))


def chebyshev_lobatto(n: int):
    """Nodes cos(pi j/(n-1)) and the differentiation matrix (Trefethen's cheb)."""
    m = n - 1
    t = np.cos(np.pi * np.arange(n) / m)
    c = np.hstack([2.0, np.ones(m - 1), 2.0]) * (-1.0) ** np.arange(n)
    T = np.tile(t, (n, 1)).T
    dT = T - T.T
    D = np.outer(c, 1.0 / c) / (dT + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    return t, D


@dataclass(frozen=True)
class StripGrid:
    """Tensor grid on [-Lx, Lx) x [-1, 0]; Chebyshev-Gauss-Lobatto nodes in z."""

    base: Grid1D
    nz: int

    def __post_init__(self):
        if self.nz < 8:
            raise ParameterError("Nz must be at least 8")

    @cached_property
    def _cheb(self):
        t, D = chebyshev_lobatto(self.nz)
        # reverse so that z increases from -1 to 0
        t = t[::-1].copy()
        D = D[::-1, ::-1].copy()
        z = 0.5 * (t - 1.0)
        z[0], z[-1] = -1.0, 0.0
        return z, 2.0 * D

    @property
    def z(self) -> np.ndarray:
        return self._cheb[0]

    @property
    def dz(self) -> np.ndarray:
        """Chebyshev differentiation matrix in z."""
        return self._cheb[1]

    @cached_property
    def vertical_solver(self):
        """Diagonalization of d^2/dz^2 with u(0)=0 and u_z(-1)=0.

        Returns (a, lam, V, Vinv): the bottom value is u_0 = a . u_int and the
        reduced interior operator is V diag(lam) Vinv.
        """
        D = self.dz
        n = self.nz
        D2 = D @ D
        a = -D[0, 1 : n - 1] / D[0, 0]
        D2i = D2[1 : n - 1, 1 : n - 1] + np.outer(D2[1 : n - 1, 0], a)
        lam, V = np.linalg.eig(D2i)
        if np.max(np.abs(lam.imag)) > 1e-8 * np.max(np.abs(lam)):
            raise RuntimeError("Chebyshev vertical operator has complex spectrum")
        lam = lam.real
        V = V.real
        return a, lam, np.ascontiguousarray(V), np.ascontiguousarray(np.linalg.inv(V))


def make_strip(grid: Grid1D, Nz: int) -> StripGrid:
    return StripGrid(grid, int(Nz))
