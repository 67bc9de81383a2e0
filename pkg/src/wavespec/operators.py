"""Dense linearized operators about a line solitary wave.

For a transverse wavenumber k the perturbation U = (U1, U2) of (eta, phi)
evolves by dU/dt = J L(k) U with J = [[0, 1], [-1, 0]] and the symmetric
block operator

    L(k) = [[-P_k + alpha + (v - 1) Z_x,  (v - 1) d/dx],
            [-d/dx ((v - 1) .),           G_k         ]].

Lambda(k) is the same operator written in the variables (U1, U2 - Z U1);
the two are congruent, L = P^T Lambda P with P = [[1, 0], [Z, 1]].

All matrices act on nodal values of the periodic grid. Because the grid
quadrature weight is the constant dx, symmetry with respect to the discrete
L2 product is ordinary matrix symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dno import dno_matrix
from .errors import NumericalError
from .grid import Grid1D, spectral_derivative

KINDS = ("L", "Lambda", "JL", "JLambda")


@dataclass
class BlockOperator:
    """2x2 block operator on pairs of grid functions."""

    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    k: float
    kind: str

    @property
    def symmetric(self) -> bool:
        return self.kind in ("L", "Lambda")

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.A11, self.A12], [self.A21, self.A22]])

    def symmetry_residual(self) -> float:
        M = self.matrix
        return float(np.linalg.norm(M - M.T) / np.linalg.norm(M))

    def __matmul__(self, U):
        n = self.A11.shape[0]
        U = np.asarray(U)
        top = self.A11 @ U[:n] + self.A12 @ U[n:]
        bottom = self.A21 @ U[:n] + self.A22 @ U[n:]
        return np.concatenate([top, bottom])


@dataclass
class ReducedOperator:
    """Scalar operator on grid functions (A_eps, M or its inverse)."""

    matrix: np.ndarray
    kind: str
    asymmetry: float = 0.0


def apply_J(block: BlockOperator, kind: str) -> BlockOperator:
    """J A = [[A21, A22], [-A11, -A12]]."""
    return BlockOperator(block.A21, block.A22, -block.A11, -block.A12, block.k, kind)


def symplectic_matrix(n: int) -> np.ndarray:
    Z = np.zeros((n, n))
    I = np.eye(n)
    return np.block([[Z, I], [-I, Z]])


# ---------------------------------------------------------------- building blocks


def capillary_matrix(grid: Grid1D, eta, beta: float, k: float = 0.0) -> np.ndarray:
    """Matrix of P_k u = beta (d/dx(w3 u_x) - k^2 w1 u), w_s = (1 + eta_x^2)^(-s/2).

    The divergence term is D1 diag(w3) D1 plus the Nyquist part of the second
    derivative (D2 - D1 D1), so that the flat case reproduces beta D2 exactly.
    """
    D1 = grid.derivative_matrix(1)
    D2 = grid.derivative_matrix(2)
    eta_x = spectral_derivative(grid, np.asarray(eta, dtype=float))
    s = 1.0 + eta_x**2
    P = (D1 * s**-1.5) @ D1 + (D2 - D1 @ D1)
    if k:
        P -= k**2 * np.diag(s**-0.5)
    P *= beta
    return 0.5 * (P + P.T)


def capillary_term(grid: Grid1D, eta, beta: float) -> np.ndarray:
    """beta d/dx(eta_x / sqrt(1 + eta_x^2)), consistent with ``capillary_matrix``."""
    eta = np.asarray(eta, dtype=float)
    eta_x = spectral_derivative(grid, eta)
    nyq = spectral_derivative(grid, eta, 2) - spectral_derivative(grid, eta_x)
    return beta * (spectral_derivative(grid, eta_x / np.sqrt(1.0 + eta_x**2)) + nyq)


def l_blocks(grid: Grid1D, P, G, Z, v, alpha):
    """Blocks of L from the capillary matrix P, DN matrix G and fields Z, v.

    The multiplication by (v - 1) Z_x is written as the symmetric commutator
    (v-1) D1 Z - Z D1 (v-1) plus Z v_x, which keeps L exactly congruent to
    Lambda on the grid.
    """
    D1 = grid.derivative_matrix(1)
    vm = v - 1.0
    v_x = spectral_derivative(grid, v)
    comm = vm[:, None] * D1 * Z[None, :]
    A11 = -P + alpha * np.eye(grid.n) + comm + comm.T + np.diag(Z * v_x)
    A12 = vm[:, None] * D1
    A21 = A12.T.copy()
    return A11, A12, A21, G


def lambda_blocks(grid: Grid1D, P, G, Z, v, alpha):
    D1 = grid.derivative_matrix(1)
    vm = v - 1.0
    v_x = spectral_derivative(grid, v)
    ZG = Z[:, None] * G
    A11 = -P + alpha * np.eye(grid.n) + ZG * Z[None, :] + np.diag(Z * v_x)
    A11 = 0.5 * (A11 + A11.T)
    A12 = vm[:, None] * D1 - ZG
    A21 = A12.T.copy()
    return A11, A12, A21, G


# ------------------------------------------------------------------ DN access


def dno_for(w, k: float):
    """DN realization of the wave surface at wavenumber k, memoized on ``w``."""
    k = float(abs(k))
    memo = w.dno_memo
    if k not in memo:
        builder = w.dno_builder or dno_matrix
        memo[k] = builder(w.eta, k, w.strip)
    return memo[k]


# ------------------------------------------------------------------ assembly


def assemble_P(w, k: float = 0.0) -> np.ndarray:
    return capillary_matrix(w.grid, w.eta, w.params.beta, k)


def assemble_L(w, k: float) -> BlockOperator:
    G = dno_for(w, k).matrix
    blocks = l_blocks(w.grid, assemble_P(w, k), G, w.Z, w.v, w.params.alpha)
    return BlockOperator(*blocks, k=float(k), kind="L")


def conjugators(w):
    """P_mat = [[1, 0], [Z, 1]] and its inverse Q_mat = [[1, 0], [-Z, 1]]."""
    n = w.grid.n
    I = np.eye(n)
    O = np.zeros((n, n))
    Zd = np.diag(w.Z)
    return np.block([[I, O], [Zd, I]]), np.block([[I, O], [-Zd, I]])


def assemble_Lambda(w, k: float):
    """Return (Lambda(k), P_mat, Q_mat)."""
    G = dno_for(w, k).matrix
    blocks = lambda_blocks(w.grid, assemble_P(w, k), G, w.Z, w.v, w.params.alpha)
    P_mat, Q_mat = conjugators(w)
    return BlockOperator(*blocks, k=float(k), kind="Lambda"), P_mat, Q_mat


def assemble_JL(w, k: float) -> BlockOperator:
    return apply_J(assemble_L(w, k), "JL")


def assemble_JLambda(w, k: float) -> BlockOperator:
    return apply_J(assemble_Lambda(w, k)[0], "JLambda")


def conjugation_residual(w, k: float) -> float:
    """||L - P^T Lambda P|| / ||L|| in the Frobenius norm."""
    L = assemble_L(w, k).matrix
    Lam, P_mat, _ = assemble_Lambda(w, k)
    return float(np.linalg.norm(L - P_mat.T @ Lam.matrix @ P_mat) / np.linalg.norm(L))


# ------------------------------------------------------- M, its inverse, A_eps


def antiderivative_matrix(grid: Grid1D) -> np.ndarray:
    xi = grid.wavenumbers
    sym = np.zeros(grid.n, dtype=complex)
    mask = (xi != 0) & (np.arange(grid.n) != grid.n // 2)
    sym[mask] = 1.0 / (1j * xi[mask])
    return grid.multiplier_matrix(sym)


def assemble_M(w) -> ReducedOperator:
    """M = -d/dx^{-1} G_0 d/dx^{-1} on mean-zero functions (constants mapped to 0)."""
    A = antiderivative_matrix(w.grid)
    G = dno_for(w, 0.0).matrix
    M = -A @ G @ A
    return ReducedOperator(0.5 * (M + M.T), "M", float(np.linalg.norm(M - M.T) / np.linalg.norm(M)))


def m_inverse_matrix(w, closure: str = "energy") -> np.ndarray:
    """Dense symmetric matrix of M^{-1} = -d/dx G_0^{-1} d/dx.

    closure="periodic": G_0 is inverted on periodic potentials, so M^{-1}
    annihilates constants.

    closure="energy": the potential space is enlarged by the linear potential x,
    which has finite Dirichlet energy per unit length and DN image -eta_x. With
    B = [D1, 1] and the extended energy matrix

        G_e = [[G_0, -eta_x], [-eta_x^T, |Omega| / dx]],   |Omega| = sum(1 + eta) dx,

    M^{-1} = B G_e^+ B^T. For a flat surface its zero-frequency multiplier is 1,
    the limit of |xi| / tanh|xi| that the periodic inverse misses.
    """
    grid = w.grid
    n = grid.n
    D1 = grid.derivative_matrix(1)
    G = dno_for(w, 0.0).matrix
    if closure == "periodic":
        Gp = np.linalg.pinv(G, rcond=1e-12, hermitian=True)
        M = -D1 @ Gp @ D1
        return 0.5 * (M + M.T)
    if closure != "energy":
        raise ValueError(f"unknown closure {closure!r}")
    eta_x = spectral_derivative(grid, w.eta)
    Ge = np.empty((n + 1, n + 1))
    Ge[:n, :n] = G + 1.0 / n  # removes the constant null vector
    Ge[:n, n] = -eta_x
    Ge[n, :n] = -eta_x
    Ge[n, n] = float(np.sum(1.0 + w.eta))
    B = np.hstack([D1, np.ones((n, 1))])
    M = B @ np.linalg.solve(Ge, B.T)
    return 0.5 * (M + M.T)


def apply_M_inverse(w, f, closure: str = "energy") -> np.ndarray:
    return m_inverse_matrix(w, closure) @ np.asarray(f, dtype=float)


def assemble_A_eps(w, closure: str = "energy") -> ReducedOperator:
    """A_eps u = -P_0 u + alpha u + gamma (gamma eta_x)_x u - gamma M^{-1}(gamma u)."""
    grid = w.grid
    g = w.gamma
    potential = g * spectral_derivative(grid, g * w.eta_x)
    Minv = m_inverse_matrix(w, closure)
    A = -assemble_P(w, 0.0) + np.diag(w.params.alpha + potential) - g[:, None] * Minv * g[None, :]
    asym = float(np.linalg.norm(A - A.T) / np.linalg.norm(A))
    if asym > 1e-4:
        raise NumericalError(f"A_eps asymmetry {asym:.2e} too large", {"asymmetry": asym})
    return ReducedOperator(0.5 * (A + A.T), "A_eps", asym)
