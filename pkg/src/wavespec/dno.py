"""Dirichlet-Neumann operator of a fluid strip with a curved free surface.

The fluid domain {-1 < z < eta(x)} is flattened to the strip S = R x (-1, 0)
by z' = (z - eta)/(1 + eta). The potential with transverse dependence
exp(iky) then solves a variable-coefficient problem

    -div(sqrt(g) g^{-1} grad psi) + k^2 sqrt(g) psi = 0,   sqrt(g) = 1 + eta,

with psi = u on top and a Neumann condition on the bottom. We write
psi = u_H + u_r where u_H is the flat-strip extension of u (known in closed
form in Fourier variables) and u_r has homogeneous boundary data. The
correction u_r is found by a Richardson iteration preconditioned with the
flat operator, which is inverted exactly by Fourier transform in x and
diagonalization of the Chebyshev second derivative in z.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DegenerateDomainError, NumericalError, ParameterError
from .grid import Grid1D, StripGrid, spectral_derivative

log = logging.getLogger(__name__)

#: minimal allowed fluid depth 1 + min(eta)
MIN_DEPTH = 1e-2
#: raw asymmetry of an assembled matrix above which we refuse to symmetrize
ASYMMETRY_LIMIT = 1e-6


def flat_dno_symbol(xi, k=0.0):
    """Symbol tanh(r) r, r = sqrt(xi^2 + k^2), of the flat-strip operator."""
    r = np.sqrt(np.asarray(xi, dtype=float) ** 2 + float(k) ** 2)
    return np.tanh(r) * r


@dataclass(frozen=True)
class FlatteningMetric:
    """Inverse metric and volume factor of the flattening map on the strip.

    Arrays have shape (Nz, Nx) with rows indexed by the vertical node.
    """

    strip: StripGrid
    eta: np.ndarray
    eta_x: np.ndarray
    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    sqrt_det: np.ndarray


def _check_surface(eta, grid: Grid1D, min_depth=MIN_DEPTH):
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (grid.n,):
        raise ParameterError(f"surface has shape {eta.shape}, expected ({grid.n},)")
    if not np.all(np.isfinite(eta)):
        raise ParameterError("surface contains non-finite values")
    if 1.0 + eta.min() <= min_depth:
        raise DegenerateDomainError(
            f"fluid depth 1 + min(eta) = {1.0 + eta.min():.3g} is below {min_depth}"
        )
    return eta


def build_flattening(eta, strip: StripGrid, min_depth=MIN_DEPTH) -> FlatteningMetric:
    eta = _check_surface(eta, strip.base, min_depth)
    eta_x = spectral_derivative(strip.base, eta)
    zz = (strip.z + 1.0)[:, None]
    depth = 1.0 + eta
    g11 = np.ones((strip.nz, strip.base.n))
    g12 = -eta_x * zz / depth
    g22 = (1.0 + zz**2 * eta_x**2) / depth**2
    sqrt_det = np.broadcast_to(depth, g11.shape).copy()
    return FlatteningMetric(strip, eta, eta_x, g11, g12, g22, sqrt_det)


class _Solver:
    """Flat-preconditioned Richardson solver for a fixed surface and k."""

    def __init__(self, eta, k, strip: StripGrid, min_depth=MIN_DEPTH):
        grid = strip.base
        self.strip = strip
        self.n = grid.n
        self.k = float(k)
        self.eta = _check_surface(eta, grid, min_depth)
        self.eta_x = spectral_derivative(grid, self.eta)
        xi = grid.rwavenumbers
        self.ik = 1j * xi * grid.nyquist_mask
        self.r = np.sqrt(xi**2 + self.k**2)
        z = strip.z
        zz = (z + 1.0)[:, None]
        # cosh(r(z+1))/cosh(r) without overflow
        self.profile = np.exp(np.outer(z, self.r)) * (1.0 + np.exp(-2.0 * np.outer(zz[:, 0], self.r))) / (
            1.0 + np.exp(-2.0 * self.r)
        )
        self.top_flux = self.r * np.tanh(self.r)
        # coefficient perturbations relative to the flat strip
        self.cxz = -self.eta_x * zz
        self.czz = (1.0 + zz**2 * self.eta_x**2) / (1.0 + self.eta) - 1.0
        self.a, lam, self.V, self.Vinv = strip.vertical_solver
        self.denom = -lam[:, None] + self.r[None, :] ** 2
        self.Dz = strip.dz

    @staticmethod
    def _rmul(D, X):
        """Real matrix D applied along axis -2 of a complex stack X."""
        X = np.ascontiguousarray(X)
        return (D @ X.view(np.float64)).view(np.complex128)

    def apply(self, u, tol=1e-13, maxit=200):
        """Return (G u, iterations) for a batch u of shape (B, Nx).

        The iteration is carried in x-Fourier variables; only the
        variable-coefficient products are formed on the grid.
        """
        n, Dz, nz = self.n, self.Dz, self.strip.nz
        uh = np.fft.rfft(u, axis=-1)
        psi_harm = uh[:, None, :] * self.profile[None]
        scale = max(1e-300, float(np.abs(uh).max()))
        corr = np.zeros(psi_harm.shape[:1] + (nz - 2,) + psi_harm.shape[2:], dtype=complex)
        psi_hat = psi_harm.copy()
        history = []
        k2 = self.k**2
        for it in range(1, maxit + 1):
            psi = np.fft.irfft(psi_hat, n=n, axis=-1)
            px = np.fft.irfft(self.ik * psi_hat, n=n, axis=-1)
            pz = Dz @ psi
            fx = np.fft.rfft(self.eta * px + self.cxz * pz, axis=-1)
            fz = np.fft.rfft(self.cxz * px + self.czz * pz, axis=-1)
            rhs = self.ik * fx + self._rmul(Dz, fz)
            if k2:
                rhs -= k2 * np.fft.rfft(self.eta * psi, axis=-1)
            new = self._rmul(self.Vinv, rhs[:, 1 : nz - 1]) / self.denom
            change = float(np.abs(new - corr).max()) / scale
            history.append(change)
            corr = new
            interior = self._rmul(self.V, corr)
            psi_hat = psi_harm.copy()
            psi_hat[:, 1 : nz - 1] += interior
            psi_hat[:, 0] += np.einsum("j,bjx->bx", self.a, interior)
            if change <= tol:
                break
            if it > 5 and change >= 0.5 * history[-2] and change <= 1e3 * tol:
                # stagnated at roundoff level
                break
        else:
            raise ConvergenceError(
                f"DN correction solve did not converge in {maxit} iterations",
                {"history": history},
            )
        if change > 1e3 * tol:
            raise ConvergenceError("DN correction solve stagnated", {"history": history})
        top_hat = np.einsum("j,bjx->bx", Dz[-1], psi_hat - psi_harm) + uh * self.top_flux
        pz_top = np.fft.irfft(top_hat, n=n, axis=-1)
        px_top = np.fft.irfft(self.ik * uh, n=n, axis=-1)
        g = -self.eta_x * px_top + (1.0 + self.eta_x**2) / (1.0 + self.eta) * pz_top
        return g, len(history)


def apply_dno(eta, k, u, strip: StripGrid, tol=1e-13, maxit=200, batch=8):
    """Apply the transverse-reduced DN operator G_k[eta] to ``u``.

    ``u`` may be a single grid function or a stack with shape (B, Nx).
    """
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    U = np.atleast_2d(u)
    if U.shape[-1] != strip.base.n:
        raise ParameterError("data does not match the grid")
    solver = _Solver(eta, k, strip)
    out = np.empty_like(U)
    for s in range(0, U.shape[0], batch):
        out[s : s + batch], _ = solver.apply(U[s : s + batch], tol=tol, maxit=maxit)
    return out[0] if single else out


def apply_dno_direct(eta, k, u, strip: StripGrid):
    """Dense direct solve of the flattened problem; an independent check for small grids."""
    grid = strip.base
    eta = _check_surface(eta, grid)
    u = np.asarray(u, dtype=float)
    n, nz = grid.n, strip.nz
    eta_x = spectral_derivative(grid, eta)
    zz = (strip.z + 1.0)[:, None]
    a = np.broadcast_to(1.0 + eta, (nz, n)).ravel()
    b = (-eta_x * zz).ravel()
    c = ((1.0 + zz**2 * eta_x**2) / (1.0 + eta)).ravel()
    Dx = np.kron(np.eye(nz), grid.derivative_matrix(1))
    Dz = np.kron(strip.dz, np.eye(n))
    fx = a[:, None] * Dx + b[:, None] * Dz
    fz = b[:, None] * Dx + c[:, None] * Dz
    A = -(Dx @ fx) - (Dz @ fz) + np.diag(k**2 * a)
    # bottom rows: conormal flux vanishes; top rows: Dirichlet data
    bottom = slice(0, n)
    top = slice((nz - 1) * n, nz * n)
    A[bottom] = fz[bottom]
    A[top] = 0.0
    A[top, top] = np.eye(n)
    U = np.atleast_2d(u)
    rhs = np.zeros((nz * n, U.shape[0]))
    rhs[top] = U.T
    psi = np.linalg.solve(A, rhs)
    # at z = 0 the conormal flux is -eta_x psi_x + (1 + eta_x^2)/(1 + eta) psi_z
    g = (fz[top] @ psi).T
    return g[0] if u.ndim == 1 else g


@dataclass
class DnoRealization:
    """Dense matrix of G_k[eta] acting on nodal values (symmetrized)."""

    eta: np.ndarray
    k: float
    matrix: np.ndarray
    asymmetry: float
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    def __matmul__(self, other):
        return self.matrix @ other


def is_even(grid: Grid1D, f, tol=1e-13):
    f = np.asarray(f)
    return float(np.abs(f - grid.reflect(f)).max()) <= tol * max(1.0, float(np.abs(f).max()))


def dno_matrix(eta, k, strip: StripGrid, tol=1e-13, batch=8, symmetrize=True) -> DnoRealization:
    """Assemble G_k[eta] column by column.

    When eta is even only half of the columns are solved for; the others follow
    from the reflection x -> -x, which commutes with the operator.
    """
    grid = strip.base
    n = grid.n
    solver = _Solver(eta, k, strip)
    if is_even(grid, solver.eta):
        cols = np.arange(n // 2 + 1)
    else:
        cols = np.arange(n)
    G = np.empty((n, n))
    iters = 0
    for s in range(0, len(cols), batch):
        idx = cols[s : s + batch]
        E = np.zeros((len(idx), n))
        E[np.arange(len(idx)), idx] = 1.0
        g, it = solver.apply(E, tol=tol)
        G[:, idx] = g.T
        iters = max(iters, it)
    if len(cols) < n:
        refl = (-np.arange(n)) % n
        for j in range(n // 2 + 1, n):
            G[:, j] = G[refl, n - j]
    scale = np.linalg.norm(G)
    asym = float(np.linalg.norm(G - G.T) / scale) if scale > 0 else 0.0
    if asym > ASYMMETRY_LIMIT:
        raise NumericalError(
            f"DN matrix asymmetry {asym:.2e} exceeds {ASYMMETRY_LIMIT:.0e}",
            {"asymmetry": asym, "k": k},
        )
    if symmetrize:
        G = 0.5 * (G + G.T)
        if k == 0:
            G = project_constants(G)
    return DnoRealization(np.array(solver.eta), float(k), G, asym, iters)


def project_constants(G):
    """Return (I - 11^T/n) G (I - 11^T/n)."""
    G = G - G.mean(axis=0, keepdims=True)
    return G - G.mean(axis=1, keepdims=True)


def surface_fields(grid: Grid1D, eta_x, phi_x, g_phi):
    """Z = (G phi + eta_x phi_x)/(1 + eta_x^2) and v = phi_x - Z eta_x."""
    Z = (g_phi + eta_x * phi_x) / (1.0 + eta_x**2)
    return Z, phi_x - Z * eta_x


def compute_Z_v(eta, phi, strip: StripGrid, k=0.0):
    """Vertical and horizontal surface velocities for a periodic potential."""
    grid = strip.base
    eta_x = spectral_derivative(grid, np.asarray(eta, dtype=float))
    phi_x = spectral_derivative(grid, np.asarray(phi, dtype=float))
    g_phi = apply_dno(eta, k, phi, strip)
    return surface_fields(grid, eta_x, phi_x, g_phi)


def frechet_dno(eta, phi, h, k, strip: StripGrid):
    """Derivative of eta -> G_k[eta] phi in the direction h (h independent of y).

    -G_k[eta](h Z_k) - d/dx(h (phi_x - Z_k eta_x)) + k^2 h phi.
    """
    grid = strip.base
    h = np.asarray(h, dtype=float)
    phi = np.asarray(phi, dtype=float)
    Z, v = compute_Z_v(eta, phi, strip, k)
    return -apply_dno(eta, k, h * Z, strip) - spectral_derivative(grid, h * v) + k**2 * h * phi
