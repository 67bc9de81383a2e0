"""Line solitary wave: leading-order profile and Newton refinement.

The velocity potential of the solitary wave is a kink (phi tends to different
constants as x -> +-inf), so it is not periodic on the computational box. We
write it as phi = U x + phi_p with phi_p periodic and U the mean of phi_x.
The linear potential x has the exact DN image G[eta] x = -eta_x, so every
quantity can be evaluated with periodic data only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dno import apply_dno, dno_matrix, is_even, surface_fields
from .errors import ConvergenceError, DegenerateDomainError, NumericalError
from .grid import Grid1D, StripGrid, antiderivative, make_grid, make_strip, spectral_derivative
from .operators import capillary_matrix, capillary_term, lambda_blocks
from .params import Params, default_half_length

log = logging.getLogger(__name__)


@dataclass(eq=False)
class SolitaryWave:
    """Surface elevation and potential of a steady wave, with derived fields.

    ``phi`` holds nodal values of the full potential U x + phi_p; ``mean_flow``
    is U and ``phi_periodic`` is phi_p.
    """

    params: Params
    strip: StripGrid
    eta: np.ndarray
    phi_periodic: np.ndarray
    mean_flow: float
    residual_norm: float = np.nan
    iterations: int = 0
    history: list = field(default_factory=list)
    dno_builder: object = None
    dno_memo: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        self.phi_periodic = np.asarray(self.phi_periodic, dtype=float)
        self.mean_flow = float(self.mean_flow)
        self._fields = None

    @property
    def grid(self) -> Grid1D:
        return self.strip.base

    @property
    def phi(self) -> np.ndarray:
        return self.mean_flow * self.grid.x + self.phi_periodic

    @property
    def eta_x(self) -> np.ndarray:
        return spectral_derivative(self.grid, self.eta)

    @property
    def phi_x(self) -> np.ndarray:
        return self.mean_flow + spectral_derivative(self.grid, self.phi_periodic)

    def _derived(self):
        if self._fields is None:
            self._fields = derived_fields(self.strip, self.eta, self.phi_periodic, self.mean_flow)
        return self._fields

    @property
    def g_phi(self) -> np.ndarray:
        """G[eta] phi at k = 0."""
        return self._derived()["g_phi"]

    @property
    def Z(self) -> np.ndarray:
        return self._derived()["Z"]

    @property
    def v(self) -> np.ndarray:
        return self._derived()["v"]

    @property
    def gamma(self) -> np.ndarray:
        """(1 - phi_x) / (1 + eta_x^2)."""
        return (1.0 - self.phi_x) / (1.0 + self.eta_x**2)

    def profile_table(self) -> dict:
        return {
            "x": self.grid.x,
            "eta": self.eta,
            "phi": self.phi,
            "Z": self.Z,
            "v": self.v,
            "gamma": self.gamma,
        }


def derived_fields(strip: StripGrid, eta, phi_periodic, mean_flow):
    grid = strip.base
    eta_x = spectral_derivative(grid, eta)
    phi_x = mean_flow + spectral_derivative(grid, phi_periodic)
    g_phi = apply_dno(eta, 0.0, phi_periodic, strip) - mean_flow * eta_x
    Z, v = surface_fields(grid, eta_x, phi_x, g_phi)
    return {"eta_x": eta_x, "phi_x": phi_x, "g_phi": g_phi, "Z": Z, "v": v}


def leading_profile(params: Params, grid: Grid1D | None = None, Nz: int = 48, strip: StripGrid | None = None):
    """KdV-scale approximation eta = -eps^2 sech^2(s), phi = -2 sqrt(beta - 1/3) eps tanh(s).

    Here s = eps x / (2 sqrt(beta - 1/3)). The returned wave is unrefined; its
    ``residual_norm`` is the sup norm of the steady residual.
    """
    if strip is None:
        if grid is None:
            grid = make_grid(default_half_length(params), 512)
        strip = make_strip(grid, Nz)
    grid = strip.base
    eps, c = params.epsilon, params.width
    s = eps * grid.x / (2.0 * c)
    sech2 = 1.0 / np.cosh(s) ** 2
    eta = -(eps**2) * sech2
    phi_x = -(eps**2) * sech2
    U = float(np.mean(phi_x))
    phi_p = antiderivative(grid, phi_x - U)
    wave = SolitaryWave(params, strip, eta, phi_p, U)
    r1, r2 = steady_residual(wave.eta, wave.phi_periodic, params, strip, mean_flow=U)
    wave.residual_norm = float(max(np.abs(r1).max(), np.abs(r2).max()))
    return wave


def steady_residual(eta, phi, params: Params, strip: StripGrid, mean_flow: float = 0.0):
    """Residuals (r1, r2) of the steady system in the frame moving with unit speed.

    r1 = eta_x + G[eta] phi
    r2 = phi_x - phi_x^2/2 + (G[eta] phi + eta_x phi_x)^2 / (2 (1 + eta_x^2))
         - alpha eta + beta d/dx(eta_x / sqrt(1 + eta_x^2))

    ``phi`` is the periodic part of the potential; the full potential is
    mean_flow * x + phi.
    """
    grid = strip.base
    eta = np.asarray(eta, dtype=float)
    f = derived_fields(strip, eta, np.asarray(phi, dtype=float), mean_flow)
    eta_x, phi_x, g_phi = f["eta_x"], f["phi_x"], f["g_phi"]
    r1 = eta_x + g_phi
    r2 = (
        phi_x
        - 0.5 * phi_x**2
        + 0.5 * (g_phi + eta_x * phi_x) ** 2 / (1.0 + eta_x**2)
        - params.alpha * eta
        + capillary_term(grid, eta, params.beta)
    )
    return r1, r2


class _SymmetricBasis:
    """Even/odd reduction on the periodic grid (reflection about x = 0)."""

    def __init__(self, n):
        h = n // 2
        self.n, self.h = n, h
        even = np.zeros((n, h + 1))
        for m in range(h + 1):
            even[m, m] = 1.0
            even[(n - m) % n, m] = 1.0
        odd = np.zeros((n, h - 1))
        for m in range(1, h):
            odd[m, m - 1] = 1.0
            odd[n - m, m - 1] = -1.0
        self.even, self.odd = even, odd
        self.even_rows = np.arange(h + 1)
        self.odd_rows = np.arange(1, h)


def _jacobian(wave: SolitaryWave, G, basis: _SymmetricBasis):
    """Newton matrix on (eta even, phi_p odd, U) -> (r1 odd rows, r2 even rows, far field)."""
    grid = wave.grid
    p = wave.params
    f = wave._derived()
    P = capillary_matrix(grid, wave.eta, p.beta, 0.0)
    A11, A12, A21, A22 = lambda_blocks(grid, P, G, f["Z"], f["v"], p.alpha)
    eta_x = f["eta_x"]
    # the linearized steady map is J Lambda(0): (h, psi) -> (A21 h + A22 psi, -A11 h - A12 psi)
    u_col1 = -eta_x
    u_col2 = 1.0 - f["v"] - f["Z"] * eta_x
    E, O = basis.even, basis.odd
    ro, re = basis.odd_rows, basis.even_rows
    D1 = grid.derivative_matrix(1)
    top = np.hstack([(A21 @ E)[ro], (A22 @ O)[ro], u_col1[ro, None]])
    mid = np.hstack([(-A11 @ E)[re], (-A12 @ O)[re], u_col2[re, None]])
    far = np.hstack([np.zeros(E.shape[1]), (D1[0] @ O), [1.0]])
    return np.vstack([top, mid, far[None, :]])


def _reduced_residual(r1, r2, phi_x, basis):
    return np.concatenate([r1[basis.odd_rows], r2[basis.even_rows], [phi_x[0]]])


def newton_refine(guess: SolitaryWave, tol: float = 1e-10, maxit: int = 12, dno_builder=None):
    """Refine ``guess`` by Newton's method restricted to eta even, phi odd.

    The unknowns are the even nodal values of eta, the odd nodal values of
    phi_p and the mean flow U; the equations are the odd part of r1, the even
    part of r2 and phi_x = 0 at the box edge. Each step halves the update
    until the residual sup norm decreases.
    """
    grid, strip, params = guess.grid, guess.strip, guess.params
    if not (is_even(grid, guess.eta, 1e-12) and _is_odd(grid, guess.phi_periodic)):
        raise NumericalError("initial guess must have eta even and phi odd")
    builder = dno_builder or dno_matrix
    basis = _SymmetricBasis(grid.n)
    eta, phi_p, U = guess.eta.copy(), guess.phi_periodic.copy(), guess.mean_flow

    def evaluate(eta, phi_p, U):
        wave = SolitaryWave(params, strip, eta, phi_p, U)
        r1, r2 = steady_residual(eta, phi_p, params, strip, mean_flow=U)
        F = _reduced_residual(r1, r2, wave.phi_x, basis)
        return wave, F, float(max(np.abs(r1).max(), np.abs(r2).max(), abs(F[-1])))

    wave, F, res = evaluate(eta, phi_p, U)
    history = [res]
    it = 0
    while res > tol:
        if it >= maxit:
            raise ConvergenceError(
                f"Newton did not reach {tol:g} in {maxit} iterations (residual {res:.3e})",
                {"history": history},
            )
        it += 1
        G = builder(wave.eta, 0.0, strip).matrix
        Jm = _jacobian(wave, G, basis)
        cond = np.linalg.cond(Jm)
        if not np.isfinite(cond) or cond > 1e14:
            raise NumericalError("Newton matrix is singular on the symmetric subspace", {"cond": cond})
        step = np.linalg.solve(Jm, -F)
        d_eta = basis.even @ step[: basis.h + 1]
        d_phi = basis.odd @ step[basis.h + 1 : -1]
        d_U = step[-1]
        lam = 1.0
        while True:
            try:
                trial = evaluate(eta + lam * d_eta, phi_p + lam * d_phi, U + lam * d_U)
            except DegenerateDomainError:
                trial = None
            if trial is not None and trial[2] < res:
                break
            lam *= 0.5
            if lam < 1e-4:
                raise ConvergenceError("line search failed", {"history": history})
        eta, phi_p, U = eta + lam * d_eta, phi_p + lam * d_phi, U + lam * d_U
        wave, F, res = trial
        history.append(res)
        log.info("newton iteration %d: residual %.3e (step %.3g)", it, res, lam)
    wave.residual_norm = res
    wave.iterations = it
    wave.history = history
    wave.dno_builder = dno_builder
    return wave


def _is_odd(grid, f, tol=1e-12):
    f = np.asarray(f)
    return float(np.abs(f + grid.reflect(f)).max()) <= tol * max(1.0, float(np.abs(f).max()))


def solve_solitary(params: Params, Nx: int = 512, Nz: int = 48, Lx: float | None = None, tol: float = 1e-10, dno_builder=None):
    """Leading-order guess followed by Newton refinement on the default box."""
    if Lx is None:
        Lx = default_half_length(params)
    strip = make_strip(make_grid(Lx, Nx), Nz)
    guess = leading_profile(params, strip=strip)
    return newton_refine(guess, tol=tol, dno_builder=dno_builder)


def verify_identities(w: SolitaryWave) -> dict:
    """Sup-norm residuals of the identities satisfied by a steady wave."""
    eta_x = w.eta_x
    gamma = w.gamma
    return {
        "dno_identity": float(np.abs(w.g_phi + eta_x).max()),
        "Z_identity": float(np.abs(w.Z + gamma * eta_x).max()),
        "v_identity": float(np.abs(w.v - (1.0 - gamma)).max()),
        "gamma_min": float(gamma.min()),
        "eta_symmetry": float(np.abs(w.eta - w.grid.reflect(w.eta)).max()),
        "phi_symmetry": float(np.abs(w.phi_periodic + w.grid.reflect(w.phi_periodic)).max()),
    }
