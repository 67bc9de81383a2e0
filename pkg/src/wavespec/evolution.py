"""Unstable wave packets and the linearized time evolution.

A packet superposes the unstable eigenmodes over a window I of transverse
wavenumbers (and its mirror -I),

    U0(t, x, y) = int_{I u -I} exp(sigma(k) t + i k y) U(k)(x) dk.

By Parseval in y its L2(x, y) norm is

    ||U0(t)||^2 = 2 pi int_{I u -I} exp(2 sigma(k) t) ||U(k)||^2 dk,

which is what we evaluate with composite Simpson weights.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, ParameterError
from .operators import apply_J, assemble_L
from .spectra import refine_eigenpair

log = logging.getLogger(__name__)


def simpson_weights(x) -> np.ndarray:
    """Composite Simpson weights on an odd number of equispaced nodes."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 1:
        return np.ones(1)
    if n % 2 == 0 or n < 3:
        raise ParameterError("Simpson quadrature needs an odd number (>= 3) of nodes")
    h = (x[-1] - x[0]) / (n - 1)
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * h / 3.0


@dataclass
class WavePacket:
    """Samples k_i in I with weights, growth rates and unit-norm eigenvectors.

    ``vectors`` has shape (nk, 2 Nx); the mirror samples -k_i carry the complex
    conjugate vectors, so the synthesized packet is real.
    """

    k: np.ndarray
    weights: np.ndarray
    sigma: np.ndarray
    vectors: np.ndarray
    dx: float = 1.0
    sigma0: float = np.nan
    k0: float = np.nan
    window: tuple = ()

    def norm(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        sq = self.dx * np.sum(np.abs(self.vectors) ** 2, axis=1)
        # exp(2 sigma t) factored about sigma0 to avoid overflow
        s0 = float(np.max(self.sigma))
        e = np.exp(2.0 * np.outer(t, self.sigma - s0))
        total = 2.0 * 2.0 * np.pi * (e * (self.weights * sq)[None, :]).sum(axis=1)
        with np.errstate(over="ignore"):
            return np.sqrt(total) * np.exp(s0 * t)

    def log_norm(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        sq = self.dx * np.sum(np.abs(self.vectors) ** 2, axis=1)
        s0 = float(np.max(self.sigma))
        e = np.exp(2.0 * np.outer(t, self.sigma - s0))
        total = 2.0 * 2.0 * np.pi * (e * (self.weights * sq)[None, :]).sum(axis=1)
        return 0.5 * np.log(total) + s0 * t

    def field(self, t: float, y) -> np.ndarray:
        """Physical packet at time t on the transverse points ``y``; shape (len(y), 2 Nx)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        amp = self.weights * np.exp(self.sigma * t)
        # samples on I and their mirrors on -I, summed in ascending k
        k = np.concatenate([-self.k[::-1], self.k])
        a = np.concatenate([amp[::-1], amp])
        U = np.concatenate([np.conj(self.vectors[::-1]), self.vectors])
        return (np.exp(1j * np.outer(y, k)) * a[None, :]) @ U


def packet_window(curve, mode: str = "band", one_sided: bool = False):
    """Interval I of transverse wavenumbers used for the packet.

    mode="band": the whole detected band (default).
    mode="quarter": [k0 - w, k0 + w] intersected with the band, w a quarter of
    the band width; with ``one_sided`` the window becomes [k0, k0 + 2w].
    """
    if curve.band is None:
        raise NumericalError("empty instability band; no packet can be built")
    lo, hi = curve.band
    if mode == "band":
        return (lo, hi)
    if mode != "quarter":
        raise ParameterError(f"unknown window mode {mode!r}")
    w = 0.25 * (hi - lo)
    if one_sided:
        return (curve.k0, min(hi, curve.k0 + 2 * w))
    return (max(lo, curve.k0 - w), min(hi, curve.k0 + w))


def _unit(grid_dx, v):
    return v / np.sqrt(grid_dx * np.sum(np.abs(v) ** 2))


def build_wavepacket(curve, w, nk: int = 33, mode: str = "band", one_sided: bool = False, min_overlap: float = 0.9) -> WavePacket:
    """Sample the unstable eigenpairs on I with Simpson weights and align their signs."""
    if nk < 1:
        raise ParameterError("nk must be positive")
    if nk > 1 and nk % 2 == 0:
        nk += 1
    lo, hi = packet_window(curve, mode, one_sided)
    ks = np.array([curve.k0]) if nk == 1 else np.linspace(lo, hi, nk)
    weights = simpson_weights(ks)
    dx = w.grid.dx
    inside = curve.sigma_re > 0
    sigmas, vecs = [], []
    prev = None
    for k in ks:
        guess = float(np.interp(k, curve.k[inside], curve.sigma_re[inside])) if inside.any() else curve.sigma0
        guess = max(guess, curve.sigma0 * 1e-3)
        JL = apply_J(assemble_L(w, k), "JL").matrix
        s, v, resid = refine_eigenpair(JL, guess)
        if s <= 0:
            raise NumericalError(f"no unstable eigenvalue found at k={k:.6g}", {"k": k, "sigma": s})
        v = _unit(dx, v)
        if prev is not None:
            ov = dx * float(prev @ v)
            if ov < 0:
                v, ov = -v, -ov
            if ov < min_overlap:
                raise NumericalError(
                    f"eigenvector overlap {ov:.3f} between neighbouring k below {min_overlap}",
                    {"k": k, "overlap": ov},
                )
        prev = v
        sigmas.append(s)
        vecs.append(v)
        log.info("packet sample k=%.6g sigma=%.6e residual=%.1e", k, s, resid)
    return WavePacket(
        k=ks,
        weights=weights,
        sigma=np.array(sigmas),
        vectors=np.array(vecs),
        dx=dx,
        sigma0=curve.sigma0,
        k0=curve.k0,
        window=(lo, hi),
    )


def packet_growth_fit(p: WavePacket, t_grid, sigma0: float | None = None):
    """Least-squares fit of log||U0(t)|| = sigma t - rho log(1 + t) + c.

    Returns (sigma_fit, rho_fit). The times must lie in [2/sigma0, 20/sigma0].
    """
    t = np.asarray(t_grid, dtype=float)
    s0 = p.sigma0 if sigma0 is None else sigma0
    if not np.isfinite(s0) or s0 <= 0:
        raise ParameterError("a positive reference growth rate is required")
    if t.size < 3:
        raise NumericalError("growth fit needs at least 3 times")
    if t.min() < 2.0 / s0 * (1 - 1e-9) or t.max() > 20.0 / s0 * (1 + 1e-9):
        raise ParameterError("fit times must lie in [2/sigma0, 20/sigma0]")
    A = np.column_stack([t, -np.log1p(t), np.ones_like(t)])
    cond = np.linalg.cond(A / np.abs(A).max(axis=0))
    if t.max() - t.min() < 1.0 / s0 or cond > 1e8:
        raise NumericalError("time window too short for a stable fit", {"cond": cond})
    coef, *_ = np.linalg.lstsq(A, p.log_norm(t), rcond=None)
    return float(coef[0]), float(coef[1])


def sandwich_width(p: WavePacket, t_grid, m: int = 2) -> float:
    """Spread of log||U0(t)|| - sigma0 t + log(1 + t)/(2m) over ``t_grid``."""
    t = np.asarray(t_grid, dtype=float)
    g = p.log_norm(t) - p.sigma0 * t + np.log1p(t) / (2 * m)
    return float(g.max() - g.min())


# ---------------------------------------------------------------- time stepping


def linear_evolve(w, k, V0, T: float, dt: float, method: str = "eig", JL: np.ndarray | None = None, cond_limit: float = 1e10):
    """Integrate dV/dt = J L(k) V on [0, T] with step ``dt``.

    method="eig" propagates exactly through the eigendecomposition and falls
    back to the implicit midpoint rule when the eigenvector matrix is too
    ill-conditioned. method="midpoint" conserves (L V, V) up to roundoff.

    Returns (t, V) with V of shape (nt, 2 Nx).
    """
    if JL is None:
        JL = apply_J(assemble_L(w, k), "JL").matrix
    V0 = np.asarray(V0, dtype=float)
    if V0.shape != (JL.shape[0],):
        raise ParameterError("initial data does not match the operator size")
    if T < 0 or dt <= 0:
        raise ParameterError("need T >= 0 and dt > 0")
    nt = int(round(T / dt))
    t = dt * np.arange(nt + 1)
    if not np.any(V0):
        return t, np.zeros((nt + 1, V0.size))
    if method == "eig":
        lam, X = np.linalg.eig(JL)
        if np.linalg.cond(X) > cond_limit:
            log.warning("eigenvector matrix ill-conditioned; switching to implicit midpoint")
            method = "midpoint"
        else:
            c = np.linalg.solve(X, V0)
            V = (np.exp(np.outer(t, lam)) * c[None, :]) @ X.T
            return t, V.real
    if method != "midpoint":
        raise ParameterError(f"unknown propagator {method!r}")
    n = JL.shape[0]
    I = np.eye(n)
    lu = sla.lu_factor(I - 0.5 * dt * JL)
    B = I + 0.5 * dt * JL
    V = np.empty((nt + 1, n))
    V[0] = V0
    for i in range(nt):
        V[i + 1] = sla.lu_solve(lu, B @ V[i])
    return t, V


def quadratic_form(L: np.ndarray, V: np.ndarray, dx: float = 1.0) -> np.ndarray:
    """(L V, V) for each row of V."""
    V = np.atleast_2d(V)
    return dx * np.einsum("ti,ij,tj->t", V, L, V)
