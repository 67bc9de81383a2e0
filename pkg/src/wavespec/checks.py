"""Self-contained numerical checks used by the validation run and the test suite."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla

from .dno import apply_dno, dno_matrix, flat_dno_symbol
from .grid import make_grid, make_strip, seminorm_weight
from .params import Params
from .solitary import leading_profile, solve_solitary
from .spectra import (
    a_eps_spectrum,
    essential_bound_check,
    kdv_limit_eigenvalues,
    richardson_eps2,
)


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{tag} {self.name}: value={self.value:.6g} threshold={self.threshold:.6g}{extra}"

    def to_dict(self) -> dict:
        return asdict(self)


def check_at_most(name, value, threshold, detail="") -> Check:
    return Check(name, bool(value <= threshold), float(value), float(threshold), detail)


def check_at_least(name, value, threshold, detail="") -> Check:
    return Check(name, bool(value >= threshold), float(value), float(threshold), detail)


def band_limited_random(grid, rng, fraction: float = 0.25, count: int = 1) -> np.ndarray:
    """Real random grid functions whose Fourier support is the lowest ``fraction`` of modes."""
    n = grid.n
    m = int(fraction * n / 2)
    out = np.zeros((count, n))
    for i in range(count):
        c = np.zeros(n // 2 + 1, dtype=complex)
        c[1 : m + 1] = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        c[0] = rng.standard_normal()
        out[i] = np.fft.irfft(c, n)
    return out


def flat_dno_error(Lx: float = 40.0, Nx: int = 256, Nz: int = 48, ks=(0.0, 0.5, 1.0), seed: int = 0) -> float:
    """Largest relative L2 error of the DN solver against r tanh r on a flat surface."""
    grid = make_grid(Lx, Nx)
    strip = make_strip(grid, Nz)
    rng = np.random.default_rng(seed)
    u = band_limited_random(grid, rng)[0]
    eta = np.zeros(Nx)
    worst = 0.0
    for k in ks:
        exact = np.fft.ifft(flat_dno_symbol(grid.wavenumbers, k) * np.fft.fft(u)).real
        got = apply_dno(eta, k, u, strip)
        worst = max(worst, float(np.linalg.norm(got - exact) / np.linalg.norm(exact)))
    return worst


def dno_symmetry_monotonicity(w, ks=None, n_vectors: int = 5, seed: int = 1):
    """Raw asymmetry of G_k[eta] and increments of (G_k u, u) in k.

    Returns (max asymmetry, smallest relative increment, k values).
    """
    if ks is None:
        ks = np.arange(9) * 0.25
    rng = np.random.default_rng(seed)
    U = band_limited_random(w.grid, rng, count=n_vectors)
    asym, forms = [], []
    for k in ks:
        r = dno_matrix(w.eta, k, w.strip, symmetrize=False)
        asym.append(r.asymmetry)
        G = r.matrix
        forms.append(np.einsum("bi,ij,bj->b", U, G, U) * w.grid.dx)
    forms = np.array(forms)
    inc = np.diff(forms, axis=0) / np.abs(forms[1:])
    return float(max(asym)), float(inc.min()), np.asarray(ks)


def dno_coercivity_constant(w, k: float) -> float:
    """Fitted constant c in (G_k u, u) >= c |u|_k^2 for the weighted seminorm.

    The smallest generalized eigenvalue of the DN matrix against the Gram
    matrix of the seminorm weight; constants are removed when k = 0.
    """
    grid = w.grid
    n = grid.n
    G = dno_matrix(w.eta, k, w.strip).matrix * grid.dx
    F = np.fft.fft(np.eye(n), axis=0)
    W = (F.conj().T * seminorm_weight(grid.wavenumbers, k) ** 2) @ F
    W = W.real * grid.dx / n
    if k == 0:
        Q = sla.null_space(np.ones((1, n)))
        G, W = Q.T @ G @ Q, Q.T @ W @ Q
    return float(sla.eigh(0.5 * (G + G.T), 0.5 * (W + W.T), eigvals_only=True, subset_by_index=[0, 0])[0])


def multiplier_checks(beta: float, alpha: float, xi_max: float = 50.0, step: float = 1e-3):
    """Minimum margin over (k, gamma) in {0, 1} x {0, 0.5}."""
    xi = np.arange(0.0, xi_max + 0.5 * step, step)
    return min(essential_bound_check(beta, alpha, k, g, xi) for k in (0.0, 1.0) for g in (0.0, 0.5))


def leading_order_error(w) -> float:
    """Sup-norm distance between the refined and the leading-order elevation."""
    lead = leading_profile(w.params, strip=w.strip)
    return float(np.abs(w.eta - lead.eta).max())


def kdv_limit_table(beta: float, eps_list=(0.2, 0.1, 0.05), Nx: int = 512, Nz: int = 48, waves: dict | None = None):
    """lambda_-/eps^2 of A_eps for each eps and its extrapolation to eps = 0.

    ``waves`` may supply already refined solitary waves keyed by eps.
    """
    waves = dict(waves or {})
    rows = []
    for eps in eps_list:
        w = waves.get(eps) or solve_solitary(Params(eps, beta), Nx=Nx, Nz=Nz)
        waves[eps] = w
        a = a_eps_spectrum(w)
        rows.append(
            {
                "epsilon": float(eps),
                "lambda_neg_scaled": a["lambda_neg"] / eps**2,
                "lambda_zero_scaled": a["lambda_zero"] / eps**2,
                "n_negative": a["n_negative"],
                "zero_corr": a["zero_corr"],
            }
        )
    extrap = richardson_eps2([r["epsilon"] for r in rows], [r["lambda_neg_scaled"] for r in rows])
    return {"rows": rows, "extrapolated": extrap, "oracle": kdv_limit_eigenvalues(beta).tolist(), "waves": waves}
