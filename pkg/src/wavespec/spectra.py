"""Eigenvalue computations and spectral checks for the linearized operators."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError
from .operators import (
    BlockOperator,
    ReducedOperator,
    apply_J,
    assemble_A_eps,
    assemble_JLambda,
    assemble_L,
)

log = logging.getLogger(__name__)

RE_TOL_FACTOR = 1e-6
SYM_ABS_TOL_FACTOR = 1e-9


@dataclass
class SpectrumReport:
    """Eigenvalues of one operator, sorted by decreasing real part."""

    kind: str
    k: float
    eigenvalues: np.ndarray
    scale: float
    n_negative: int | None = None
    unstable: list = field(default_factory=list)
    re_tol: float = 0.0
    eigenvectors: np.ndarray | None = None

    @property
    def max_abs_real(self) -> float:
        return float(np.abs(self.eigenvalues.real).max())

    @property
    def sigma_max(self) -> complex:
        """Largest unstable eigenvalue, or 0 when the unstable set is empty."""
        if not self.unstable:
            return 0j
        return max((s for s, _ in self.unstable), key=lambda s: s.real)


# ------------------------------------------------------------------ eigensolvers


def eig_symmetric(op, vectors: bool = False, abs_tol: float | None = None) -> SpectrumReport:
    """Full symmetric eigensolve; negatives are counted below -abs_tol.

    The default tolerance is 1e-9 times the spectral radius.
    """
    if isinstance(op, BlockOperator):
        if not op.symmetric:
            raise ValueError(f"{op.kind} is not a symmetric kind")
        M, kind, k = op.matrix, op.kind, op.k
    elif isinstance(op, ReducedOperator):
        M, kind, k = op.matrix, op.kind, 0.0
    else:
        M, kind, k = np.asarray(op), "matrix", 0.0
    M = 0.5 * (M + M.T)
    if vectors:
        lam, V = np.linalg.eigh(M)
    else:
        lam, V = np.linalg.eigvalsh(M), None
    scale = float(np.abs(lam).max())
    tol = SYM_ABS_TOL_FACTOR * scale if abs_tol is None else abs_tol
    order = np.argsort(-lam)
    return SpectrumReport(
        kind=kind,
        k=k,
        eigenvalues=lam[order].astype(complex),
        scale=scale,
        n_negative=int(np.sum(lam < -tol)),
        eigenvectors=None if V is None else V[:, order],
    )


def refine_eigenpair(A: np.ndarray, shift: float, iters: int = 6, tol: float = 1e-14):
    """Real eigenpair of A near ``shift`` by Rayleigh-quotient inverse iteration.

    The eigenvalue estimate is the two-sided quotient with the left
    eigenvector, which is accurate to the square of the vector error.
    """
    n = A.shape[0]
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)
    s = float(shift)
    I = np.eye(n)
    nudge = 64 * np.finfo(float).eps * max(1.0, float(np.abs(A).max()))

    def factor(shift):
        # an exactly singular shift is moved off the eigenvalue by a few ulps
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu = sla.lu_factor(A - shift * I, check_finite=False)
        if np.any(np.diag(lu[0]) == 0):
            lu = sla.lu_factor(A - (shift + nudge) * I, check_finite=False)
        return lu

    for _ in range(iters):
        lu = factor(s)
        x = sla.lu_solve(lu, x, check_finite=False)
        y = sla.lu_solve(lu, y, trans=1, check_finite=False)
        x /= np.linalg.norm(x)
        y /= np.linalg.norm(y)
        s_new = float(y @ (A @ x) / (y @ x))
        if abs(s_new - s) <= tol * max(1.0, abs(s_new)):
            s = s_new
            break
        s = s_new
    x = sla.lu_solve(factor(s), x, check_finite=False)
    x /= np.linalg.norm(x)
    resid = float(np.linalg.norm(A @ x - s * x))
    return s, x, resid


def unstable_modes(op: BlockOperator, vectors: bool = True, re_tol: float | None = None, re_factor: float = RE_TOL_FACTOR) -> SpectrumReport:
    """General eigensolve of J L(k) (or J Lambda(k)) and its unstable part.

    Eigenvalues with Re > re_tol, re_tol = 1e-6 times the spectral radius, are
    unstable; the rest are classified as neutral. Real unstable eigenvalues
    are polished by inverse iteration on the full matrix.
    """
    if op.symmetric:
        raise ValueError("unstable_modes expects a Hamiltonian kind (JL or JLambda)")
    A = op.matrix
    lam = np.linalg.eigvals(A)
    lam = lam[np.lexsort((lam.imag, -lam.real))]
    scale = float(np.abs(lam).max())
    tol = re_factor * scale if re_tol is None else re_tol
    unstable = []
    for s in lam[lam.real > tol]:
        vec = None
        if vectors or s.imag == 0:
            if s.imag == 0:
                s_ref, vec, resid = refine_eigenpair(A, s.real)
                if abs(s_ref - s.real) > 1e-6 * abs(s.real):
                    raise NumericalError("eigenvalue refinement drifted", {"sigma": s.real, "refined": s_ref})
                s = complex(s_ref, 0.0)
            else:
                w, V = np.linalg.eig(A)
                j = int(np.argmin(np.abs(w - s)))
                vec = V[:, j]
        unstable.append((complex(s), vec))
    return SpectrumReport(kind=op.kind, k=op.k, eigenvalues=lam, scale=scale, unstable=unstable, re_tol=tol)


# ------------------------------------------------------------------ growth curve


@dataclass
class KSample:
    k: float
    sigma: complex
    n_unstable: int
    n_neg_L: int
    f: float
    max_abs_re: float
    scale: float
    vector: np.ndarray | None = None


def sample_k(w, k: float, vectors: bool = False, re_factor: float = RE_TOL_FACTOR, sym_factor: float = SYM_ABS_TOL_FACTOR) -> KSample:
    """Spectral data of L(k) and J L(k) at one wavenumber."""
    L = assemble_L(w, k)
    sym = eig_symmetric(L)
    sym.n_negative = int(np.sum(sym.eigenvalues.real < -sym_factor * sym.scale))
    JL = apply_J(L, "JL")
    rep = unstable_modes(JL, vectors=vectors, re_factor=re_factor)
    sigma = rep.sigma_max
    vec = None
    if rep.unstable:
        vec = next(v for s, v in rep.unstable if s == sigma)
    return KSample(
        k=float(k),
        sigma=complex(sigma),
        n_unstable=len(rep.unstable),
        n_neg_L=sym.n_negative,
        f=float(-sym.eigenvalues.real.min()),
        max_abs_re=rep.max_abs_real,
        scale=rep.scale,
        vector=vec,
    )


def f_value(w, k: float) -> float:
    """f(k) = largest eigenvalue of J L(k) J, i.e. minus the smallest eigenvalue of L(k)."""
    L = assemble_L(w, k).matrix
    lo = sla.eigh(L, eigvals_only=True, subset_by_index=[0, 0], check_finite=False)[0]
    return float(-lo)


def f_crossing(w, k_max: float, tol: float = 1e-7, maxit: int = 40) -> float:
    """Zero of f(k) on (0, k_max), by secant steps in k^2 safeguarded by bisection.

    Near the crossing f is close to affine in k^2, so the secant converges in a
    few steps.
    """
    f0 = f_value(w, 0.0)
    if f0 <= 0:
        raise NumericalError("f(0) is not positive", {"f0": f0})
    lo, flo = 0.0, f0
    # first guess: f(k) ~ f0 - beta k^2
    hi = min(k_max, float(np.sqrt(f0 / w.params.beta)))
    fhi = f_value(w, hi)
    while fhi > 0:
        lo, flo = hi, fhi
        if hi >= k_max:
            raise NumericalError("f(k) has no sign change below k_max", {"k_max": k_max})
        hi = min(k_max, 2.0 * hi)
        fhi = f_value(w, hi)
    return _refine_crossing(w, lo, flo, hi, fhi, tol, maxit)


def _refine_crossing(w, lo, flo, hi, fhi, tol, maxit):
    """Illinois false position in k^2 on a bracket with f(lo) > 0 >= f(hi)."""
    side = 0
    k = 0.5 * (lo + hi)
    for _ in range(maxit):
        a, b = lo**2, hi**2
        k2 = a - flo * (b - a) / (fhi - flo)
        if not (a < k2 < b):
            k2 = 0.5 * (a + b)
        k_new = float(np.sqrt(k2))
        fk = f_value(w, k_new)
        if fk > 0:
            lo, flo = k_new, fk
            if side == 1:
                fhi *= 0.5
            side = 1
        else:
            hi, fhi = k_new, fk
            if side == -1:
                flo *= 0.5
            side = -1
        if hi - lo <= tol or abs(k_new - k) <= tol or fk == 0:
            return k_new
        k = k_new
    return 0.5 * (lo + hi)


def f_curve(w, k_grid, tol: float = 1e-7):
    """Samples f(k) on ``k_grid`` and the first zero crossing k* (NaN if f keeps its sign)."""
    k_grid = np.asarray(k_grid, dtype=float)
    f = np.array([f_value(w, k) for k in k_grid])
    change = np.flatnonzero((f[:-1] > 0) & (f[1:] <= 0))
    if change.size == 0:
        log.warning("f(k) has no sign change on the grid")
        return k_grid, f, np.nan
    i = int(change[0])
    if f[i + 1] == 0:
        return k_grid, f, float(k_grid[i + 1])
    k_star = _refine_crossing(w, k_grid[i], f[i], k_grid[i + 1], f[i + 1], tol, 40)
    return k_grid, f, float(k_star)


def adaptive_k_grid(k_star: float, k_max: float, nk: int, tail: int | None = None, k_min: float = 0.0) -> np.ndarray:
    """nk wavenumbers: uniform on [k_min, 2 k_star], then geometric up to k_max."""
    if nk < 8:
        raise ValueError("nk must be at least 8")
    if tail is None:
        tail = max(4, nk // 5)
    k_dense_end = min(2.0 * k_star, k_max)
    n_dense = nk - tail
    if k_dense_end <= k_min or k_dense_end >= k_max:
        return np.linspace(k_min, k_max, nk)
    dense = np.linspace(k_min, k_dense_end, n_dense)
    rest = np.geomspace(k_dense_end, k_max, tail + 1)[1:]
    return np.concatenate([dense, rest])


@dataclass
class GrowthCurve:
    """Sampled growth rate sigma_max(k) and derived band data."""

    k: np.ndarray
    sigma_re: np.ndarray
    sigma_im: np.ndarray
    n_unstable: np.ndarray
    n_neg_L: np.ndarray
    f: np.ndarray
    max_abs_re: np.ndarray
    scale: np.ndarray
    band: tuple | None = None
    k0: float = np.nan
    sigma0: float = 0.0
    sigma_pp: float = np.nan
    m: int | None = None
    k_star: float = np.nan
    vectors: dict = field(default_factory=dict, repr=False)

    @property
    def empty(self) -> bool:
        return self.band is None

    def table(self) -> dict:
        return {
            "k": self.k,
            "sigma_re": self.sigma_re,
            "sigma_im": self.sigma_im,
            "n_neg_L": self.n_neg_L,
            "f_k": self.f,
        }


def _sigma_real(w, k, **tols):
    s = sample_k(w, k, **tols)
    return s.sigma.real if s.n_unstable else 0.0


def _bisect_edge(w, k_in, k_out, tol, **tols):
    """Shrink [k_in, k_out] (unstable at k_in, stable at k_out) to width tol."""
    while abs(k_out - k_in) > tol:
        mid = 0.5 * (k_in + k_out)
        if _sigma_real(w, mid, **tols) > 0:
            k_in = mid
        else:
            k_out = mid
    return k_in, k_out


def growth_curve(
    w,
    k_grid,
    refine: bool = True,
    edge_tol: float = 1e-4,
    keep_vectors: bool = False,
    re_factor: float = RE_TOL_FACTOR,
    sym_factor: float = SYM_ABS_TOL_FACTOR,
) -> GrowthCurve:
    """Sample sigma_max(k), n_neg L(k) and f(k) over the increasing ``k_grid``."""
    tols = {"re_factor": re_factor, "sym_factor": sym_factor}
    k_grid = np.asarray(k_grid, dtype=float)
    if k_grid[0] < 0 or np.any(np.diff(k_grid) <= 0):
        raise ValueError("k_grid must be nonnegative and increasing")
    samples = []
    for k in k_grid:
        samples.append(sample_k(w, k, vectors=keep_vectors, **tols))
        s = samples[-1]
        log.info("k=%.6g sigma=%.6e n_neg=%d f=%.3e", k, s.sigma.real, s.n_neg_L, s.f)
    arr = lambda name: np.array([getattr(s, name) for s in samples])
    sig = np.array([s.sigma for s in samples])
    curve = GrowthCurve(
        k=k_grid,
        sigma_re=sig.real,
        sigma_im=sig.imag,
        n_unstable=arr("n_unstable"),
        n_neg_L=arr("n_neg_L"),
        f=arr("f"),
        max_abs_re=arr("max_abs_re"),
        scale=arr("scale"),
    )
    if keep_vectors:
        curve.vectors = {s.k: s.vector for s in samples if s.vector is not None}
    unstable = np.flatnonzero(curve.sigma_re > 0)
    if unstable.size == 0:
        log.warning("no instability detected on the k grid")
        return curve
    # maximal run of unstable samples containing the largest growth rate
    i0 = int(unstable[np.argmax(curve.sigma_re[unstable])])
    i_lo = i0
    while i_lo - 1 >= 0 and curve.sigma_re[i_lo - 1] > 0:
        i_lo -= 1
    i_hi = i0
    while i_hi + 1 < len(k_grid) and curve.sigma_re[i_hi + 1] > 0:
        i_hi += 1
    k_lo, k_hi = k_grid[i_lo], k_grid[i_hi]
    if refine:
        if i_lo > 0:
            k_lo = _bisect_edge(w, k_grid[i_lo], k_grid[i_lo - 1], edge_tol, **tols)[0]
        if i_hi + 1 < len(k_grid):
            k_hi = _bisect_edge(w, k_grid[i_hi], k_grid[i_hi + 1], edge_tol, **tols)[0]
    curve.band = (float(k_lo), float(k_hi))
    # smallest argmax on the grid
    curve.k0 = float(k_grid[i0])
    curve.sigma0 = float(curve.sigma_re[i0])
    if refine:
        _refine_peak(w, curve, i0, **tols)
    return curve


def _refine_peak(w, curve: GrowthCurve, i0: int, **tols):
    """Quadratic fit through a local stencil around the grid argmax.

    Updates k0 and sigma0 to the vertex, stores sigma''(k0) and classifies the
    nondegeneracy order m (2 when sigma'' is clearly negative).
    """
    k = curve.k
    h = 0.5 * min(np.diff(k)[max(i0 - 1, 0)], np.diff(k)[min(i0, len(k) - 2)])
    kc = curve.k0
    ks = kc + h * np.arange(-2, 3)
    ks = ks[ks > 0]
    sig = np.array([_sigma_real(w, kk, **tols) for kk in ks])
    c2, c1, c0 = np.polyfit(ks - kc, sig, 2)
    if c2 < 0:
        dk = -c1 / (2 * c2)
        if abs(dk) <= 2 * h:
            curve.k0 = float(kc + dk)
            curve.sigma0 = float(c0 - c1**2 / (4 * c2))
        curve.sigma_pp = float(2 * c2)
    else:
        curve.sigma_pp = float(2 * c2)
    width = curve.band[1] - curve.band[0]
    threshold = 1e-3 * curve.sigma0 / max(width, h) ** 2
    if curve.sigma_pp < -threshold:
        curve.m = 2
    else:
        # second derivative numerically zero; higher orders are not classified
        curve.m = None


# ------------------------------------------------------------------ other checks


def multiplier_margin(beta, alpha, k, gamma, xi):
    """m(xi) - (beta k^2 + gamma + alpha - 1) for the essential-spectrum multiplier.

    m(xi) = beta xi^2 + beta k^2 + alpha + gamma - xi^2 / (gamma + r tanh r),
    r = sqrt(xi^2 + k^2). At xi = k = gamma = 0 the quotient takes its limit 1.
    """
    xi = np.asarray(xi, dtype=float)
    r = np.sqrt(xi**2 + k**2)
    den = gamma + r * np.tanh(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        quot = np.where(den > 0, xi**2 / np.where(den > 0, den, 1.0), 1.0)
    return beta * xi**2 + 1.0 - quot


def essential_bound_check(beta, alpha, k, gamma, xi_grid) -> float:
    """Minimum over ``xi_grid`` of the multiplier margin (nonnegative when beta > 1/3)."""
    return float(np.min(multiplier_margin(beta, alpha, k, gamma, xi_grid)))


def kdv_limit_eigenvalues(beta, n: int = 512, half_length: float | None = None, count: int = 3):
    """Lowest eigenvalues of -(beta-1/3) d^2 + 1 - 3 sech^2(x / (2 sqrt(beta-1/3))).

    Fourier collocation on a periodic box; the exact values are -5/4, 0, 3/4.
    """
    from .grid import make_grid

    c = np.sqrt(beta - 1.0 / 3.0)
    if half_length is None:
        half_length = 40.0 * c
    g = make_grid(half_length, n)
    H = -(c**2) * g.derivative_matrix(2) + np.diag(1.0 - 3.0 / np.cosh(g.x / (2 * c)) ** 2)
    return np.linalg.eigvalsh(0.5 * (H + H.T))[:count]


def richardson_eps2(eps, values):
    """Extrapolate values(eps) = a0 + a1 eps^2 + ... to eps = 0 by polynomial fit in eps^2."""
    e2 = np.asarray(eps, dtype=float) ** 2
    coef = np.polyfit(e2, np.asarray(values, dtype=float), len(e2) - 1)
    return float(coef[-1])


def a_eps_spectrum(w, closure: str = "energy"):
    """Negative count, the two lowest eigenvalues and the zero-mode correlation of A_eps."""
    A = assemble_A_eps(w, closure)
    rep = eig_symmetric(A, vectors=True)
    lam = rep.eigenvalues.real
    V = rep.eigenvectors
    order = np.argsort(lam)
    i_neg = order[0]
    i_zero = int(np.argmin(np.abs(lam)))
    tx = w.eta_x / np.linalg.norm(w.eta_x)
    return {
        "n_negative": rep.n_negative,
        "lambda_neg": float(lam[i_neg]),
        "lambda_zero": float(lam[i_zero]),
        "zero_corr": float(abs(V[:, i_zero] @ tx)),
        "neg_vector": V[:, i_neg],
        "zero_vector": V[:, i_zero],
        "asymmetry": A.asymmetry,
        "translation_residual": float(np.linalg.norm(A.matrix @ w.eta_x) / (np.linalg.norm(A.matrix) * np.linalg.norm(w.eta_x))),
    }


def kdv_limit_check(beta, eps_list, solver) -> dict:
    """Table of lambda_-/eps^2 and lambda_0/eps^2 for each eps, with the extrapolated limit.

    ``solver(eps)`` returns a refined SolitaryWave for (eps, beta).
    """
    rows = []
    for eps in eps_list:
        w = solver(eps)
        a = a_eps_spectrum(w)
        rows.append((float(eps), a["lambda_neg"] / eps**2, a["lambda_zero"] / eps**2, a["n_negative"], a["zero_corr"]))
    eps = [r[0] for r in rows]
    return {
        "rows": rows,
        "extrapolated_neg": richardson_eps2(eps, [r[1] for r in rows]),
        "oracle": kdv_limit_eigenvalues(beta).tolist(),
    }


def similarity_check(w, k) -> dict:
    """Compare unstable spectra and eigenvectors of J L(k) and J Lambda(k).

    If J L U = sigma U then V = P_mat U satisfies J Lambda V = sigma V.
    """
    from .operators import conjugators

    rl = unstable_modes(apply_J(assemble_L(w, k), "JL"))
    rm = unstable_modes(assemble_JLambda(w, k))
    a = np.array([s for s, _ in rl.unstable])
    b = np.array([s for s, _ in rm.unstable])
    if a.size == 0 and b.size == 0:
        return {"distance": 0.0, "relative": 0.0, "n": (0, 0), "vector_residual": 0.0}
    if a.size == 0 or b.size == 0:
        return {"distance": np.inf, "relative": np.inf, "n": (a.size, b.size), "vector_residual": np.inf}
    d = np.abs(a[:, None] - b[None, :])
    haus = float(max(d.min(axis=1).max(), d.min(axis=0).max()))
    scale = float(np.abs(a).max())
    P_mat, _ = conjugators(w)
    U = rl.unstable[0][1]
    V = rm.unstable[0][1]
    PU = P_mat @ U
    PU /= np.linalg.norm(PU)
    resid = float(min(np.linalg.norm(PU - V), np.linalg.norm(PU + V)))
    return {"distance": haus, "relative": haus / scale, "n": (a.size, b.size), "vector_residual": resid}


def constrained_coercivity(w, k, constraints) -> float:
    """Minimum Rayleigh quotient of L(k) on {U : (U1, c) = 0 for c in constraints}.

    At k = 0 the constant U2 direction, which L(0) annihilates, is removed too.
    """
    n = w.grid.n
    C = [np.concatenate([c, np.zeros(n)]) for c in constraints]
    if k == 0:
        C.append(np.concatenate([np.zeros(n), np.ones(n)]))
    C = np.array(C).T
    Q, _ = np.linalg.qr(C)
    N = sla.null_space(Q.T)
    L = assemble_L(w, k).matrix
    R = N.T @ L @ N
    return float(np.linalg.eigvalsh(0.5 * (R + R.T))[0])
