"""End-to-end run: solitary wave, spectra, growth curve, wave packet, report.

Each stage writes its outputs into ``cfg.out_dir`` and appends checks to the
validation report. A failing stage stops the run; the report then records
the stage name and is marked incomplete.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._version import __version__
from .cache import Cache, CachedDnoBuilder, make_key
from .checks import Check, check_at_least, check_at_most
from .config import RunConfig
from .dno import dno_matrix
from .errors import WavespecError
from .evolution import build_wavepacket, linear_evolve, packet_growth_fit, quadratic_form, sandwich_width
from .grid import make_grid, make_strip
from .operators import apply_J, assemble_JLambda, assemble_L
from .output import write_csv, write_json
from .params import default_half_length
from .solitary import SolitaryWave, newton_refine, leading_profile, verify_identities
from .spectra import (
    a_eps_spectrum,
    adaptive_k_grid,
    eig_symmetric,
    f_crossing,
    growth_curve,
    refine_eigenpair,
    unstable_modes,
)

log = logging.getLogger(__name__)

STAGES = ("solitary", "spectrum", "growth", "packet")


class StageError(WavespecError):
    """A pipeline stage failed; wraps the original error and keeps its exit code."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"[{stage}] {error}")
        self.stage = stage
        self.error = error
        self.exit_code = getattr(error, "exit_code", 3)


@dataclass
class Bundle:
    config: RunConfig
    wave: SolitaryWave | None = None
    curve: object = None
    packet: object = None
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    files: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    dno_seconds: float = 0.0
    failed_stage: str | None = None

    @property
    def passed(self) -> bool:
        return self.failed_stage is None and all(c.passed for c in self.checks)


def _metadata(cfg: RunConfig) -> dict:
    return {"wavespec_version": __version__, "config_digest": cfg.digest()}


# ---------------------------------------------------------------- stages


def _solitary_stage(cfg: RunConfig, cache: Cache | None, builder, out: Path, b: Bundle):
    params = cfg.params
    Lx = cfg.grid.Lx if cfg.grid.Lx is not None else default_half_length(params)
    strip = make_strip(make_grid(Lx, cfg.grid.Nx), cfg.grid.Nz)
    tol = cfg.tolerances.newton_tol

    def build():
        w = newton_refine(leading_profile(params, strip=strip), tol=tol, dno_builder=builder)
        return {
            "eta": w.eta,
            "phi_periodic": w.phi_periodic,
            "mean_flow": w.mean_flow,
            "residual_norm": w.residual_norm,
            "iterations": w.iterations,
            "history": np.asarray(w.history),
        }

    if cache is not None:
        key = make_key("solitary", epsilon=params.epsilon, beta=params.beta, Lx=float(Lx), Nx=cfg.grid.Nx, Nz=cfg.grid.Nz, tol=tol)
        data = cache.get_or_build(key, build)
    else:
        data = build()
    w = SolitaryWave(
        params,
        strip,
        np.asarray(data["eta"]),
        np.asarray(data["phi_periodic"]),
        float(data["mean_flow"]),
        residual_norm=float(data["residual_norm"]),
        iterations=int(data["iterations"]),
        history=list(np.asarray(data["history"]).tolist()),
        dno_builder=builder,
    )
    b.wave = w
    ident = verify_identities(w)
    b.summary["solitary"] = {
        "epsilon": params.epsilon,
        "beta": params.beta,
        "alpha": params.alpha,
        "Lx": float(Lx),
        "Nx": cfg.grid.Nx,
        "Nz": cfg.grid.Nz,
        "newton_residual": w.residual_norm,
        "newton_iterations": w.iterations,
        "mean_flow": w.mean_flow,
        "amplitude": float(-w.eta.min()),
        "identities": ident,
    }
    b.checks += [
        check_at_most("newton_residual", w.residual_norm, tol),
        check_at_most("dno_identity", ident["dno_identity"], 1e-9),
        check_at_least("gamma_positive", ident["gamma_min"], np.finfo(float).tiny),
    ]
    b.files["profile"] = write_csv(out / "profile.csv", w.profile_table(), _metadata(cfg))


def _spectrum_stage(cfg: RunConfig, out: Path, b: Bundle):
    w = b.wave
    L0 = assemble_L(w, 0.0)
    sym = eig_symmetric(L0, abs_tol=None)
    n_neg = int(np.sum(sym.eigenvalues.real < -cfg.tolerances.sym_tol * sym.scale))
    rep = unstable_modes(apply_J(L0, "JL"), vectors=False, re_factor=cfg.tolerances.re_tol)
    neutral = rep.max_abs_real / rep.scale
    a = a_eps_spectrum(w)
    b.summary["k0_spectrum"] = {
        "L0_n_negative": n_neg,
        "JL0_max_abs_real": rep.max_abs_real,
        "JL0_spectral_radius": rep.scale,
        "JL0_n_unstable": len(rep.unstable),
        "A_eps": {key: a[key] for key in ("n_negative", "lambda_neg", "lambda_zero", "zero_corr", "asymmetry", "translation_residual")},
    }
    b.checks += [
        Check("L0_one_negative", n_neg == 1, n_neg, 1),
        check_at_most("JL0_neutral", neutral, cfg.tolerances.re_tol, "max|Re|/spectral radius"),
        Check("A_eps_one_negative", a["n_negative"] == 1, a["n_negative"], 1),
        check_at_least("A_eps_zero_mode_corr", a["zero_corr"], 0.999),
    ]


def _cell_width(k_grid, k):
    i = int(np.clip(np.searchsorted(k_grid, k), 1, len(k_grid) - 1))
    return float(k_grid[i] - k_grid[i - 1])


def _growth_stage(cfg: RunConfig, out: Path, b: Bundle):
    w = b.wave
    kc = cfg.k
    k_star = f_crossing(w, kc.k_max)
    if kc.spacing == "adaptive":
        k_grid = adaptive_k_grid(k_star, kc.k_max, kc.nk, k_min=kc.k_min)
    else:
        k_grid = np.linspace(kc.k_min, kc.k_max, kc.nk)
    curve = growth_curve(w, k_grid, re_factor=cfg.tolerances.re_tol, sym_factor=cfg.tolerances.sym_tol)
    curve.k_star = k_star
    b.curve = curve
    write_csv(out / "growth_curve.csv", {**curve.table(), "n_unstable": curve.n_unstable}, _metadata(cfg))
    b.files["growth_curve"] = out / "growth_curve.csv"

    sig, n_unst = curve.sigma_re, curve.n_unstable
    b.checks.append(Check("L_at_most_one_negative", bool(curve.n_neg_L.max() <= 1), int(curve.n_neg_L.max()), 1))
    if k_grid[0] == 0:
        b.checks.append(Check("L0_one_negative_sweep", int(curve.n_neg_L[0]) == 1, int(curve.n_neg_L[0]), 1))
    b.checks.append(Check("band_nonempty", curve.band is not None, float(curve.sigma0), 0.0))
    summary = {
        "k_star": k_star,
        "band": list(curve.band) if curve.band else None,
        "k0": curve.k0,
        "sigma0": curve.sigma0,
        "sigma_pp": curve.sigma_pp,
        "m": curve.m,
        "nk": int(len(k_grid)),
    }
    b.summary["growth"] = summary
    if curve.band is None:
        return
    lo, hi = curve.band
    inside = (k_grid >= lo) & (k_grid <= hi)
    imag_ratio = float(np.max(np.abs(curve.sigma_im[inside]) / sig[inside]))
    b.checks += [
        Check("unique_unstable_in_band", bool(np.all(n_unst[inside] == 1)), int(n_unst[inside].max()), 1),
        check_at_most("unstable_real_in_band", imag_ratio, 1e-8, "|Im|/sigma"),
        Check("stable_beyond_band", bool(np.all(n_unst[k_grid > hi] == 0)), int(n_unst[k_grid > hi].sum()), 0),
    ]
    f = curve.f
    sign_changes = int(np.sum(np.diff(np.sign(f)) != 0))
    cells = abs(k_star - hi) / _cell_width(k_grid, hi)
    b.checks += [
        check_at_least("f0_positive", f[0], np.finfo(float).tiny) if k_grid[0] == 0 else Check("f0_positive", True, f[0], 0.0, "k_min > 0"),
        Check("f_strictly_decreasing", bool(np.all(np.diff(f) < 0)), float(np.diff(f).max()), 0.0),
        Check("f_single_sign_change", sign_changes == 1, sign_changes, 1),
        check_at_most("f_crossing_vs_band_edge", cells, 2.0, "distance in k-grid cells"),
        Check("nondegenerate_maximum", curve.m == 2, float(curve.sigma_pp), 0.0, f"m={curve.m}"),
    ]
    # conjugation at the fastest growing wavenumber
    rl = unstable_modes(apply_J(assemble_L(w, curve.k0), "JL"), vectors=False)
    rm = unstable_modes(assemble_JLambda(w, curve.k0), vectors=False)
    a = np.array([s for s, _ in rl.unstable])
    c = np.array([s for s, _ in rm.unstable])
    if a.size and a.size == c.size:
        rel = float(np.max(np.abs(np.sort_complex(a) - np.sort_complex(c))) / np.abs(a).max())
    else:
        rel = np.inf
    summary["conjugation_relative"] = rel
    b.checks.append(check_at_most("conjugation_L_Lambda", rel, 1e-6))


def _packet_stage(cfg: RunConfig, out: Path, b: Bundle):
    w, curve = b.wave, b.curve
    if curve is None or curve.band is None:
        raise WavespecError("no instability band; the packet stage needs the growth curve")
    pc = cfg.packet
    p = build_wavepacket(curve, w, nk=pc.nk, mode=pc.window, one_sided=pc.one_sided_interval)
    b.packet = p
    s0 = curve.sigma0
    t = np.linspace(2.0 / s0, 20.0 / s0, pc.n_times)
    sigma_fit, rho_fit = packet_growth_fit(p, t)
    logn = p.log_norm(t)
    A = np.column_stack([t, -np.log1p(t), np.ones_like(t)])
    c0 = np.linalg.lstsq(A, logn, rcond=None)[0][2]
    resid = logn - (sigma_fit * t - rho_fit * np.log1p(t) + c0)
    write_csv(out / "packet.csv", {"t": t, "packet_norm": np.exp(logn), "log_norm": logn, "fit_residual": resid}, _metadata(cfg))
    b.files["packet"] = out / "packet.csv"
    m = curve.m or 2
    width = sandwich_width(p, t, m)
    y = np.linspace(0.0, 2 * np.pi / max(curve.k0, 1e-12), 9)
    real_ratio = max(
        float(np.abs(fld.imag).max() / np.abs(fld).max()) for fld in (p.field(tt, y) for tt in (0.0, t[0], t[-1]))
    )

    # eigenmode growth over three e-folds and the conserved quadratic form
    L = assemble_L(w, curve.k0)
    JL = apply_J(L, "JL").matrix
    sigma, vec, _ = refine_eigenpair(JL, s0)
    T = 3.0 / sigma
    tt, V = linear_evolve(w, curve.k0, vec, T, T / 30, method=pc.propagator, JL=JL)
    ratio = np.linalg.norm(V, axis=1) / np.linalg.norm(vec)
    growth_err = float(np.abs(ratio / np.exp(sigma * tt) - 1.0).max())
    rng = np.random.default_rng(2024)
    x = w.grid.x
    width_x = 10.0 * w.params.width / w.params.epsilon
    V0 = np.concatenate(
        [
            np.exp(-((x / width_x) ** 2)) * (1.0 + 0.1 * rng.standard_normal()),
            np.tanh(x / width_x) * np.exp(-((x / (2 * width_x)) ** 2)),
        ]
    )
    tm, Vm = linear_evolve(w, curve.k0, V0, T, T / 200, method="midpoint", JL=JL)
    q = quadratic_form(L.matrix, Vm, w.grid.dx)
    drift = float(np.abs(q - q[0]).max() / abs(q[0]))

    b.summary["packet"] = {
        "window": list(p.window),
        "nk": int(len(p.k)),
        "sigma_fit": sigma_fit,
        "rho_fit": rho_fit,
        "rho_expected": 1.0 / (2 * m),
        "sandwich_width": width,
        "realness": real_ratio,
        "eigenmode_growth_error": growth_err,
        "midpoint_form_drift": drift,
    }
    b.checks += [
        check_at_most("packet_sigma_fit", abs(sigma_fit / s0 - 1.0), 0.02, "relative to sigma0"),
        check_at_most("packet_rho_fit", abs(rho_fit * 2 * m - 1.0), 0.25, "relative to 1/(2m)"),
        check_at_most("packet_sandwich", width, 0.5),
        check_at_most("packet_real", real_ratio, 1e-10),
        check_at_most("eigenmode_growth", growth_err, 1e-3),
        check_at_most("midpoint_conservation", drift, 1e-8),
    ]


_STAGE_FUNCS = {
    "spectrum": _spectrum_stage,
    "growth": _growth_stage,
    "packet": _packet_stage,
}


def run_pipeline(cfg: RunConfig, stages=STAGES, use_cache: bool = True, raise_on_error: bool = True) -> Bundle:
    """Run the requested stages in order and write the artifact bundle.

    The solitary stage always runs. Outputs are byte-identical for identical
    configurations; timings are kept in memory only.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = Cache(cfg.resolved_cache_dir()) if use_cache else None
    builder = CachedDnoBuilder(cache) if cache is not None else _TimedBuilder()
    b = Bundle(config=cfg)
    order = ["solitary"] + [s for s in STAGES[1:] if s in stages]
    error = None
    for stage in order:
        t0 = time.perf_counter()
        try:
            if stage == "solitary":
                _solitary_stage(cfg, cache, builder, out, b)
            else:
                _STAGE_FUNCS[stage](cfg, out, b)
        except WavespecError as exc:
            b.failed_stage = stage
            error = StageError(stage, exc)
            log.error("%s", error)
            break
        finally:
            b.timings[stage] = time.perf_counter() - t0
    b.dno_seconds = builder.seconds
    report = {
        "status": "complete" if error is None else "incomplete",
        "failed_stage": b.failed_stage,
        "error": None if error is None else str(error.error),
        "passed": b.passed,
        "checks": [c.to_dict() for c in b.checks],
        "stages": order,
        "config": _portable_config(cfg),
        "summary": b.summary,
        "wavespec_version": __version__,
        "config_digest": cfg.digest(),
    }
    b.files["spectrum"] = write_json(out / "spectrum.json", {**b.summary, "config_digest": cfg.digest()})
    b.files["validation"] = write_json(out / "validation.json", report)
    if error is not None and raise_on_error:
        raise error
    return b


def _portable_config(cfg: RunConfig) -> dict:
    """Config without machine-specific paths, for the report."""
    d = cfg.to_dict()
    d.pop("out_dir", None)
    d.pop("cache_dir", None)
    return d


class _TimedBuilder:
    """Uncached DN builder with the same timing counter as the cached one."""

    def __init__(self):
        self.seconds = 0.0

    def __call__(self, eta, k, strip):
        t0 = time.perf_counter()
        r = dno_matrix(eta, k, strip)
        self.seconds += time.perf_counter() - t0
        return r
