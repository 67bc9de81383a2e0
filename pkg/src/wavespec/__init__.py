"""Spectral toolkit for the transverse instability of line solitary water waves."""

from importlib import import_module

from ._version import __version__

_EXPORTS = {
    "Params": "params",
    "make_grid": "grid",
    "make_strip": "grid",
    "apply_dno": "dno",
    "dno_matrix": "dno",
    "solve_solitary": "solitary",
    "newton_refine": "solitary",
    "leading_profile": "solitary",
    "assemble_L": "operators",
    "assemble_Lambda": "operators",
    "assemble_JL": "operators",
    "assemble_A_eps": "operators",
    "growth_curve": "spectra",
    "unstable_modes": "spectra",
    "build_wavepacket": "evolution",
    "packet_growth_fit": "evolution",
    "linear_evolve": "evolution",
    "load_config": "config",
    "RunConfig": "config",
    "run_pipeline": "pipeline",
}

__all__ = ["__version__", *_EXPORTS]


def __getattr__(name):
    # lazy so that the command line can configure BLAS threads before numpy loads
    if name in _EXPORTS:
        return getattr(import_module(f".{_EXPORTS[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
