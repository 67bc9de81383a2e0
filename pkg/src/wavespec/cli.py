"""Command line interface.

    wavespec solitary|dno-check|spectrum|growth-curve|wavepacket|validate [options]

Exit codes: 0 success, 1 validation failure, 2 usage or config error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

COMMANDS = {
    "solitary": ("solitary",),
    "dno-check": ("solitary",),
    "spectrum": ("solitary", "spectrum"),
    "growth-curve": ("solitary", "spectrum", "growth"),
    "wavepacket": ("solitary", "spectrum", "growth", "packet"),
    "validate": ("solitary", "spectrum", "growth", "packet"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavespec", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--epsilon", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--nx", type=int)
    common.add_argument("--nz", type=int)
    common.add_argument("--kmax", type=float)
    common.add_argument("--nk", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--cache", help="cache directory (default: $WAVESPEC_CACHE or ~/.cache/wavespec)")
    common.add_argument("--no-cache", action="store_true", help="disable the on-disk cache")
    common.add_argument("--threads", type=int, help="BLAS threads")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _config(args):
    from .config import config_from_dict, load_config, validate_config

    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = config_from_dict(
            {
                "epsilon": 0.1 if args.epsilon is None else args.epsilon,
                "beta": 0.5 if args.beta is None else args.beta,
            }
        )
    overrides = {
        "epsilon": args.epsilon,
        "beta": args.beta,
    }
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, float(val))
    if args.nx is not None:
        cfg.grid.Nx = args.nx
    if args.nz is not None:
        cfg.grid.Nz = args.nz
    if args.kmax is not None:
        cfg.k.k_max = args.kmax
    if args.nk is not None:
        cfg.k.nk = args.nk
    if args.out is not None:
        cfg.out_dir = args.out
    if args.cache is not None:
        cfg.cache_dir = args.cache
    validate_config(cfg)
    return cfg


def _extra_checks(bundle, full: bool):
    """DN checks on a flat and on the computed surface, the fitted DN
    coercivity constant and the multiplier bound.

    With ``full`` also the small-amplitude checks: the KdV limit of A_eps and
    the O(eps^4) accuracy of the leading-order profile.
    """
    import numpy as np

    from .checks import (
        Check,
        check_at_least,
        check_at_most,
        dno_coercivity_constant,
        dno_symmetry_monotonicity,
        flat_dno_error,
        kdv_limit_table,
        leading_order_error,
        multiplier_checks,
    )

    w = bundle.wave
    p = w.params
    asym, inc, _ = dno_symmetry_monotonicity(w)
    checks = [
        check_at_most("flat_dno_exact", flat_dno_error(), 1e-8),
        check_at_most("dno_symmetry", asym, 1e-8),
        check_at_least("dno_monotone_in_k", inc, np.finfo(float).tiny),
        check_at_least("multiplier_bound", multiplier_checks(p.beta, p.alpha), -1e-12),
    ]
    # fitted, not certified: positivity is the only requirement
    checks += [check_at_least(f"dno_coercivity_k{k:g}", dno_coercivity_constant(w, k), 0.0, "fitted constant c") for k in (0.0, 1.0)]
    if full:
        cfg = bundle.config
        table = kdv_limit_table(p.beta, (0.2, 0.1, 0.05), Nx=cfg.grid.Nx, Nz=cfg.grid.Nz)
        last = table["rows"][-1]["lambda_neg_scaled"]
        ratio = leading_order_error(table["waves"][0.2]) / leading_order_error(table["waves"][0.1])
        checks += [
            check_at_most("kdv_limit_eps_0.05", abs(last / -1.25 - 1.0), 0.15),
            check_at_most("kdv_limit_extrapolated", abs(table["extrapolated"] / -1.25 - 1.0), 0.05),
            Check("leading_order_scaling", 12.0 <= ratio <= 20.0, ratio, 16.0, "expected in [12, 20]"),
        ]
    return checks


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    from .errors import WavespecError
    from .output import write_json
    from .pipeline import run_pipeline

    try:
        cfg = _config(args)
        bundle = run_pipeline(cfg, stages=COMMANDS[args.command], use_cache=not args.no_cache)
        if args.command in ("dno-check", "validate"):
            extra = _extra_checks(bundle, full=args.command == "validate")
            bundle.checks += extra
            name = "dno_check.json" if args.command == "dno-check" else "validation_extra.json"
            write_json(os.path.join(cfg.out_dir, name), {"checks": [c.to_dict() for c in extra]})
    except WavespecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    for c in bundle.checks:
        print(c.line())
    for label, path in sorted(bundle.files.items()):
        print(f"wrote {label}: {path}")
    if args.command in ("dno-check", "validate") and not bundle.passed:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
