"""Command-line front end for sweep runs.

Exit codes: 0 when every row completed and no advisory fired; 2 when the run
completed but at least one advisory fired (signed-transform window family,
failed calibration, oracle iteration cap); 1 on errors (config, I/O, aborted
rows).
"""
from __future__ import annotations

import argparse
import sys

from .errors import PrimeZeroError, ConfigError
from .pipeline import RunConfig, emit, run_sweep, to_csv


def _parse_floats(text: str, flag: str):
    try:
        return tuple(float(tok) for tok in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(flag, f"could not parse float list from {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="primezero",
        description="Sweep the smoothed prime/zero pipeline over scales T and "
                    "report pairings, bounds, and growth ratios.")
    p.add_argument("--t-list", default="8 10 12 14 16",
                   help="scales T, space or comma separated (default: 8 10 12 14 16)")
    p.add_argument("--alpha", type=float, default=0.5,
                   help="smoothing exponent in (0,1); mollifier width T^-alpha")
    p.add_argument("--kappa", type=float, default=10.0,
                   help="zero-side height multiplier Omega = kappa T")
    p.add_argument("--eta-family", choices=("triangle", "selberg", "tukey"),
                   default="triangle", help="plateau window family")
    p.add_argument("--eta-param", type=float, default=None,
                   help="window family parameter (slope C, taper W, or type delta)")
    p.add_argument("--beta-scale", type=float, default=1.0,
                   help="probe bandwidth multiplier (bandwidth beta_scale/T^2)")
    p.add_argument("--xi0-ladder", default="0.5 1 2 4",
                   help="calibration bump widths as multiples of 1/T")
    p.add_argument("--zeros", default="builtin",
                   help="zero source: builtin | locate | file:PATH")
    p.add_argument("--epsilon", type=float, default=0.5,
                   help="entropic regularization of the transport oracle")
    p.add_argument("--rho", type=float, default=5.0,
                   help="marginal KL penalty of the transport oracle")
    p.add_argument("--sinkhorn-iters", type=int, default=10000)
    p.add_argument("--grid-dt", type=float, default=None,
                   help="override prime-side smoothing grid spacing")
    p.add_argument("--grid-dgamma", type=float, default=None,
                   help="override zero-side smoothing grid spacing")
    p.add_argument("--calibration", choices=("attempt", "require", "off"),
                   default="attempt",
                   help="attempt: fall back to the uncalibrated probe on failure "
                        "(advisory); require: abort the row; off: skip")
    p.add_argument("--out", default=None, metavar="PATH", help="output file path")
    p.add_argument("--format", choices=("csv", "json", "both"), default="csv")
    p.add_argument("--threads", type=int, default=1,
                   help="parallel workers across T values")
    p.add_argument("--t-cap", type=float, default=18.0,
                   help="sieve resource cap on T (raise explicitly to go bigger)")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the per-row identity-check sampling")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock runtime_ms per row (breaks byte-for-byte "
                        "determinism of repeated runs)")
    p.add_argument("--verbose", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    zeros = args.zeros
    if zeros.startswith("file:"):
        source, path = "file", zeros[5:]
    elif zeros in ("builtin", "locate"):
        source, path = zeros, None
    else:
        raise ConfigError("zeros", f"expected builtin, locate or file:PATH, got {zeros!r}")
    return RunConfig(
        t_list=_parse_floats(args.t_list, "t_list"),
        alpha=args.alpha,
        kappa=args.kappa,
        eta_family=args.eta_family,
        eta_param=args.eta_param,
        beta_scale=args.beta_scale,
        xi0_ladder=_parse_floats(args.xi0_ladder, "xi0_ladder"),
        epsilon=args.epsilon,
        rho=args.rho,
        sinkhorn_iters=args.sinkhorn_iters,
        zeros_source=source,
        zeros_path=path,
        grid_dt=args.grid_dt,
        grid_dgamma=args.grid_dgamma,
        calibration=args.calibration,
        out_path=args.out,
        out_format=args.format,
        threads=args.threads,
        seed=args.seed,
        t_cap=args.t_cap,
        timing=args.timing,
    ).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        result = run_sweep(cfg)
        paths = emit(result, cfg)
    except PrimeZeroError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1

    if cfg.out_path is None:
        sys.stdout.write(to_csv(result))
    if args.verbose or result.advisories or result.errors:
        for line in result.advisories:
            print(f"advisory: {line}", file=sys.stderr)
        for line in result.errors:
            print(f"row error: {line}", file=sys.stderr)
    if args.verbose and result.fit is not None:
        print(f"fit: value ~ {result.fit['C']:.6g} * T log^2 T, ratio band "
              f"[{result.fit['ratio_min']:.6g}, {result.fit['ratio_max']:.6g}]",
              file=sys.stderr)
    for path in paths:
        if args.verbose:
            print(f"wrote {path}", file=sys.stderr)
    if result.errors:
        return 1
    if result.advisories:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
