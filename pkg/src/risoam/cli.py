"""Command-line front end: ``risoam run|sweep|validate``.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import ConfigError, default_config, load_config
from .experiments import AXES, run_single, run_sweep, run_validate, write_sweep_csv
from .optimizer import SCHEMES, SolverError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VALIDATION = 4


def _load(args):
    cfg = default_config() if args.config == "default" else load_config(args.config)
    solver = cfg.solver
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
        solver = dataclasses.replace(solver, seed=args.seed)
    if args.max_iters is not None:
        solver = dataclasses.replace(solver, max_iters=args.max_iters)
    if args.tol is not None:
        solver = dataclasses.replace(solver, tol=args.tol)
    return dataclasses.replace(cfg, solver=solver).resolved()


def _values(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="JSON scenario file, or 'default' for the bundled one")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--max-iters", type=int, help="override solver.max_iters")
    common.add_argument("--tol", type=float, help="override solver.tol")

    parser = argparse.ArgumentParser(prog="risoam", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="solve one scenario")
    run.add_argument("--scheme", choices=SCHEMES, default="joint")

    sweep = sub.add_parser("sweep", parents=[common], help="sweep M, Pt or the scheme")
    sweep.add_argument("--axis", choices=AXES, required=True)
    sweep.add_argument("--values", type=_values, default=None,
                       help="comma-separated axis values (schemes for --axis baseline)")
    sweep.add_argument("--jobs", type=int, default=1)

    val = sub.add_parser("validate", parents=[common], help="run the oracle checks")
    val.add_argument("--inject-fault", action="store_true",
                     help="corrupt the analytic couplings (the gate must then fail)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            result = run_single(cfg, args.out, scheme=args.scheme)
            s = result.summary
            print(f"final sum rate {s['final_sum_rate_bps_hz']:.6e} bit/s/Hz after "
                  f"{s['iterations']} iterations (converged={s['converged']}, "
                  f"{s['wall_time_s']:.2f} s)")
        elif args.command == "sweep":
            try:
                rows = run_sweep(cfg, args.axis, args.values, args.out, jobs=args.jobs)
            except ValueError as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            if args.out is None:
                write_sweep_csv(rows, "/dev/stdout")
            else:
                for row in rows:
                    print(f"{row['axis']}={row['value']}: {row['sum_rate_bps_hz']:.6e} "
                          f"({row['iterations']} it, {row['status']})")
            if any(row["status"] != "ok" for row in rows):
                return EXIT_SOLVER
        else:
            report = run_validate(cfg, inject_fault=args.inject_fault)
            print(report.format())
            return EXIT_OK if report.passed else EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
