"""Command line entry point: ``pauli-current {verify,evolve,converge}``.

Exit status is 0 when every check passes, 1 when a check fails and 2 for
invalid configuration or a runtime failure (solver, boundary guard, memory cap).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import BoundaryDensityError, InvalidArgumentError, MemoryGuardError, SolverConvergenceError
from .runner import PATHS, ScenarioConfig, converge, evolve, verify

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pauli-current", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("verify", "run the identity checks"),
        ("evolve", "time-evolve and write snapshots"),
        ("converge", "grid refinement study"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="INI scenario file (defaults to gaussian_spin_up)")
        p.add_argument("--out", help="output directory (overrides [output] output_dir)")
        p.add_argument("--seed", type=int, help="random seed (overrides [scenario] seed)")
        p.add_argument("--path", choices=PATHS, default="both", help="evaluation path for verify")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "converge":
            p.add_argument("--refinements", type=int, help="number of grid levels (>= 2)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = ScenarioConfig.from_file(args.config) if args.config else ScenarioConfig.default()
        if args.seed is not None:
            cfg = cfg.with_overrides(seed=args.seed)
        if args.out is not None:
            cfg = cfg.with_overrides(output_dir=args.out)
        if args.command == "verify":
            report = verify(cfg, args.path)
        elif args.command == "evolve":
            report = evolve(cfg, cfg.output_dir)
        else:
            report = converge(cfg, args.refinements)
        target = report.write(cfg.output_dir)
    except (InvalidArgumentError, MemoryGuardError, SolverConvergenceError, BoundaryDensityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    failed = [c["name"] for c in report.checks if not c["passed"]]
    failed += [t["name"] for t in report.convergence if not t["passed"]]
    print(f"{args.command}: {'PASS' if not failed else 'FAIL'} ({target})")
    for name in failed:
        print(f"  failed: {name}")
    return EXIT_PASS if not failed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
