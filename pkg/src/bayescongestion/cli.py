"""Command line entry point: ``bayescongestion {solve,sweep,bounds} CONFIG``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .beliefs import EstimationError
from .bench import run_bounds, run_solve, run_sweep, sweep_csv
from .config import ConfigError, load_config
from .solvers import SolverError

EXIT_CONFIG, EXIT_ESTIMATION = 2, 3


def _error(kind: str, message: str, **extra) -> None:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bayescongestion", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("solve", "Nash and optimal flows, tolls and bound constants for fixed coefficients"),
        ("sweep", "benefit of uniform-grid signalling for a range of granularities (CSV)"),
        ("bounds", "bound constants and bound values for the configured prior"),
    ]:
        p = sub.add_parser(name, help=text)
        p.add_argument("config", type=Path)
        p.add_argument("--seed", type=int, help="override monte_carlo.seed")
        p.add_argument("--samples", type=int, help="override monte_carlo.samples")
        p.add_argument("--out", type=Path, help="write output here instead of stdout")
        p.add_argument("--dump-config", action="store_true", help="print the normalized config and exit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.samples is not None:
            if args.samples < 1:
                raise ConfigError("--samples", "must be >= 1")
            overrides["samples"] = args.samples
        if overrides:
            config = dataclasses.replace(config, monte_carlo=dataclasses.replace(config.monte_carlo, **overrides))
        if args.dump_config:
            sys.stdout.write(config.dump())
            return 0
        if args.command == "solve":
            text = run_solve(config) + "\n"
        elif args.command == "bounds":
            text = run_bounds(config) + "\n"
        else:
            rows = run_sweep(config)
            text = sweep_csv(rows, config)
    except ConfigError as exc:
        _error("config", exc.message, field=exc.field, line=exc.line)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        _error("config", str(exc))
        return EXIT_CONFIG
    except (SolverError, EstimationError) as exc:
        _error("estimation", str(exc))
        return EXIT_ESTIMATION

    out = args.out or (Path(config.output) if args.command == "sweep" and config.output else None)
    if out:
        out.write_text(text)
    else:
        sys.stdout.write(text)
    if args.command == "sweep" and any(r.error for r in rows):
        _error("estimation", "some granularities failed", failed=[r.b for r in rows if r.error])
        return EXIT_ESTIMATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
