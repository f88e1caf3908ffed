"""Run the two-edge truncated-Gaussian sweep and summarize both benefit curves.

    python scripts/reproduce_numerical_example.py [--samples N] [--out PATH]
"""
import argparse
import dataclasses
import logging
import time
from pathlib import Path

from bayescongestion.bench import run_sweep, sweep_csv
from bayescongestion.config import load_config

HERE = Path(__file__).resolve().parent


def trend(values, errors):
    steps = [b - a for a, b in zip(values, values[1:])]
    worst = min(s / max(e1, e2, 1e-300) for s, e1, e2 in zip(steps, errors, errors[1:]))
    return "increasing" if all(s >= 0 for s in steps) else "decreasing" if all(s <= 0 for s in steps) else "mixed", worst


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=HERE / "configs" / "numerical_example.yaml")
    parser.add_argument("--samples", type=int)
    parser.add_argument("--out", type=Path, default=Path("numerical_example.csv"))
    args = parser.parse_args()
    logging.basicConfig(level=logging.ERROR)

    config = load_config(args.config)
    if args.samples:
        config = dataclasses.replace(config, monte_carlo=dataclasses.replace(config.monte_carlo, samples=args.samples))
    start = time.perf_counter()
    rows = [r for r in run_sweep(config) if r.b >= 1]
    args.out.write_text(sweep_csv(rows, config))
    print(f"wrote {args.out} in {time.perf_counter() - start:.1f}s")

    print(f"{'b':>3} {'untolled':>12} {'se':>9} {'tolled':>12} {'se':>9}")
    for r in rows:
        print(f"{r.b:>3} {r.benefit_untolled:>12.5f} {r.stderr_untolled:>9.1e} {r.benefit_tolled:>12.5f} {r.stderr_tolled:>9.1e}")
    for name in ("untolled", "tolled"):
        shape, worst = trend([getattr(r, f"benefit_{name}") for r in rows], [getattr(r, f"stderr_{name}") for r in rows])
        print(f"{name}: {shape}, smallest step {worst:+.1f} SE")


if __name__ == "__main__":
    main()
