#!/usr/bin/env python3
"""Seed sweep over the bundled 50-items-per-class scenario.

Runs the full simulation once per seed (trace collection off, so each run
is a few milliseconds) and reports the per-class mean number of correctly
binned items next to the published machine results.  With enough seeds the
means settle within a small fraction of an item.

Usage:
    python3 scripts/sweep_seeds.py --seeds 1000
    python3 scripts/sweep_seeds.py --seeds 200 --scenario scenarios/fifty_per_class.json
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from convowaste.domain import ALL_CLASSES, MachineConfig
from convowaste.sim import load_scenario, run_simulation

PUBLISHED_CORRECT = {
    "plastic": 47, "metal": 47, "glass": 45, "organic": 48, "medical": 46, "ewaste": 44
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=1000, help="number of runs (default 1000)")
    parser.add_argument(
        "--scenario", default="scenarios/fifty_per_class.json", help="arrival schedule to sweep"
    )
    parser.add_argument("--config", help="machine config JSON (default: built-in)")
    args = parser.parse_args()

    from convowaste.domain import load_config

    config = load_config(args.config) if args.config else MachineConfig()
    scenario = load_scenario(args.scenario)

    correct = {c: 0 for c in ALL_CLASSES}
    latency = {c: 0.0 for c in ALL_CLASSES}
    started = time.monotonic()
    for seed in range(args.seeds):
        result = run_simulation(config, scenario, seed=seed, collect_trace=False)
        for c in ALL_CLASSES:
            per = result.metrics.per_class[c]
            correct[c] += per.correctly_binned
            latency[c] += per.mean_latency_s
    elapsed = time.monotonic() - started

    print(f"{args.seeds} runs of {scenario.name or args.scenario} in {elapsed:.1f}s")
    print(f"{'Class':<14s} {'Mean correct':>12s} {'Published':>9s} {'Delta':>7s} {'Latency':>8s}")
    for c in ALL_CLASSES:
        mean = correct[c] / args.seeds
        target = PUBLISHED_CORRECT[c.key]
        print(
            f"{c.label:<14s} {mean:>12.3f} {target:>9d} {mean - target:>+7.3f} "
            f"{latency[c] / args.seeds:>8.2f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
