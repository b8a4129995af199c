#!/usr/bin/env python3
"""Regenerate (or verify) the committed golden trace.

The golden file pins the simulator's observable behavior for the
single-plastic scenario at seed 1.  Any intentional change to event
timing, ordering, or serialization must regenerate it; run with --check
first to see whether current behavior still matches.

Usage:
    python3 scripts/make_golden_trace.py --check
    python3 scripts/make_golden_trace.py          # rewrite the file
"""

import argparse
import io
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from convowaste.domain import MachineConfig
from convowaste.sim import run_simulation, single_item_scenario
from convowaste.trace import write_trace

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "data" / "golden_single_plastic.ndjson"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--check", action="store_true", help="compare against the committed file instead of writing"
    )
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    result = run_simulation(MachineConfig(), single_item_scenario(), seed=args.seed)
    buf = io.StringIO()
    write_trace(buf, result.header, result.events)
    fresh = buf.getvalue().encode("ascii")

    if args.check:
        committed = GOLDEN.read_bytes() if GOLDEN.exists() else b""
        if fresh == committed:
            print(f"ok: {GOLDEN} matches current behavior ({len(fresh)} bytes)")
            return 0
        print(f"MISMATCH: {GOLDEN} differs from current behavior")
        print(f"  committed {len(committed)} bytes, current {len(fresh)} bytes")
        return 1

    GOLDEN.parent.mkdir(parents=True, exist_ok=True)
    GOLDEN.write_bytes(fresh)
    print(f"wrote {GOLDEN} ({len(fresh)} bytes, {len(result.events)} events)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
