#!/usr/bin/env python3
"""Regenerate the golden scenario records.

Runs every catalog scenario at its pinned settings and freezes the golden
checks into src/nondiv/data/goldens.json.  Run from the repository root
after any change that intentionally shifts scenario outputs, then commit
the refreshed file.
"""

import json
import pathlib
import sys
import time

from nondiv.scenarios import SCENARIOS, golden_template, run_scenario

OUT = pathlib.Path(__file__).resolve().parent.parent / "src" / "nondiv" / "data" / "goldens.json"


def main() -> int:
    goldens = {}
    for name, spec in SCENARIOS.items():
        t0 = time.time()
        results, extras = run_scenario(spec)
        kinds = [v.kind for _, v in results]
        golden = golden_template(spec, results, extras)
        if any(k != spec.expected_verdict for k in kinds):
            print(f"!! {name}: got {kinds}, expected {spec.expected_verdict}")
            return 1
        goldens[name] = golden
        print(f"{name:32s} {kinds} {time.time() - t0:6.1f}s "
              f"({len(golden['checks'])} checks)")
    OUT.write_text(json.dumps(goldens, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
