#!/usr/bin/env python3
"""Benchmark every search strategy across the synthetic fixture families.

Writes one JSON report per family under --out (default ./bench-reports) and
prints the success-rate table.
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

FAMILIES = ("planted-disjoint", "planted-overlap", "noise")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--k", type=int, default=9)
    parser.add_argument("--delta", type=float, default=0.2)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default="bench-reports")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for family in FAMILIES:
        report = out / f"{family}.json"
        code = subprocess.call([
            sys.executable, "-m", "redactcert.cli", "bench",
            "--kind", family, "--trials", str(args.trials),
            "--k", str(args.k), "--delta", str(args.delta),
            "--workers", str(args.workers), "--report", str(report),
        ])
        if code != 0:
            return code

    print(f"\n{'family':<18} {'algorithm':<9} {'success':<9} {'verified':<9} "
          f"{'avg evals':<10} avg seconds")
    for family in FAMILIES:
        data = json.loads((out / f"{family}.json").read_text())
        for name, row in data["algorithms"].items():
            verified = row.get("verified_rate")
            print(
                f"{family:<18} {name:<9} {row['success_rate']:<9.2f} "
                f"{('-' if verified is None else f'{verified:.2f}'):<9} "
                f"{row['avg_model_evals']:<10.1f} {row['avg_wall_time_s']:.4f}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
