"""Solve both bundled benchmarks and their tolerance sweeps, then print a summary table.

    python scripts/run_benchmarks.py [--out-root runs/benchmarks]
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

from contourref import cli

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-root", default="runs/benchmarks")
    args = ap.parse_args()
    out = Path(args.out_root)
    worst = 0
    for name in ("smooth_spiral", "sharp_spiral"):
        config = ROOT / "configs" / f"{name}.yaml"
        worst = max(worst, cli.main(["optimize", str(config), "--out-dir", str(out / name)]))
        worst = max(worst, cli.main(["sweep", str(config), "--out-dir", str(out / f"{name}_sweep")]))
    print()
    print(f"{'benchmark':<14} {'status':<9} {'time [ms]':>10} {'knot Linf [um]':>15} {'sim Linf [um]':>14}")
    for name in ("smooth_spiral", "sharp_spiral"):
        d = out / name
        man = json.loads((d / "manifest.json").read_text())
        knot = (d / "knot_metrics.csv").read_text().splitlines()[1].split(",")
        sim = (d / "metrics.csv").read_text().splitlines()[1].split(",")
        print(f"{name:<14} {man['status']:<9} {float(knot[0]) * 1e3:10.2f} {float(knot[2]) * 1e6:15.3f} {float(sim[2]) * 1e6:14.3f}")
    return worst


if __name__ == "__main__":
    raise SystemExit(main())
