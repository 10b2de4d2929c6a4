"""Tolerance sweep on the sharp spiral under two weights on traversal time.

With a weight of 1 per second the per-knot input penalties dominate the
cost: the stage crawls (about 3.6 s) and the wider bands go unused.
Weighting time at 1 per millisecond makes the band the active limit,
so every widening of the band buys a shorter traversal.

    python scripts/time_weight_study.py
"""
from __future__ import annotations

import dataclasses
from pathlib import Path

from contourref.config import load_config
from contourref.postprocess import format_sweep_table, tolerance_sweep

ROOT = Path(__file__).resolve().parents[1]


def main() -> None:
    cfg = load_config(ROOT / "configs" / "sharp_spiral.yaml")
    obj = cfg.contour.build()
    gains, _ = cfg.gains.resolve()
    for w in (1.0, 1e3):
        weights = dataclasses.replace(cfg.weights, time=w)
        rows, _ = tolerance_sweep(obj, gains, weights, cfg.bounds, cfg.sweep_tolerances_m, cfg.solver)
        print(f"time weight {w:g} per second")
        print(format_sweep_table(rows))
        print()


if __name__ == "__main__":
    main()
