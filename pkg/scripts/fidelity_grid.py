"""Closed-loop fidelity of the optimized reference over a grid of PD gains.

For each (Kp, Kd) pair the smooth spiral is optimized with those gains,
resampled at 10 kHz and played through the simulated loop. The table
shows how far the simulated output strays past the tolerance band,
which is what motivated the stiff gains in the bundled configs.

    python scripts/fidelity_grid.py [--config configs/smooth_spiral.yaml]
"""
from __future__ import annotations

import argparse
import warnings
from pathlib import Path

from contourref.config import load_config
from contourref.nlp import build_nlp, initial_guess, solve
from contourref.plant import ControllerGains, closed_loop_spectral_radius
from contourref.postprocess import compute_metrics, initial_output_state, resample_reference, simulate_closed_loop

ROOT = Path(__file__).resolve().parents[1]
GRID = [(4e3, 120.0), (1e4, 200.0), (1e5, 632.0), (1e6, 2000.0)]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "smooth_spiral.yaml"))
    args = ap.parse_args()
    cfg = load_config(args.config)
    obj = cfg.contour.build()
    tol = cfg.bounds.tol
    print(f"{'Kp [1/s^2]':>11} {'Kd [1/s]':>9} {'rho':>6} {'status':<20} {'time [ms]':>10} {'sim Linf [um]':>14} {'ratio':>6}")
    for kp, kd in GRID:
        gains = ControllerGains(kp, kp, kd, kd)
        sol = solve(build_nlp(obj, gains, cfg.weights, cfg.bounds, cfg.solver), initial_guess(obj, cfg.solver, cfg.bounds.relax_count))
        rho = closed_loop_spectral_radius(gains, cfg.dt_out_s)
        if not sol.is_feasible():
            print(f"{kp:11.4g} {kd:9.4g} {rho:6.3f} {sol.status:<20}")
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ref = resample_reference(sol, obj, cfg.dt_out_s)
        m = compute_metrics(simulate_closed_loop(ref, gains, initial_output_state(obj)), obj, cfg.bounds)
        print(
            f"{kp:11.4g} {kd:9.4g} {rho:6.3f} {sol.status:<20} {sol.traversal_time * 1e3:10.2f} "
            f"{m.linf_error * 1e6:14.2f} {m.linf_error / tol:6.2f}"
        )


if __name__ == "__main__":
    main()
