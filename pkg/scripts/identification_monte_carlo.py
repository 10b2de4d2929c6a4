"""Monte Carlo check of the gain identifier's standard errors.

For each noise level, many seeded logs are synthesized and fitted; the
table reports the fraction of fits whose true gains lie within k
standard errors (all four gains at once) and the mean relative error.

    python scripts/identification_monte_carlo.py [--seeds 200]
"""
from __future__ import annotations

import argparse

import numpy as np

from contourref.plant import ControllerGains
from contourref.sysid import fit_gains, sinusoid_reference, synth_log

START = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=200)
    ap.add_argument("--kp", type=float, default=100.0)
    ap.add_argument("--kd", type=float, default=10.0)
    ap.add_argument("--dt-s", type=float, default=1e-3)
    args = ap.parse_args()
    truth = ControllerGains(args.kp, args.kp, args.kd, args.kd)
    ref = sinusoid_reference(duration=2.0, dt=args.dt_s)
    print(f"{'noise [m/s^2]':>13} {'within 1 SE':>11} {'within 2 SE':>11} {'within 3 SE':>11} {'mean rel err':>13}")
    for sigma in (1e-3, 1e-2, 1e-1):
        z, rel = [], []
        for seed in range(args.seeds):
            rep = fit_gains(synth_log(ref, truth, START, noise_std=sigma, seed=seed))
            diff = np.abs(rep.gains.matrix - truth.matrix)
            z.append((diff / rep.std_errors).max())
            rel.append((diff / truth.matrix).max())
        z = np.array(z)
        cover = [np.mean(z <= k) for k in (1, 2, 3)]
        print(f"{sigma:13.0e} {cover[0]:11.3f} {cover[1]:11.3f} {cover[2]:11.3f} {np.mean(rel):13.3e}")


if __name__ == "__main__":
    main()
