"""Cached benchmark solves shared by the NLP, postprocess and acceptance tests."""
from __future__ import annotations

import time
from functools import lru_cache
from pathlib import Path

import numpy as np

from contourref.config import load_config
from contourref.nlp import build_nlp, initial_guess, solve
from contourref.plant import ControllerGains
from contourref.sysid import fit_gains, sinusoid_reference, synth_log

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
# the synthetic stage the benchmark configs describe
TRUE_GAINS = ControllerGains(1e6, 1e6, 2000.0, 2000.0)


@lru_cache(maxsize=None)
def config(name: str):
    return load_config(CONFIGS / f"{name}.yaml")


@lru_cache(maxsize=None)
def solved(name: str, tol: float | None = None):
    """(config, objective, problem, solution, wall seconds) for a bundled config."""
    cfg = config(name)
    bounds = cfg.bounds if tol is None else cfg.bounds.replace(tol=tol)
    objective = cfg.contour.build()
    gains, _ = cfg.gains.resolve()
    t0 = time.perf_counter()
    problem = build_nlp(objective, gains, cfg.weights, bounds, cfg.solver)
    sol = solve(problem, initial_guess(objective, cfg.solver, bounds.relax_count))
    return cfg, objective, problem, sol, time.perf_counter() - t0


@lru_cache(maxsize=None)
def fitted_benchmark_gains(seed: int = 0):
    """Gains identified from a noisy log of the synthetic stage."""
    ref = sinusoid_reference(duration=1.0, dt=1e-4)
    start = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    return fit_gains(synth_log(ref, TRUE_GAINS, start, noise_std=0.01, seed=seed))
