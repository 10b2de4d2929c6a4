"""Versioned text serialization of NLP solutions.

The file is JSON: scalar metadata as key-value pairs and every decision
variable block as an array. Floats are written with ``repr`` precision,
so a load reproduces the solution bit for bit.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import InvalidInputError
from .problem import BLOCKS
from .solution import NlpSolution

FORMAT = "contourref-solution"
VERSION = 1


def solution_to_dict(sol: NlpSolution, config_hash: str = "") -> dict:
    x = sol.to_vector()
    n = sol.n
    return {
        "format": FORMAT,
        "version": VERSION,
        "config_hash": config_hash,
        "n_points": n,
        "status": sol.status,
        "solver_message": sol.solver_message,
        "iterations": int(sol.iterations),
        "objective_value": float(sol.objective_value),
        "max_constraint_violation": float(sol.max_constraint_violation),
        "traversal_time_s": sol.traversal_time,
        "variables": {name: x[i * n:(i + 1) * n].tolist() for i, name in enumerate(BLOCKS)},
        "multipliers": {
            "constraints": None if sol.lam_g is None else np.asarray(sol.lam_g, dtype=float).tolist(),
            "bounds": None if sol.lam_x is None else np.asarray(sol.lam_x, dtype=float).tolist(),
        },
    }


def solution_from_dict(d: dict) -> NlpSolution:
    if d.get("format") != FORMAT:
        raise InvalidInputError("not a solution file")
    if d.get("version") != VERSION:
        raise InvalidInputError(f"unsupported solution file version {d.get('version')!r}")
    n = int(d["n_points"])
    try:
        x = np.concatenate([np.asarray(d["variables"][name], dtype=float) for name in BLOCKS])
    except KeyError as exc:
        raise InvalidInputError(f"solution file lacks variable block {exc.args[0]}") from None
    if len(x) != n * len(BLOCKS):
        raise InvalidInputError("variable blocks do not match n_points")
    mult = d.get("multipliers", {})
    lam_g, lam_x = mult.get("constraints"), mult.get("bounds")
    return NlpSolution.from_vector(
        x,
        n,
        status=d["status"],
        objective_value=float(d["objective_value"]),
        max_constraint_violation=float(d["max_constraint_violation"]),
        lam_g=None if lam_g is None else np.asarray(lam_g, dtype=float),
        lam_x=None if lam_x is None else np.asarray(lam_x, dtype=float),
        iterations=int(d.get("iterations", 0)),
        solver_message=d.get("solver_message", ""),
    )


def save_solution(sol: NlpSolution, path: str | Path, config_hash: str = "") -> None:
    text = json.dumps(solution_to_dict(sol, config_hash), indent=1, allow_nan=True)
    Path(path).write_text(text + "\n")


def load_solution(path: str | Path) -> NlpSolution:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return solution_from_dict(d)
