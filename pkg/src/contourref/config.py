"""Declarative run configuration loaded from YAML.

Every physical quantity carries its unit in the key name (``tol_m``,
``dt_max_s``, ...). Unknown keys are rejected, so a misspelled or
unit-less field fails loudly instead of silently taking a default.
"""
from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .contour import Objective, make_sharp_spiral, make_smooth_spiral, read_path_csv, resample_constant_arclength
from .errors import InvalidInputError
from .nlp import BoundSet, SolverConfig, Weights
from .plant import ControllerGains

SCHEMA: dict[str, dict[str, type | tuple]] = {
    "contour": {
        "shape": str,  # smooth_spiral | sharp_spiral | csv
        "n_points": int,
        "r0_m": float,
        "turns": float,
        "pitch_m": float,
        "steps": int,
        "increment_m": float,
        "path_file": str,
        "closed": bool,
    },
    "weights": {
        "q_omega_pos_per_m2": float,
        "q_omega_vel_s2_per_m2": float,
        "q_gamma_pos_per_m2": float,
        "q_gamma_vel_s2_per_m2": float,
        "r_u_s4_per_m2": list,
        "r_v_s4_per_m2": list,
        "time_per_s": float,
    },
    "bounds": {
        "u_max_m_per_s2": float,
        "vel_max_m_per_s": float,
        "tol_m": float,
        "relax_count": int,
    },
    "solver": {
        "feasibility_tol": float,
        "optimality_tol": float,
        "max_iterations": int,
        "dt_min_s": float,
        "dt_max_s": float,
        "initial_speed_guess_m_per_s": float,
        "print_level": int,
    },
    "gains": {
        "kp_x_per_s2": float,
        "kp_y_per_s2": float,
        "kd_x_per_s": float,
        "kd_y_per_s": float,
        "gains_file": str,
        "tracking_log": str,
    },
    "output": {
        "dt_out_s": float,
        "sweep_tolerances_m": list,
        "plots": bool,
    },
}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-5`` style floats (YAML 1.1 wants ``1.0e-5``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?$|^[-+]?\.(?:inf|Inf|INF)$|^\.(?:nan|NaN|NAN)$"),
    list("-+0123456789."),
)
TOP_LEVEL = {"name": str, "seed": int, **{k: dict for k in SCHEMA}}
PATH_KEYS = {("contour", "path_file"), ("gains", "gains_file"), ("gains", "tracking_log")}


@dataclass
class ContourSpec:
    shape: str = "smooth_spiral"
    n_points: int = 256
    r0_m: float = 0.01
    turns: float = 1.0
    pitch_m: float = 0.002
    steps: int = 8
    increment_m: float | None = None
    path_file: Path | None = None
    closed: bool = False

    def build(self) -> Objective:
        if self.shape == "smooth_spiral":
            path = make_smooth_spiral(self.r0_m, self.turns, self.pitch_m)
        elif self.shape == "sharp_spiral":
            path = make_sharp_spiral(self.r0_m, self.steps, self.increment_m)
        elif self.shape == "csv":
            path = read_path_csv(self.path_file, self.closed)
        else:
            raise InvalidInputError(f"unknown contour shape {self.shape!r}")
        return resample_constant_arclength(path, self.n_points)


@dataclass
class GainsSource:
    gains: ControllerGains | None = None
    gains_file: Path | None = None
    tracking_log: Path | None = None

    def resolve(self):
        """Return ``(gains, fit_report_or_None)``."""
        from .sysid import TrackingLog, fit_gains, read_gains

        if self.gains is not None:
            return self.gains, None
        if self.gains_file is not None:
            return read_gains(self.gains_file), None
        report = fit_gains(TrackingLog.read_csv(self.tracking_log))
        return report.gains, report


@dataclass
class RunConfig:
    name: str = "run"
    seed: int = 0
    contour: ContourSpec = field(default_factory=ContourSpec)
    weights: Weights = field(default_factory=Weights)
    bounds: BoundSet = field(default_factory=BoundSet)
    solver: SolverConfig = field(default_factory=SolverConfig)
    gains: GainsSource = field(default_factory=GainsSource)
    dt_out_s: float = 1e-4
    sweep_tolerances_m: tuple = (5e-6, 10e-6, 20e-6, 40e-6)
    plots: bool = True
    raw: dict = field(default_factory=dict, repr=False)
    base_dir: Path = field(default_factory=Path.cwd, repr=False)

    def hash(self) -> str:
        """SHA-256 of the canonical JSON form of the raw config plus input file contents."""
        blob = {"config": self.raw, "inputs": {}}
        for section, key in sorted(PATH_KEYS):
            p = self.raw.get(section, {}).get(key)
            if p is not None:
                blob["inputs"][f"{section}.{key}"] = hashlib.sha256(_resolve(self.base_dir, p).read_bytes()).hexdigest()
        return hashlib.sha256(json.dumps(blob, sort_keys=True).encode()).hexdigest()


def load_config(path: str | Path, overrides: list[str] | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.load(path.read_text(), Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise InvalidInputError(f"{path}: {where}malformed YAML") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise InvalidInputError(f"{path}: top level must be a mapping")
    raw = apply_overrides(raw, overrides or [])
    return config_from_dict(raw, path.parent.resolve())


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` strings; values are parsed as YAML scalars."""
    raw = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise InvalidInputError(f"override {item!r} is not of the form section.key=value")
        dotted, value = item.split("=", 1)
        parts = dotted.strip().split(".")
        target = raw
        for p in parts[:-1]:
            target = target.setdefault(p, {})
            if not isinstance(target, dict):
                raise InvalidInputError(f"override {item!r}: {p} is not a section")
        target[parts[-1]] = yaml.load(value, Loader=_Loader)
    return raw


def _resolve(base: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def _check_keys(raw: dict):
    for key, val in raw.items():
        if key not in TOP_LEVEL:
            raise InvalidInputError(f"unknown top-level key {key!r}")
        if key in SCHEMA:
            if not isinstance(val, dict):
                raise InvalidInputError(f"section {key!r} must be a mapping")
            for k, v in val.items():
                if k not in SCHEMA[key]:
                    raise InvalidInputError(
                        f"unknown key {key}.{k}; allowed keys (units in the name): {', '.join(SCHEMA[key])}"
                    )
                _check_type(f"{key}.{k}", v, SCHEMA[key][k])
        else:
            _check_type(key, val, TOP_LEVEL[key])


def _check_type(name, v, typ):
    if typ is float:
        ok = isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)
    elif typ is int:
        ok = isinstance(v, int) and not isinstance(v, bool)
    else:
        ok = isinstance(v, typ)
    if not ok:
        raise InvalidInputError(f"{name} must be of type {typ.__name__}, got {v!r}")


def _positive(name, v):
    if not v > 0:
        raise InvalidInputError(f"{name} must be > 0, got {v!r}")


def config_from_dict(raw: dict, base_dir: Path | None = None) -> RunConfig:
    base_dir = Path.cwd() if base_dir is None else Path(base_dir)
    _check_keys(raw)
    c = raw.get("contour", {})
    w = raw.get("weights", {})
    b = raw.get("bounds", {})
    s = raw.get("solver", {})
    g = raw.get("gains", {})
    o = raw.get("output", {})

    for section, key in PATH_KEYS:
        p = raw.get(section, {}).get(key)
        if p is not None and not _resolve(base_dir, p).is_file():
            raise InvalidInputError(f"{section}.{key}: file not found: {p}")

    contour = ContourSpec(
        shape=c.get("shape", "smooth_spiral"),
        n_points=c.get("n_points", 256),
        r0_m=c.get("r0_m", 0.01 if c.get("shape", "smooth_spiral") == "smooth_spiral" else 1e-3),
        turns=c.get("turns", 1.0),
        pitch_m=c.get("pitch_m", 0.002),
        steps=c.get("steps", 8),
        increment_m=c.get("increment_m"),
        path_file=_resolve(base_dir, c["path_file"]) if "path_file" in c else None,
        closed=c.get("closed", False),
    )
    if contour.shape not in ("smooth_spiral", "sharp_spiral", "csv"):
        raise InvalidInputError(f"contour.shape must be smooth_spiral, sharp_spiral or csv, got {contour.shape!r}")
    if contour.shape == "csv" and contour.path_file is None:
        raise InvalidInputError("contour.shape csv needs contour.path_file")
    if contour.n_points < 4:
        raise InvalidInputError("contour.n_points must be at least 4")
    _positive("contour.r0_m", contour.r0_m)

    defaults = Weights()

    def diag(key, default):
        val = w.get(key)
        if val is None:
            return default
        if len(val) != 2 or not all(isinstance(x, (int, float)) for x in val):
            raise InvalidInputError(f"weights.{key} must be a list of two numbers (x, y)")
        return np.diag([float(x) for x in val])

    weights = Weights(
        q_omega=np.diag([w.get("q_omega_pos_per_m2", defaults.q_omega[0, 0]), w.get("q_omega_vel_s2_per_m2", defaults.q_omega[1, 1])]),
        r_u=diag("r_u_s4_per_m2", defaults.r_u),
        q_gamma=np.diag([w.get("q_gamma_pos_per_m2", defaults.q_gamma[0, 0]), w.get("q_gamma_vel_s2_per_m2", defaults.q_gamma[1, 1])]),
        r_v=diag("r_v_s4_per_m2", defaults.r_v),
        time=w.get("time_per_s", defaults.time),
    )
    for key in ("tol_m", "u_max_m_per_s2", "vel_max_m_per_s"):
        if key in b:
            _positive(f"bounds.{key}", b[key])
    bounds = BoundSet(
        u_max=b.get("u_max_m_per_s2", 2.0),
        vel_max=b.get("vel_max_m_per_s", 2.0),
        tol=b.get("tol_m", 20e-6),
        relax_count=b.get("relax_count", 16),
    )
    sd = SolverConfig()
    solver = SolverConfig(
        feasibility_tol=s.get("feasibility_tol", sd.feasibility_tol),
        optimality_tol=s.get("optimality_tol", sd.optimality_tol),
        max_iterations=s.get("max_iterations", sd.max_iterations),
        dt_min=s.get("dt_min_s", sd.dt_min),
        dt_max=s.get("dt_max_s", sd.dt_max),
        initial_speed_guess=s.get("initial_speed_guess_m_per_s", sd.initial_speed_guess),
        print_level=s.get("print_level", sd.print_level),
    )

    gain_keys = ("kp_x_per_s2", "kp_y_per_s2", "kd_x_per_s", "kd_y_per_s")
    given = [k for k in gain_keys if k in g]
    sources = (len(given) > 0) + ("gains_file" in g) + ("tracking_log" in g)
    if sources != 1:
        raise InvalidInputError("gains: give exactly one of the four gain values, gains_file or tracking_log")
    if given and len(given) != 4:
        raise InvalidInputError(f"gains: all of {', '.join(gain_keys)} are required")
    gains = GainsSource(
        gains=ControllerGains(*(float(g[k]) for k in gain_keys)) if given else None,
        gains_file=_resolve(base_dir, g["gains_file"]) if "gains_file" in g else None,
        tracking_log=_resolve(base_dir, g["tracking_log"]) if "tracking_log" in g else None,
    )

    dt_out = o.get("dt_out_s", 1e-4)
    _positive("output.dt_out_s", dt_out)
    tols = tuple(float(t) for t in o.get("sweep_tolerances_m", (5e-6, 10e-6, 20e-6, 40e-6)))
    for t in tols:
        _positive("output.sweep_tolerances_m entry", t)
    return RunConfig(
        name=raw.get("name", "run"),
        seed=raw.get("seed", 0),
        contour=contour,
        weights=weights,
        bounds=bounds,
        solver=solver,
        gains=gains,
        dt_out_s=float(dt_out),
        sweep_tolerances_m=tols,
        plots=o.get("plots", True),
        raw=raw,
        base_dir=base_dir,
    )
