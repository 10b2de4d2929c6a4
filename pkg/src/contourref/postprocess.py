"""Constant-rate reference generation, closed-loop playback and error metrics."""
from __future__ import annotations

import csv
import logging
import warnings
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .contour import Objective
from .errors import InvalidInputError
from .frames import frames_of, to_global
from .nlp import BoundSet, NlpSolution, SolverConfig, Weights, build_nlp, initial_guess, solve
from .plant import ControllerGains, closed_loop_spectral_radius

log = logging.getLogger(__name__)

REFERENCE_HEADER = ["t", "rx", "ry", "rvx", "rvy"]


@dataclass
class ReferenceFile:
    dt: float
    t: np.ndarray  # (M,)
    pos: np.ndarray  # (M, 2)
    vel: np.ndarray  # (M, 2)

    def __len__(self) -> int:
        return len(self.t)

    def states(self) -> np.ndarray:
        s = np.zeros((len(self.t), 2, 3))
        s[:, 0, :2], s[:, 0, 2] = self.pos, 1.0
        s[:, 1, :2] = self.vel
        return s

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REFERENCE_HEADER)
            for row in np.column_stack([self.t, self.pos, self.vel]):
                w.writerow([f"{v:.14e}" for v in row])

    @classmethod
    def read_csv(cls, path: str | Path) -> "ReferenceFile":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise InvalidInputError(f"{path}: empty file")
            if [h.strip() for h in header] != REFERENCE_HEADER:
                raise InvalidInputError(f"{path}: line 1: expected header {','.join(REFERENCE_HEADER)}")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    vals = [float(c) for c in row]
                except ValueError:
                    raise InvalidInputError(f"{path}: line {lineno}: non-numeric field") from None
                if len(vals) != 5:
                    raise InvalidInputError(f"{path}: line {lineno}: expected 5 fields")
                rows.append(vals)
        if len(rows) < 2:
            raise InvalidInputError(f"{path}: need at least 2 rows")
        a = np.array(rows)
        steps = np.diff(a[:, 0])
        if np.any(steps <= 0):
            raise InvalidInputError(f"{path}: time column must be strictly increasing")
        dt = float(np.median(steps))
        if not np.allclose(steps, dt, rtol=1e-6, atol=0):
            raise InvalidInputError(f"{path}: time step is not constant")
        return cls(dt, a[:, 0], a[:, 1:3], a[:, 3:5])


@dataclass
class Trajectory:
    t: np.ndarray  # (M,)
    states: np.ndarray  # (M, 2, 3) global
    inputs: np.ndarray  # (M, 2) acceleration applied over [t_i, t_i + dt)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def pos(self) -> np.ndarray:
        return self.states[:, 0, :2]


@dataclass
class MetricsReport:
    traversal_time: float
    l2_error: float
    linf_error: float
    violation_count: int
    n_samples: int = 0

    def as_dict(self) -> dict:
        return {
            "traversal_time_s": self.traversal_time,
            "l2_error_m": self.l2_error,
            "linf_error_m": self.linf_error,
            "violation_count": self.violation_count,
            "n_samples": self.n_samples,
        }

    def write(self, path: str | Path) -> None:
        d = self.as_dict()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(d))
            w.writerow([_fmt(v) for v in d.values()])

    def summary(self) -> str:
        return (
            f"traversal time {self.traversal_time * 1e3:.3f} ms, "
            f"L2 {self.l2_error * 1e6:.3f} um, Linf {self.linf_error * 1e6:.3f} um, "
            f"{self.violation_count} of {self.n_samples} samples outside the band"
        )


def _fmt(v):
    return f"{v:.14e}" if isinstance(v, float) else str(v)


def resample_reference(solution: NlpSolution, objective: Objective, dt_out: float = 1e-4) -> ReferenceFile:
    """Reference at a constant rate from the variable-step optimum.

    Within each optimization interval the reference follows the exact
    double-integrator flow from knot k under the held virtual input v(k),
    so the output matches the knots themselves at the knot times.
    """
    if not dt_out > 0:
        raise InvalidInputError("dt_out must be positive")
    if dt_out > solution.dt[:-1].min():
        warnings.warn(
            f"dt_out={dt_out:g} s exceeds the smallest optimization step {solution.dt[:-1].min():g} s",
            stacklevel=2,
        )
    knots = solution.time
    gam = solution.gamma_global(objective)
    P, V = gam[:, 0, :2], gam[:, 1, :2]
    acc = solution.v
    total = knots[-1]
    m = int(np.floor(total / dt_out * (1 + 1e-12))) + 1
    t = dt_out * np.arange(m)
    k = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(knots) - 1)
    tau = (t - knots[k])[:, None]
    pos = P[k] + V[k] * tau + 0.5 * acc[k] * tau * tau
    vel = V[k] + acc[k] * tau
    return ReferenceFile(float(dt_out), t, pos, vel)


def simulate_closed_loop(reference: ReferenceFile, gains: ControllerGains, initial_state: np.ndarray, noise_std: float = 0.0, rng=None) -> Trajectory:
    """Play the reference through the PD loop and double integrator at the reference rate.

    The input applied over step i is computed from the error at step i-1
    (at step 0 from the initial error). ``noise_std`` adds Gaussian noise
    to the applied acceleration.
    """
    ref = reference.states()
    m = len(ref)
    dt = reference.dt
    rho = closed_loop_spectral_radius(gains, dt)
    if rho >= 1.0:
        warnings.warn(f"PD loop is unstable at dt={dt:g} s (spectral radius {rho:.3f})", stacklevel=2)
    kp, kd = gains.kp, gains.kd
    states = np.zeros((m, 2, 3))
    inputs = np.zeros((m, 2))
    states[0] = initial_state
    states[:, 0, 2] = 1.0
    noise = np.zeros((m, 2))
    if noise_std > 0:
        rng = np.random.default_rng() if rng is None else rng
        noise = rng.normal(0.0, noise_std, size=(m, 2))
    p = np.array(initial_state[0, :2], dtype=float)
    v = np.array(initial_state[1, :2], dtype=float)
    u_next = kp * (ref[0, 0, :2] - p) + kd * (ref[0, 1, :2] - v)
    h = 0.5 * dt * dt
    for i in range(m):
        u = u_next + noise[i]
        inputs[i] = u
        states[i, 0, :2], states[i, 1, :2] = p, v
        u_next = kp * (ref[i, 0, :2] - p) + kd * (ref[i, 1, :2] - v)
        p = p + dt * v + h * u
        v = v + dt * u
    return Trajectory(reference.t.copy(), states, inputs)


class PolylineProjector:
    """Nearest-point projection onto a polyline, densified for a KD-tree search."""

    def __init__(self, polyline: np.ndarray, max_segment: float | None = None):
        pts = np.asarray(polyline, dtype=float)
        seg = np.hypot(*np.diff(pts, axis=0).T)
        total = seg.sum()
        h = max_segment or total / 20000
        dense = [pts[:1]]
        for a, b, L in zip(pts[:-1], pts[1:], seg):
            k = max(1, int(np.ceil(L / h)))
            f = np.arange(1, k + 1)[:, None] / k
            dense.append(a + f * (b - a))
        self.pts = np.vstack(dense)
        self.cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(self.pts, axis=0).T))])
        self.tree = cKDTree(self.pts)

    def project(self, q: np.ndarray, k: int = 6):
        """Signed perpendicular distance (left of travel positive) and arc position of each query."""
        q = np.atleast_2d(q)
        k = min(k, len(self.pts))
        _, idx = self.tree.query(q, k=k)
        idx = np.atleast_2d(idx.T).T if idx.ndim == 1 else idx
        nseg = len(self.pts) - 1
        cand = np.concatenate([np.clip(idx - 1, 0, nseg - 1), np.clip(idx, 0, nseg - 1)], axis=1)
        a = self.pts[cand]
        d = self.pts[cand + 1] - a
        w = q[:, None, :] - a
        L2 = np.einsum("mkj,mkj->mk", d, d)
        f = np.clip(np.einsum("mkj,mkj->mk", w, d) / L2, 0.0, 1.0)
        r = w - f[..., None] * d
        dist = np.hypot(r[..., 0], r[..., 1])
        best = np.argmin(dist, axis=1)
        rows = np.arange(len(q))
        sel = cand[rows, best]
        dd, rr = d[rows, best], r[rows, best]
        signed = (dd[:, 0] * rr[:, 1] - dd[:, 1] * rr[:, 0]) / np.sqrt(L2[rows, best])
        arc = self.cum[sel] + f[rows, best] * np.sqrt(L2[rows, best])
        return signed, arc


def deviation_profile(trajectory: Trajectory, objective: Objective, bounds: BoundSet):
    """Signed deviation, arc position and constrained-region mask for each sample."""
    proj = PolylineProjector(objective.reference_polyline())
    dev, arc = proj.project(trajectory.pos)
    _, arc_relax = proj.project(objective.xy[min(bounds.relax_count, len(objective) - 1)])
    return dev, arc, arc >= arc_relax[0]


def compute_metrics(trajectory: Trajectory, objective: Objective, bounds: BoundSet) -> MetricsReport:
    """Deviation statistics over samples past the relaxed run-in.

    L2 is the RMS of the perpendicular deviation, so a trajectory riding
    the band edge scores exactly ``tol``.
    """
    if len(trajectory) == 0:
        raise InvalidInputError("empty trajectory")
    dev, _, mask = deviation_profile(trajectory, objective, bounds)
    d = np.abs(dev[mask])
    if len(d) == 0:
        l2 = linf = 0.0
    else:
        l2 = float(np.sqrt(np.mean(d * d)))
        linf = float(d.max())
    return MetricsReport(
        traversal_time=float(trajectory.t[-1] - trajectory.t[0]),
        l2_error=min(l2, linf),
        linf_error=linf,
        violation_count=int(np.sum(d > bounds.tol)),
        n_samples=int(len(d)),
    )


def solution_metrics(solution: NlpSolution, bounds: BoundSet) -> MetricsReport:
    """Metrics at the optimization knots, from the local-frame deviation."""
    d = np.abs(solution.deviation[bounds.relax_count:])
    l2 = float(np.sqrt(np.mean(d * d)))
    linf = float(d.max())
    return MetricsReport(
        traversal_time=solution.traversal_time,
        l2_error=min(l2, linf),
        linf_error=linf,
        violation_count=int(np.sum(d > bounds.tol * (1 + 1e-9))),
        n_samples=int(len(d)),
    )


@dataclass
class SweepRow:
    tol: float
    traversal_time: float
    l2: float
    linf: float
    status: str
    objective_value: float
    l2_band: float

    def as_dict(self) -> dict:
        return {
            "tol_m": self.tol,
            "traversal_time_s": self.traversal_time,
            "l2_m": self.l2,
            "linf_m": self.linf,
            "status": self.status,
            "objective_value": self.objective_value,
            "l2_band_m": self.l2_band,
        }


def _sweep_solve(job):
    objective, gains, weights, bounds_template, config, tol, guess = job
    bounds = bounds_template.replace(tol=tol)
    try:
        return solve(build_nlp(objective, gains, weights, bounds, config), guess)
    except Exception as exc:  # a failed row must not abort the sweep
        log.error("sweep tol=%g failed: %s", tol, exc)
        return None


def tolerance_sweep(
    objective: Objective,
    gains: ControllerGains,
    weights: Weights,
    bounds_template: BoundSet,
    tolerances,
    config: SolverConfig,
    warm_start: bool = True,
    max_workers: int | None = None,
) -> tuple[list[SweepRow], dict]:
    """Solve once per tolerance; rows come back sorted by tolerance.

    With ``warm_start`` the solves run tightest first, each starting from
    the previous optimum (which is feasible for the looser band).
    Otherwise the solves are independent and may run in parallel.
    """
    tols = sorted(float(t) for t in tolerances)
    if len(tols) < 2:
        raise InvalidInputError("a sweep needs at least two tolerances")
    solutions: dict[float, NlpSolution] = {}
    guess = initial_guess(objective, config, bounds_template.relax_count)
    if warm_start:
        for tol in tols:
            sol = _sweep_solve((objective, gains, weights, bounds_template, config, tol, guess))
            solutions[tol] = sol
            if sol is not None and sol.is_feasible():
                guess = sol
    else:
        # the solver library is not thread-safe, so independent rows run in processes
        jobs = [(objective, gains, weights, bounds_template, config, tol, guess) for tol in tols]
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=max_workers, mp_context=ctx) as pool:
            for tol, sol in zip(tols, pool.map(_sweep_solve, jobs)):
                solutions[tol] = sol

    rows = []
    for tol in tols:
        sol = solutions[tol]
        if sol is None:
            rows.append(SweepRow(tol, float("nan"), float("nan"), float("nan"), "infeasible", float("nan"), tol))
            continue
        m = solution_metrics(sol, bounds_template.replace(tol=tol))
        rows.append(SweepRow(tol, m.traversal_time, m.l2_error, m.linf_error, sol.status, sol.objective_value, tol))
    return rows, solutions


def write_sweep_table(rows: list[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(rows[0].as_dict()))
        for r in rows:
            w.writerow([_fmt(v) for v in r.as_dict().values()])


def format_sweep_table(rows: list[SweepRow]) -> str:
    lines = [f"{'tol [um]':>9} {'time [ms]':>10} {'L2 [um]':>9} {'Linf [um]':>10} {'band [um]':>10}  status"]
    for r in rows:
        lines.append(
            f"{r.tol * 1e6:9.2f} {r.traversal_time * 1e3:10.3f} {r.l2 * 1e6:9.3f} {r.linf * 1e6:10.3f} {r.l2_band * 1e6:10.2f}  {r.status}"
        )
    return "\n".join(lines)


def initial_output_state(objective: Objective) -> np.ndarray:
    """Machine at rest on the first contour point."""
    s = np.zeros((2, 3))
    s[0, :2], s[0, 2] = objective.xy[0], 1.0
    return s


def global_output(solution: NlpSolution, objective: Objective) -> np.ndarray:
    return to_global(solution.omega_local, frames_of(objective.xy, objective.alpha))
