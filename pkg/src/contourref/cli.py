"""Command-line front end.

Exit codes: 0 success, 2 validation error, 3 solver failure, 4 I/O error.
Outputs go to a fresh directory under ``$CONTOURREF_OUTPUT_ROOT``
(default ``./runs``) unless ``--out-dir`` is given.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .contour import read_objective_csv, read_path_csv, write_objective_csv, write_path_csv
from .errors import IdentifiabilityError, InvalidInputError, SolverFailure
from .nlp import BoundSet, build_nlp, initial_guess, kkt_residuals, save_solution, solve
from .plant import ControllerGains
from .postprocess import (
    ReferenceFile,
    compute_metrics,
    format_sweep_table,
    global_output,
    initial_output_state,
    resample_reference,
    simulate_closed_loop,
    solution_metrics,
    tolerance_sweep,
    write_sweep_table,
)
from .sysid import fit_gains, read_gains, sinusoid_reference, synth_log, TrackingLog

OUTPUT_ROOT_ENV = "CONTOURREF_OUTPUT_ROOT"
EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("contourref")


# run directory and manifest --------------------------------------------


def run_directory(command: str, name: str, explicit: str | None) -> Path:
    if explicit:
        d = Path(explicit)
        d.mkdir(parents=True, exist_ok=True)
        return d
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    base = root / f"{command}-{name}-{stamp}"
    d, i = base, 1
    while d.exists():
        d = Path(f"{base}-{i}")
        i += 1
    d.mkdir(parents=True)
    return d


def _versions() -> dict:
    import casadi
    import scipy

    return {
        "contourref": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "casadi": casadi.__version__,
    }


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, argv, config_hash: str, wall: float, extra: dict | None = None) -> None:
    files = {p.name: _sha256(p) for p in sorted(out.iterdir()) if p.is_file() and p.name != "manifest.json"}
    manifest = {
        "command": command,
        "argv": list(argv),
        "config_hash": config_hash,
        "versions": _versions(),
        "wall_time_s": wall,
        "files": files,
    }
    manifest.update(extra or {})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _gains_from_args(args) -> ControllerGains:
    if args.gains is not None:
        return read_gains(args.gains)
    if args.kp is None or args.kd is None:
        raise InvalidInputError("give --gains FILE or both --kp and --kd")
    return ControllerGains(args.kp[0], args.kp[1], args.kd[0], args.kd[1])


def _load_objective(path):
    """Objective CSV plus, when present alongside it, the dense contour.csv it was sampled from."""
    dense = Path(path).with_name("contour.csv")
    return read_objective_csv(path, read_path_csv(dense) if dense.is_file() else None)


def _companion_objective(explicit, reference_path):
    if explicit:
        return _load_objective(explicit)
    guess = Path(reference_path).with_name("objective.csv")
    return _load_objective(guess) if guess.is_file() else None


def _write_metrics(out: Path, stem: str, report) -> None:
    report.write(out / f"{stem}.csv")
    (out / f"{stem}.txt").write_text(report.summary() + "\n")


# commands ---------------------------------------------------------------


def cmd_fit(args) -> int:
    t0 = time.perf_counter()
    tracking = TrackingLog.read_csv(args.log)
    report = fit_gains(tracking)
    out = run_directory("fit", Path(args.log).stem, args.out_dir)
    report.write(out / "fit_report.txt", out / "gains.txt")
    print(report.summary())
    write_manifest(out, "fit", args.argv, _sha256(Path(args.log)), time.perf_counter() - t0)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config, args.set)
    chash = cfg.hash()
    objective = cfg.contour.build()
    gains, fit = cfg.gains.resolve()
    out = run_directory("optimize", cfg.name, args.out_dir)
    write_objective_csv(objective, out / "objective.csv")
    write_path_csv(objective.source, out / "contour.csv")
    if fit is not None:
        fit.write(out / "fit_report.txt", out / "gains.txt")
    else:
        (out / "gains.txt").write_text("".join(f"{k} = {float(v)!r}\n" for k, v in _gain_items(gains)))

    problem = build_nlp(objective, gains, cfg.weights, cfg.bounds, cfg.solver)
    sol = solve(problem, initial_guess(objective, cfg.solver, cfg.bounds.relax_count))
    save_solution(sol, out / "solution.json", chash)
    stat, feas, compl = kkt_residuals(problem, sol)
    kkt = {"stationarity": stat, "feasibility": feas, "complementarity": compl}
    print(f"status {sol.status} ({sol.solver_message}), {sol.iterations} iterations, solve {sol.wall_time:.2f} s")
    print(f"KKT residuals (scaled): stationarity {stat:.3e}, feasibility {feas:.3e}, complementarity {compl:.3e}")
    if not sol.is_feasible():
        write_manifest(out, "optimize", args.argv, chash, time.perf_counter() - t0, {"status": sol.status, "kkt": kkt})
        raise SolverFailure(
            f"solver returned {sol.status}; KKT residuals stationarity {stat:.3e}, "
            f"feasibility {feas:.3e}, complementarity {compl:.3e}; partial results in {out}"
        )

    reference = resample_reference(sol, objective, cfg.dt_out_s)
    reference.write_csv(out / "reference.csv")
    knots = solution_metrics(sol, cfg.bounds)
    _write_metrics(out, "knot_metrics", knots)
    traj = simulate_closed_loop(reference, gains, initial_output_state(objective))
    sim = compute_metrics(traj, objective, cfg.bounds)
    _write_metrics(out, "metrics", sim)
    print(f"optimized knots: {knots.summary()}")
    print(f"closed-loop simulation: {sim.summary()}")

    if cfg.plots and not args.no_plots:
        from .plots import plot_deviation, plot_inputs, plot_overlay

        plot_overlay(objective, global_output(sol, objective), sol.gamma_global(objective), out / "overlay.svg", traj)
        plot_deviation(sol, cfg.bounds.tol, cfg.bounds.relax_count, out / "deviation.svg")
        plot_inputs(sol, cfg.bounds.u_max, out / "inputs.svg")
    wall = time.perf_counter() - t0
    write_manifest(out, "optimize", args.argv, chash, wall, {"status": sol.status, "kkt": kkt})
    print(f"wall time {wall:.2f} s; wrote {out}")
    return EXIT_OK


def _gain_items(g: ControllerGains):
    return (("kp_x", g.kp_x), ("kp_y", g.kp_y), ("kd_x", g.kd_x), ("kd_y", g.kd_y))


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config, args.set)
    tols = args.tolerances_m or list(cfg.sweep_tolerances_m)
    if len(tols) < 2:
        raise InvalidInputError("a sweep needs at least two tolerances")
    for t in tols:
        if not t > 0:
            raise InvalidInputError(f"tolerances must be > 0, got {t}")
    objective = cfg.contour.build()
    gains, _ = cfg.gains.resolve()
    out = run_directory("sweep", cfg.name, args.out_dir)
    rows, solutions = tolerance_sweep(
        objective, gains, cfg.weights, cfg.bounds, tols, cfg.solver, warm_start=not args.parallel
    )
    write_sweep_table(rows, out / "sweep.csv")
    table = format_sweep_table(rows)
    (out / "sweep.txt").write_text(table + "\n")
    for tol, sol in solutions.items():
        if sol is not None:
            save_solution(sol, out / f"solution_tol_{tol * 1e6:g}um.json", cfg.hash())
    if cfg.plots and not args.no_plots:
        from .plots import plot_sweep

        plot_sweep(rows, out / "sweep.svg")
    print(table)
    wall = time.perf_counter() - t0
    write_manifest(out, "sweep", args.argv, cfg.hash(), wall, {"statuses": [r.status for r in rows]})
    print(f"wall time {wall:.2f} s; wrote {out}")
    return EXIT_OK if all(r.status in ("optimal", "feasible-suboptimal") for r in rows) else EXIT_SOLVER


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    reference = ReferenceFile.read_csv(args.reference)
    gains = read_gains(args.gains)
    objective = _companion_objective(args.objective, args.reference)
    out = run_directory("simulate", Path(args.reference).stem, args.out_dir)
    if objective is not None:
        start = initial_output_state(objective)
    else:
        start = reference.states()[0].copy()
        start[1] = 0.0
    traj = simulate_closed_loop(reference, gains, start)
    cols = np.column_stack([traj.t, traj.states[:, 0, :2], traj.states[:, 1, :2], traj.inputs])
    np.savetxt(out / "trajectory.csv", cols, delimiter=",", fmt="%.14e", header="t,ox,oy,ovx,ovy,ux,uy", comments="")
    if objective is not None:
        report = compute_metrics(traj, objective, BoundSet(tol=args.tol_m, relax_count=args.relax_count))
        _write_metrics(out, "metrics", report)
        print(report.summary())
    else:
        log.warning("no objective given or found next to the reference; metrics skipped")
    hashes = _sha256(Path(args.reference)) + _sha256(Path(args.gains))
    write_manifest(out, "simulate", args.argv, hashlib.sha256(hashes.encode()).hexdigest(), time.perf_counter() - t0)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_synth_log(args) -> int:
    t0 = time.perf_counter()
    gains = _gains_from_args(args)
    if args.reference:
        reference = ReferenceFile.read_csv(args.reference)
        objective = _companion_objective(args.objective, args.reference)
    else:
        reference = sinusoid_reference(duration=args.duration_s, dt=args.dt_s)
        objective = _load_objective(args.objective) if args.objective else None
    if objective is not None:
        start = initial_output_state(objective)
    else:
        start = reference.states()[0].copy()
        start[1] = 0.0
    tracking = synth_log(reference, gains, start, noise_std=args.noise_m_per_s2, seed=args.seed)
    out = run_directory("synth-log", f"seed{args.seed}", args.out_dir)
    tracking.write_csv(out / "tracking_log.csv")
    key = json.dumps({"gains": gains.matrix.tolist(), "noise": args.noise_m_per_s2, "seed": args.seed,
                      "reference": _sha256(Path(args.reference)) if args.reference else "sinusoid"}, sort_keys=True)
    write_manifest(out, "synth-log", args.argv, hashlib.sha256(key.encode()).hexdigest(), time.perf_counter() - t0)
    print(f"{len(tracking)} samples; wrote {out / 'tracking_log.csv'}")
    return EXIT_OK


# parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contourref", description="Minimum-time contour reference generation for a PD-controlled stage.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out-dir", help=f"output directory (default: a new directory under ${OUTPUT_ROOT_ENV})")

    sp = sub.add_parser("fit", help="identify PD gains from a tracking log")
    sp.add_argument("log")
    common(sp)
    sp.set_defaults(func=cmd_fit)

    for name, func, helptext in (("optimize", cmd_optimize, "solve one configured problem"), ("sweep", cmd_sweep, "solve over several tolerances")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("config")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config field")
        sp.add_argument("--no-plots", action="store_true")
        common(sp)
        sp.set_defaults(func=func)
    sub.choices["sweep"].add_argument("--tolerances-m", type=float, nargs="+")
    sub.choices["sweep"].add_argument("--parallel", action="store_true", help="independent solves in parallel, no warm start")

    sp = sub.add_parser("simulate", help="play a reference file through the closed loop")
    sp.add_argument("reference")
    sp.add_argument("gains")
    sp.add_argument("--objective", help="objective CSV (default: objective.csv next to the reference; contour.csv beside it is used for errors)")
    sp.add_argument("--tol-m", type=float, default=20e-6)
    sp.add_argument("--relax-count", type=int, default=16)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("synth-log", help="generate a tracking log by noisy closed-loop simulation")
    sp.add_argument("--gains", help="key-value gains file")
    sp.add_argument("--kp", type=float, nargs=2, metavar=("X", "Y"))
    sp.add_argument("--kd", type=float, nargs=2, metavar=("X", "Y"))
    sp.add_argument("--reference", help="reference CSV (default: a two-axis sinusoid)")
    sp.add_argument("--objective")
    sp.add_argument("--noise-m-per-s2", type=float, default=0.01)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--duration-s", type=float, default=2.0)
    sp.add_argument("--dt-s", type=float, default=1e-4)
    common(sp)
    sp.set_defaults(func=cmd_synth_log)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    args.argv = ["contourref", *argv]
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (InvalidInputError, IdentifiabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
