"""Initial guess, IPOPT solve through CasADi, and KKT certificate."""
from __future__ import annotations

import logging
import time

import casadi as ca
import numpy as np

from ..contour import Objective
from .problem import BLOCKS, OBJ_SCALE, NlpProblem, SolverConfig, constraint_blocks, cost_expr
from .solution import NlpSolution

log = logging.getLogger(__name__)

_IPOPT_STATUS = {
    "Solve_Succeeded": "optimal",
    "Solved_To_Acceptable_Level": "feasible-suboptimal",
    "Feasible_Point_Found": "feasible-suboptimal",
    "Infeasible_Problem_Detected": "infeasible",
    "Restoration_Failed": "infeasible",
    "Maximum_Iterations_Exceeded": "iteration-limit",
    "Maximum_CpuTime_Exceeded": "iteration-limit",
}


def initial_guess(objective: Objective, config: SolverConfig | None = None, relax_count: int = 16) -> NlpSolution:
    """Output and reference placed on the contour, moving tangentially.

    Speed is ``config.initial_speed_guess``, ramped linearly from and to
    zero over ``relax_count`` points at either end; accelerations come
    from differencing the global velocities.
    """
    config = config or SolverConfig()
    n = len(objective)
    speed = np.full(n, config.initial_speed_guess)
    ramp = max(int(relax_count), 1)
    k = np.arange(n)
    speed = speed * np.clip(np.minimum(k, n - 1 - k) / ramp, 0.0, 1.0)
    dt = np.full(n, np.clip(objective.delta_s / config.initial_speed_guess, config.dt_min, config.dt_max))

    c, s = np.cos(objective.alpha), np.sin(objective.alpha)
    vel_g = speed[:, None] * np.column_stack([c, s])
    u = np.zeros((n, 2))
    u[:-1] = np.diff(vel_g, axis=0) / dt[:-1, None]

    state = np.zeros((n, 2, 3))
    state[:, 0, 2] = 1.0
    state[:, 1, 0] = speed
    v = u.copy()
    v[-1] = 0.0
    return NlpSolution(
        omega_local=state,
        gamma_local=state.copy(),
        u=u,
        v=v,
        dt=dt,
        status="feasible-suboptimal",
    )


def _casadi_solver(problem: NlpProblem):
    cached = problem.cache.get("casadi")
    if cached is not None:
        return cached
    n = problem.n
    z = ca.SX.sym("z", problem.n_var)
    x = z / ca.DM(problem.x_scale)
    V = {name: x[i * n:(i + 1) * n] for i, name in enumerate(BLOCKS)}
    C = {
        "c": ca.DM(problem.cos), "s": ca.DM(problem.sin),
        "ox": ca.DM(problem.objective.xy[:, 0]), "oy": ca.DM(problem.objective.xy[:, 1]),
        "kp": [float(v) for v in problem.gains.kp], "kd": [float(v) for v in problem.gains.kd],
    }
    g = ca.vertcat(*constraint_blocks(V, C, problem.bounds, n, problem.constrained, ca)) * ca.DM(problem.g_scale)
    f = OBJ_SCALE * cost_expr(V, problem.weights, n, ca)
    cfg = problem.config
    opts = {
        "print_time": False,
        "ipopt.print_level": int(cfg.print_level),
        "ipopt.sb": "yes",
        "ipopt.max_iter": int(cfg.max_iterations),
        "ipopt.tol": 0.1 * cfg.optimality_tol,
        "ipopt.dual_inf_tol": 0.1 * cfg.optimality_tol,
        "ipopt.compl_inf_tol": 0.1 * cfg.optimality_tol,
        "ipopt.constr_viol_tol": 0.1 * cfg.feasibility_tol,
        "ipopt.acceptable_tol": 1e-5,
        "ipopt.acceptable_constr_viol_tol": cfg.feasibility_tol,
        "ipopt.nlp_scaling_method": "none",
        "ipopt.linear_solver": "mumps",
        "ipopt.mu_strategy": "adaptive",
        "ipopt.hessian_approximation": "exact",
        "ipopt.bound_relax_factor": 0.0,
        "ipopt.honor_original_bounds": "yes",
    }
    solver = ca.nlpsol("contour_nlp", "ipopt", {"x": z, "f": f, "g": g}, opts)
    problem.cache["casadi"] = solver
    return solver


def solve(problem: NlpProblem, guess: NlpSolution, config: SolverConfig | None = None, warm_start: bool = False) -> NlpSolution:
    """Solve the NLP from ``guess``.

    The returned status is the solver's verdict, downgraded when the
    independent KKT check does not confirm it.
    """
    if config is not None and config != problem.config:
        problem = _with_config(problem, config)
    cfg = problem.config
    solver = _casadi_solver(problem)
    z0 = guess.to_vector() * problem.x_scale
    args = dict(x0=z0, lbx=problem.lbz, ubx=problem.ubz, lbg=problem.lbg, ubg=problem.ubg)
    if warm_start and guess.lam_g is not None and guess.lam_x is not None:
        args.update(lam_g0=guess.lam_g, lam_x0=guess.lam_x)
    t0 = time.perf_counter()
    res = solver(**args)
    wall = time.perf_counter() - t0
    stats = solver.stats()
    message = stats.get("return_status", "unknown")
    status = _IPOPT_STATUS.get(message, "infeasible")
    z = np.array(res["x"]).ravel()
    sol = NlpSolution.from_vector(
        z / problem.x_scale,
        problem.n,
        status=status,
        objective_value=problem.cost(z / problem.x_scale),
        lam_g=np.array(res["lam_g"]).ravel(),
        lam_x=np.array(res["lam_x"]).ravel(),
        iterations=int(stats.get("iter_count", 0)),
        solver_message=message,
        wall_time=wall,
    )
    stat, feas, compl = kkt_residuals(problem, sol)
    sol.max_constraint_violation = feas
    if sol.status == "optimal" and not (stat <= cfg.optimality_tol and feas <= cfg.feasibility_tol and compl <= cfg.optimality_tol):
        log.warning("KKT check rejects solver optimum: stat=%.2e feas=%.2e compl=%.2e", stat, feas, compl)
        sol.status = "feasible-suboptimal"
    if sol.status == "feasible-suboptimal" and feas > cfg.feasibility_tol * 100:
        sol.status = "infeasible"
    log.info("solve: %s (%s) in %d iterations, %.2f s, T=%.4f s", sol.status, message, sol.iterations, wall, sol.traversal_time)
    return sol


def _with_config(problem: NlpProblem, config: SolverConfig) -> NlpProblem:
    from .problem import build_nlp

    return build_nlp(problem.objective, problem.gains, problem.weights, problem.bounds, config)


def kkt_residuals(problem: NlpProblem, point: NlpSolution) -> tuple[float, float, float]:
    """Max-norm stationarity, feasibility and complementarity in scaled units.

    Derivatives come from the hand-written numpy Jacobian, independent of
    the solver's automatic differentiation. Missing multipliers are taken
    as zero. Stationarity and complementarity are divided by IPOPT-style
    multiplier-size factors (``s_max = 100``).
    """
    x = point.to_vector()
    if len(x) != problem.n_var:
        raise ValueError("point and problem dimensions differ")
    z = x * problem.x_scale
    m, nv = problem.n_con, problem.n_var
    lam_g = np.zeros(m) if point.lam_g is None else np.asarray(point.lam_g, dtype=float)
    lam_x = np.zeros(nv) if point.lam_x is None else np.asarray(point.lam_x, dtype=float)

    grad = problem.scaled_cost_gradient(z)
    J = problem.scaled_constraint_jacobian(z)
    s_max = 100.0
    s_d = max(s_max, (np.abs(lam_g).sum() + np.abs(lam_x).sum()) / (m + nv)) / s_max
    s_c = max(s_max, np.abs(lam_x).sum() / nv) / s_max
    stationarity = float(np.max(np.abs(grad + J.T @ lam_g + lam_x))) / s_d

    g = problem.scaled_constraints(z)
    viol_g = np.maximum(np.maximum(problem.lbg - g, g - problem.ubg), 0.0)
    viol_x = np.maximum(np.maximum(problem.lbz - z, z - problem.ubz), 0.0)
    feasibility = float(max(viol_g.max(initial=0.0), viol_x.max(initial=0.0)))

    compl = max(
        _complementarity(g, problem.lbg, problem.ubg, lam_g),
        _complementarity(z, problem.lbz, problem.ubz, lam_x),
    ) / s_c
    return stationarity, feasibility, float(compl)


def _complementarity(val, lo, hi, lam) -> float:
    free = lo != hi
    val, lo, hi, lam = val[free], lo[free], hi[free], lam[free]
    # a negative gap is a bound violation, already counted as infeasibility
    up = np.where(lam > 0, lam * np.where(np.isfinite(hi), np.maximum(hi - val, 0.0), 1.0), 0.0)
    dn = np.where(lam < 0, -lam * np.where(np.isfinite(lo), np.maximum(val - lo, 0.0), 1.0), 0.0)
    return float(np.max(np.abs(np.concatenate([up, dn])), initial=0.0))
