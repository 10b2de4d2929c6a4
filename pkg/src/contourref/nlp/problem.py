"""Variable-timestep transcription of the minimum-time contouring problem.

Decision variables, all per contour index k = 0..N-1 and stored block-wise
(13 blocks of length N):

    xw, yw, vxw, vyw    output state in the local frame of point k
    xg, yg, vxg, vyg    reference state in the local frame of point k
    ux, uy              machine acceleration (global axes)
    vx, vy              virtual acceleration driving the reference (global axes)
    dt                  time from point k to point k+1

The solver works on scaled variables ``z = scale * x``; positions are
scaled so that 10 um maps to 1.  Residuals are scaled the same way so a
feasibility tolerance is comparable across constraint families.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..contour import Objective
from ..errors import InvalidInputError
from ..plant import ControllerGains

BLOCKS = ("xw", "yw", "vxw", "vyw", "xg", "yg", "vxg", "vyg", "ux", "uy", "vx", "vy", "dt")
BLOCK = {name: i for i, name in enumerate(BLOCKS)}

POS_SCALE = 1e5
VEL_SCALE = 1.0
ACC_SCALE = 0.5
TIME_SCALE = 1e2
OBJ_SCALE = 1e2
# y_w(0), initial and final output velocity, final reference offset from the output
N_BOUNDARY = 7

_KIND_SCALE = {"pos": POS_SCALE, "vel": VEL_SCALE, "acc": ACC_SCALE, "time": TIME_SCALE}
_BLOCK_KIND = {
    "xw": "pos", "yw": "pos", "vxw": "vel", "vyw": "vel",
    "xg": "pos", "yg": "pos", "vxg": "vel", "vyg": "vel",
    "ux": "acc", "uy": "acc", "vx": "acc", "vy": "acc", "dt": "time",
}


@dataclass(frozen=True)
class Weights:
    """Quadratic cost weights in unscaled SI units."""

    q_omega: np.ndarray = field(default_factory=lambda: np.diag([1e7, 1.0]))
    r_u: np.ndarray = field(default_factory=lambda: np.eye(2))
    q_gamma: np.ndarray = field(default_factory=lambda: np.diag([1e6, 1.0]))
    r_v: np.ndarray = field(default_factory=lambda: np.eye(2))
    time: float = 1e3  # cost per second of traversal (1 per millisecond)

    def __post_init__(self):
        if not (np.isfinite(self.time) and self.time > 0):
            raise InvalidInputError("time weight must be positive")
        object.__setattr__(self, "time", float(self.time))
        for name in ("q_omega", "r_u", "q_gamma", "r_v"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.shape != (2, 2):
                raise InvalidInputError(f"{name} must be 2x2, got shape {m.shape}")
            if not np.allclose(m, m.T) or np.any(np.diag(m) <= 0) or np.linalg.eigvalsh(m).min() <= 0:
                raise InvalidInputError(f"{name} must be symmetric positive definite")
            object.__setattr__(self, name, m)
        for name in ("q_omega", "q_gamma"):
            m = getattr(self, name)
            if m[0, 1] != 0:
                raise InvalidInputError(f"{name} must be diagonal")


@dataclass(frozen=True)
class BoundSet:
    u_max: float = 2.0  # m/s^2
    vel_max: float = 2.0  # m/s
    tol: float = 20e-6  # m
    relax_count: int = 16

    def __post_init__(self):
        if not (self.u_max > 0 and self.vel_max > 0 and self.tol > 0):
            raise InvalidInputError("u_max, vel_max and tol must be positive")
        if int(self.relax_count) != self.relax_count or self.relax_count < 0:
            raise InvalidInputError("relax_count must be a non-negative integer")

    def replace(self, **kw) -> "BoundSet":
        d = dict(u_max=self.u_max, vel_max=self.vel_max, tol=self.tol, relax_count=self.relax_count)
        d.update(kw)
        return BoundSet(**d)


@dataclass(frozen=True)
class SolverConfig:
    feasibility_tol: float = 1e-8
    optimality_tol: float = 1e-6
    max_iterations: int = 3000
    dt_min: float = 1e-5
    dt_max: float = 1e-1
    initial_speed_guess: float = 0.05
    print_level: int = 0

    def __post_init__(self):
        if not (self.feasibility_tol > 0 and self.optimality_tol > 0):
            raise InvalidInputError("tolerances must be positive")
        if not 0 < self.dt_min < self.dt_max:
            raise InvalidInputError("need 0 < dt_min < dt_max")
        if self.max_iterations < 1 or self.initial_speed_guess <= 0:
            raise InvalidInputError("max_iterations and initial_speed_guess must be positive")


@dataclass
class NlpProblem:
    objective: Objective
    gains: ControllerGains
    weights: Weights
    bounds: BoundSet
    config: SolverConfig
    x_scale: np.ndarray
    g_scale: np.ndarray
    lbz: np.ndarray  # scaled variable bounds
    ubz: np.ndarray
    lbg: np.ndarray  # scaled constraint bounds
    ubg: np.ndarray
    constrained: np.ndarray  # indices k where the tolerance band and velocity limits apply
    g_slices: dict = field(default_factory=dict)
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.objective)

    @property
    def n_var(self) -> int:
        return len(BLOCKS) * self.n

    @property
    def n_con(self) -> int:
        return len(self.g_scale)

    @property
    def cos(self) -> np.ndarray:
        return np.cos(self.objective.alpha)

    @property
    def sin(self) -> np.ndarray:
        return np.sin(self.objective.alpha)

    def idx(self, block: str, k=slice(None)):
        base = BLOCK[block] * self.n
        return np.arange(base, base + self.n)[k]

    def equality_mask(self) -> np.ndarray:
        return self.lbg == self.ubg

    # numpy evaluation in unscaled variables -------------------------------

    def unpack(self, x: np.ndarray) -> dict:
        return {name: x[i * self.n:(i + 1) * self.n] for i, name in enumerate(BLOCKS)}

    def constraints(self, x: np.ndarray) -> np.ndarray:
        """Unscaled constraint values."""
        return np.concatenate(constraint_blocks(self.unpack(x), self._consts(np), self.bounds, self.n, self.constrained, np))

    def cost(self, x: np.ndarray) -> float:
        return float(cost_expr(self.unpack(x), self.weights, self.n, np))

    def scaled_constraints(self, z: np.ndarray) -> np.ndarray:
        return self.g_scale * self.constraints(z / self.x_scale)

    def scaled_cost(self, z: np.ndarray) -> float:
        return OBJ_SCALE * self.cost(z / self.x_scale)

    def _consts(self, backend):
        c, s = self.cos, self.sin
        ox, oy = self.objective.xy[:, 0], self.objective.xy[:, 1]
        return {"c": c, "s": s, "ox": ox, "oy": oy, "kp": self.gains.kp, "kd": self.gains.kd}

    # analytic derivatives ------------------------------------------------

    def cost_gradient(self, x: np.ndarray) -> np.ndarray:
        return cost_gradient(self.unpack(x), self.weights, self.n)

    def constraint_jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        return constraint_jacobian(self, x)

    def scaled_cost_gradient(self, z: np.ndarray) -> np.ndarray:
        return OBJ_SCALE * self.cost_gradient(z / self.x_scale) / self.x_scale

    def scaled_constraint_jacobian(self, z: np.ndarray) -> sp.csr_matrix:
        J = self.constraint_jacobian(z / self.x_scale)
        return (sp.diags(self.g_scale) @ J @ sp.diags(1.0 / self.x_scale)).tocsr()


def _chain_residuals(X, Y, VX, VY, UX, UY, d, C, n, cat):
    """Local-frame one-step residuals for one double-integrator chain, k = 0..N-2."""
    a, b = slice(0, n - 1), slice(1, n)
    c0, s0, c1, s1 = C["c"][a], C["s"][a], C["c"][b], C["s"][b]
    ox0, oy0, ox1, oy1 = C["ox"][a], C["oy"][a], C["ox"][b], C["oy"][b]
    x, y, vx, vy = X[0:n - 1], Y[0:n - 1], VX[0:n - 1], VY[0:n - 1]
    ux, uy, dt = UX[0:n - 1], UY[0:n - 1], d[0:n - 1]
    h = 0.5 * dt * dt
    # global position after the step, relative to the next frame origin
    P = x * c0 - y * s0 + ox0 - ox1 + dt * (vx * c0 - vy * s0) + h * ux
    Q = x * s0 + y * c0 + oy0 - oy1 + dt * (vx * s0 + vy * c0) + h * uy
    V = vx * c0 - vy * s0 + dt * ux
    W = vx * s0 + vy * c0 + dt * uy
    return [
        c1 * P + s1 * Q - X[1:n],
        -s1 * P + c1 * Q - Y[1:n],
        c1 * V + s1 * W - VX[1:n],
        -s1 * V + c1 * W - VY[1:n],
    ]


def constraint_blocks(V, C, bounds, n, constrained, backend):
    """All constraint residuals in a fixed order; works with numpy or casadi arrays."""
    out = []
    out += _chain_residuals(V["xw"], V["yw"], V["vxw"], V["vyw"], V["ux"], V["uy"], V["dt"], C, n, backend)
    out += _chain_residuals(V["xg"], V["yg"], V["vxg"], V["vyg"], V["vx"], V["vy"], V["dt"], C, n, backend)
    a = slice(0, n - 1)
    c0, s0 = C["c"][a], C["s"][a]
    ex_l = V["xg"][0:n - 1] - V["xw"][0:n - 1]
    ey_l = V["yg"][0:n - 1] - V["yw"][0:n - 1]
    evx_l = V["vxg"][0:n - 1] - V["vxw"][0:n - 1]
    evy_l = V["vyg"][0:n - 1] - V["vyw"][0:n - 1]
    kp, kd = C["kp"], C["kd"]
    out.append(kp[0] * (ex_l * c0 - ey_l * s0) + kd[0] * (evx_l * c0 - evy_l * s0) - V["ux"][1:n])
    out.append(kp[1] * (ex_l * s0 + ey_l * c0) + kd[1] * (evx_l * s0 + evy_l * c0) - V["uy"][1:n])
    out.append(V["xw"][0:n])
    out.append(_stack([
        V["yw"][0], V["vxw"][0], V["vyw"][0], V["vxw"][n - 1], V["vyw"][n - 1],
        V["xg"][n - 1] - V["xw"][n - 1], V["yg"][n - 1] - V["yw"][n - 1],
    ], backend))
    ci = constrained
    cc, sc = C["c"][ci], C["s"][ci]
    vxw, vyw = _take(V["vxw"], ci, backend), _take(V["vyw"], ci, backend)
    out.append(vxw * cc - vyw * sc)
    out.append(vxw * sc + vyw * cc)
    return out


def _stack(items, backend):
    if backend is np:
        return np.array(items, dtype=float)
    return backend.vertcat(*items)


def _take(vec, idx, backend):
    if backend is np:
        return vec[idx]
    return vec[[int(i) for i in idx]]


def cost_expr(V, W: Weights, n, backend):
    def quad(Q, p, v):
        q00, q01, q11 = float(Q[0, 0]), float(Q[0, 1]), float(Q[1, 1])
        return q00 * p * p + 2 * q01 * p * v + q11 * v * v

    rquad = quad

    total = W.time * _sum(V["dt"], backend)
    total = total + _sum(quad(W.q_omega, V["xw"], V["vxw"]) + quad(W.q_omega, V["yw"], V["vyw"]), backend)
    total = total + _sum(rquad(W.r_u, V["ux"][0:n - 1], V["uy"][0:n - 1]), backend)
    g = slice(0, n - 1)
    total = total + _sum(quad(W.q_gamma, V["xg"][g], V["vxg"][g]) + quad(W.q_gamma, V["yg"][g], V["vyg"][g]), backend)
    total = total + _sum(rquad(W.r_v, V["vx"][0:n - 2], V["vy"][0:n - 2]), backend)
    return total


def _sum(x, backend):
    return np.sum(x) if backend is np else backend.sum1(x)


def cost_gradient(V, W: Weights, n) -> np.ndarray:
    G = {name: np.zeros(n) for name in BLOCKS}
    G["dt"][:] = W.time
    Qw, Qg, Ru, Rv = W.q_omega, W.q_gamma, W.r_u, W.r_v
    for p, v in (("xw", "vxw"), ("yw", "vyw")):
        G[p] += 2 * Qw[0, 0] * V[p] + 2 * Qw[0, 1] * V[v]
        G[v] += 2 * Qw[1, 1] * V[v] + 2 * Qw[0, 1] * V[p]
    g = slice(0, n - 1)
    for p, v in (("xg", "vxg"), ("yg", "vyg")):
        G[p][g] += 2 * Qg[0, 0] * V[p][g] + 2 * Qg[0, 1] * V[v][g]
        G[v][g] += 2 * Qg[1, 1] * V[v][g] + 2 * Qg[0, 1] * V[p][g]
    for (a, b), R, m in ((("ux", "uy"), Ru, n - 1), (("vx", "vy"), Rv, n - 2)):
        s = slice(0, m)
        G[a][s] += 2 * R[0, 0] * V[a][s] + 2 * R[0, 1] * V[b][s]
        G[b][s] += 2 * R[1, 1] * V[b][s] + 2 * R[0, 1] * V[a][s]
    return np.concatenate([G[name] for name in BLOCKS])


def _chain_jacobian(prob: NlpProblem, V, names, row0, rows, cols, vals):
    """Triplets for the four residual families of one chain, hand-differentiated."""
    n = prob.n
    X, Y, VX, VY, UX, UY = names
    k = np.arange(n - 1)
    c, s = prob.cos, prob.sin
    c0, s0, c1, s1 = c[:-1], s[:-1], c[1:], s[1:]
    vx, vy = V[VX][:-1], V[VY][:-1]
    ux, uy, d = V[UX][:-1], V[UY][:-1], V["dt"][:-1]
    h = 0.5 * d * d
    dP = {X: c0, Y: -s0, VX: d * c0, VY: -d * s0, UX: h, "dt": vx * c0 - vy * s0 + d * ux}
    dQ = {X: s0, Y: c0, VX: d * s0, VY: d * c0, UY: h, "dt": vx * s0 + vy * c0 + d * uy}
    dV = {VX: c0, VY: -s0, UX: d, "dt": ux}
    dW = {VX: s0, VY: c0, UY: d, "dt": uy}

    def combine(wa, A, wb, B):
        out = {}
        for key in set(A) | set(B):
            out[key] = wa * A.get(key, 0.0) + wb * B.get(key, 0.0)
        return out

    fams = [
        (combine(c1, dP, s1, dQ), X),
        (combine(-s1, dP, c1, dQ), Y),
        (combine(c1, dV, s1, dW), VX),
        (combine(-s1, dV, c1, dW), VY),
    ]
    for f, (deriv, nxt) in enumerate(fams):
        r = row0 + f * (n - 1) + k
        for key in sorted(deriv):
            rows.append(r)
            cols.append(prob.idx(key)[:-1])
            vals.append(np.broadcast_to(deriv[key], k.shape))
        rows.append(r)
        cols.append(prob.idx(nxt)[1:])
        vals.append(-np.ones(n - 1))


def constraint_jacobian(prob: NlpProblem, x: np.ndarray) -> sp.csr_matrix:
    n = prob.n
    V = prob.unpack(x)
    rows, cols, vals = [], [], []
    _chain_jacobian(prob, V, ("xw", "yw", "vxw", "vyw", "ux", "uy"), 0, rows, cols, vals)
    _chain_jacobian(prob, V, ("xg", "yg", "vxg", "vyg", "vx", "vy"), 4 * (n - 1), rows, cols, vals)
    row = 8 * (n - 1)
    k = np.arange(n - 1)
    c0, s0 = prob.cos[:-1], prob.sin[:-1]
    kp, kd = prob.gains.kp, prob.gains.kd
    # control law, x then y
    for ax, (pc, ps, vc, vs) in enumerate(((c0, -s0, c0, -s0), (s0, c0, s0, c0))):
        r = row + ax * (n - 1) + k
        for name, coeff in (("xg", kp[ax] * pc), ("yg", kp[ax] * ps), ("vxg", kd[ax] * vc), ("vyg", kd[ax] * vs)):
            rows.append(r)
            cols.append(prob.idx(name)[:-1])
            vals.append(coeff)
        for name, coeff in (("xw", -kp[ax] * pc), ("yw", -kp[ax] * ps), ("vxw", -kd[ax] * vc), ("vyw", -kd[ax] * vs)):
            rows.append(r)
            cols.append(prob.idx(name)[:-1])
            vals.append(coeff)
        rows.append(r)
        cols.append(prob.idx("ux" if ax == 0 else "uy")[1:])
        vals.append(-np.ones(n - 1))
    row += 2 * (n - 1)
    rows.append(row + np.arange(n))
    cols.append(prob.idx("xw"))
    vals.append(np.ones(n))
    row += n
    for i, (name, kk) in enumerate((("yw", 0), ("vxw", 0), ("vyw", 0), ("vxw", n - 1), ("vyw", n - 1))):
        rows.append(np.array([row + i]))
        cols.append(np.array([prob.idx(name)[kk]]))
        vals.append(np.array([1.0]))
    for i, ax in enumerate("xy"):
        rows.append(np.array([row + 5 + i, row + 5 + i]))
        cols.append(np.array([prob.idx(f"{ax}g")[n - 1], prob.idx(f"{ax}w")[n - 1]]))
        vals.append(np.array([1.0, -1.0]))
    row += N_BOUNDARY
    ci = prob.constrained
    m = len(ci)
    cc, sc = prob.cos[ci], prob.sin[ci]
    for i, (a, b) in enumerate(((cc, -sc), (sc, cc))):
        r = row + i * m + np.arange(m)
        rows += [r, r]
        cols += [prob.idx("vxw")[ci], prob.idx("vyw")[ci]]
        vals += [a, b]
    J = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(prob.n_con, prob.n_var),
    )
    return J.tocsr()


def build_nlp(
    objective: Objective,
    gains: ControllerGains,
    weights: Weights | None = None,
    bounds: BoundSet | None = None,
    config: SolverConfig | None = None,
) -> NlpProblem:
    weights = weights or Weights()
    bounds = bounds or BoundSet()
    config = config or SolverConfig()
    n = len(objective)
    if objective.xy.shape != (n, 2) or objective.alpha.shape != (n,):
        raise InvalidInputError("objective arrays have inconsistent shapes")
    if bounds.relax_count >= n:
        raise InvalidInputError(f"relax_count={bounds.relax_count} must be below N={n}")
    if n < 4:
        raise InvalidInputError("the NLP needs at least 4 contour points")

    x_scale = np.concatenate([np.full(n, _KIND_SCALE[_BLOCK_KIND[b]]) for b in BLOCKS])
    lbx = np.full(len(BLOCKS) * n, -np.inf)
    ubx = np.full(len(BLOCKS) * n, np.inf)

    def set_bounds(block, lo, hi, k=slice(None)):
        base = BLOCK[block] * n
        sl = np.arange(base, base + n)[k]
        lbx[sl], ubx[sl] = lo, hi

    constrained = np.arange(int(bounds.relax_count), n)
    set_bounds("yw", -bounds.tol, bounds.tol, constrained)
    set_bounds("ux", -bounds.u_max, bounds.u_max)
    set_bounds("uy", -bounds.u_max, bounds.u_max)
    set_bounds("dt", config.dt_min, config.dt_max)
    # v(N-2) is unpenalized; it brings the reference to rest at the last knot.
    # v(N-1) drives nothing and is fixed.
    set_bounds("vxg", 0.0, 0.0, [n - 1])
    set_bounds("vyg", 0.0, 0.0, [n - 1])
    set_bounds("vx", 0.0, 0.0, [n - 1])
    set_bounds("vy", 0.0, 0.0, [n - 1])

    m = n - 1
    sizes = [
        ("omega_dyn", 4 * m, [POS_SCALE] * 2 + [VEL_SCALE] * 2),
        ("gamma_dyn", 4 * m, [POS_SCALE] * 2 + [VEL_SCALE] * 2),
        ("control", 2 * m, [ACC_SCALE] * 2),
        ("perpendicular", n, [POS_SCALE]),
        ("boundary", N_BOUNDARY, None),
        ("velocity", 2 * len(constrained), [VEL_SCALE]),
    ]
    g_scale, lbg, ubg, slices = [], [], [], {}
    start = 0
    for name, size, fam_scales in sizes:
        slices[name] = slice(start, start + size)
        start += size
        if name == "boundary":
            g_scale.append(np.array([POS_SCALE] + [VEL_SCALE] * 4 + [POS_SCALE] * 2))
        else:
            per = size // len(fam_scales)
            g_scale.append(np.repeat(fam_scales, per))
        if name == "velocity":
            lbg.append(np.full(size, -bounds.vel_max))
            ubg.append(np.full(size, bounds.vel_max))
        else:
            lbg.append(np.zeros(size))
            ubg.append(np.zeros(size))
    g_scale = np.concatenate(g_scale)
    return NlpProblem(
        objective=objective,
        gains=gains,
        weights=weights,
        bounds=bounds,
        config=config,
        x_scale=x_scale,
        g_scale=g_scale,
        lbz=lbx * x_scale,
        ubz=ubx * x_scale,
        lbg=np.concatenate(lbg) * g_scale,
        ubg=np.concatenate(ubg) * g_scale,
        constrained=constrained,
        g_slices=slices,
    )
