from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..frames import frames_of, to_global
from .problem import BLOCKS, NlpProblem

STATUSES = ("optimal", "feasible-suboptimal", "infeasible", "iteration-limit")


@dataclass
class NlpSolution:
    omega_local: np.ndarray  # (N, 2, 3)
    gamma_local: np.ndarray  # (N, 2, 3)
    u: np.ndarray  # (N, 2) global acceleration
    v: np.ndarray  # (N, 2) global virtual acceleration
    dt: np.ndarray  # (N,)
    status: str = "feasible-suboptimal"
    objective_value: float = float("nan")
    max_constraint_violation: float = float("nan")
    lam_g: np.ndarray | None = None  # scaled multipliers, solver sign convention
    lam_x: np.ndarray | None = None
    iterations: int = 0
    solver_message: str = ""
    wall_time: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    @property
    def n(self) -> int:
        return len(self.dt)

    @property
    def time(self) -> np.ndarray:
        """Knot times t(k), starting at zero."""
        return np.concatenate([[0.0], np.cumsum(self.dt[:-1])])

    @property
    def traversal_time(self) -> float:
        return float(np.sum(self.dt[:-1]))

    @property
    def deviation(self) -> np.ndarray:
        """Signed perpendicular deviation of the output at each contour point."""
        return self.omega_local[:, 0, 1]

    @property
    def tangential_speed(self) -> np.ndarray:
        return np.hypot(self.omega_local[:, 1, 0], self.omega_local[:, 1, 1])

    def is_feasible(self) -> bool:
        return self.status in ("optimal", "feasible-suboptimal")

    def omega_global(self, problem_or_objective) -> np.ndarray:
        return to_global(self.omega_local, _frames(problem_or_objective))

    def gamma_global(self, problem_or_objective) -> np.ndarray:
        return to_global(self.gamma_local, _frames(problem_or_objective))

    def to_vector(self) -> np.ndarray:
        """Unscaled decision vector in block order."""
        w, g = self.omega_local, self.gamma_local
        blocks = [
            w[:, 0, 0], w[:, 0, 1], w[:, 1, 0], w[:, 1, 1],
            g[:, 0, 0], g[:, 0, 1], g[:, 1, 0], g[:, 1, 1],
            self.u[:, 0], self.u[:, 1], self.v[:, 0], self.v[:, 1], self.dt,
        ]
        return np.concatenate(blocks).astype(float)

    @classmethod
    def from_vector(cls, x: np.ndarray, n: int, **kw) -> "NlpSolution":
        V = {name: np.array(x[i * n:(i + 1) * n], dtype=float) for i, name in enumerate(BLOCKS)}

        def states(px, py, vx, vy):
            s = np.zeros((n, 2, 3))
            s[:, 0, 0], s[:, 0, 1], s[:, 0, 2] = px, py, 1.0
            s[:, 1, 0], s[:, 1, 1] = vx, vy
            return s

        return cls(
            omega_local=states(V["xw"], V["yw"], V["vxw"], V["vyw"]),
            gamma_local=states(V["xg"], V["yg"], V["vxg"], V["vyg"]),
            u=np.column_stack([V["ux"], V["uy"]]),
            v=np.column_stack([V["vx"], V["vy"]]),
            dt=V["dt"],
            **kw,
        )


def _frames(obj):
    objective = obj.objective if isinstance(obj, NlpProblem) else obj
    return frames_of(objective.xy, objective.alpha)
