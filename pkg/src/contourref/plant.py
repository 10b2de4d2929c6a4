"""Double-integrator plant with zero-order-hold input and the per-axis PD law."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .frames import to_global, to_local


@dataclass(frozen=True)
class StepMatrices:
    A: np.ndarray
    B: np.ndarray
    dt: float


@dataclass(frozen=True)
class ControllerGains:
    """Per-axis PD gains; kp in 1/s^2, kd in 1/s."""

    kp_x: float
    kp_y: float
    kd_x: float
    kd_y: float

    def __post_init__(self):
        vals = (self.kp_x, self.kp_y, self.kd_x, self.kd_y)
        if not all(np.isfinite(vals)):
            raise InvalidInputError("gains must be finite")
        if min(vals) <= 0:
            warnings.warn("non-positive PD gain; closed loop may be unstable", stacklevel=2)

    @property
    def matrix(self) -> np.ndarray:
        """The 2x2 gain matrix, one column per axis: [[kp_x, kp_y], [kd_x, kd_y]]."""
        return np.array([[self.kp_x, self.kp_y], [self.kd_x, self.kd_y]])

    @property
    def kp(self) -> np.ndarray:
        return np.array([self.kp_x, self.kp_y])

    @property
    def kd(self) -> np.ndarray:
        return np.array([self.kd_x, self.kd_y])

    @classmethod
    def from_matrix(cls, lam) -> "ControllerGains":
        lam = np.asarray(lam, dtype=float)
        return cls(kp_x=lam[0, 0], kp_y=lam[0, 1], kd_x=lam[1, 0], kd_y=lam[1, 1])


def step_matrices(dt: float) -> StepMatrices:
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    A = np.array([[1.0, dt], [0.0, 1.0]])
    B = np.array([[0.5 * dt * dt], [dt]])
    return StepMatrices(A, B, float(dt))


def step_global(state: np.ndarray, u, dt: float) -> np.ndarray:
    """Advance a global 2x3 state by one ZOH step of acceleration ``u`` = (ux, uy)."""
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    u = np.asarray(u, dtype=float)[:2]
    out = np.array(state, dtype=float, copy=True)
    out[0, :2] = state[0, :2] + dt * state[1, :2] + 0.5 * dt * dt * u
    out[1, :2] = state[1, :2] + dt * u
    return out


def step_local(state_local_k: np.ndarray, u, dt: float, frame_k: np.ndarray, frame_k1: np.ndarray) -> np.ndarray:
    """One step written in local frames: state in frame k in, state in frame k+1 out."""
    m = step_matrices(dt)
    u_row = np.zeros(3)
    u_row[:2] = np.asarray(u, dtype=float)[:2]
    g = to_global(state_local_k, frame_k)
    nxt = m.A @ g + m.B @ u_row[None, :]
    return to_local(nxt, frame_k1)


def pd_input(gains: ControllerGains, reference_global: np.ndarray, output_global: np.ndarray) -> np.ndarray:
    """Commanded acceleration from the position and velocity error (reference minus output).

    In the closed loop this value is applied one step later than the error
    it is computed from.
    """
    e = np.asarray(reference_global)[..., :, :2] - np.asarray(output_global)[..., :, :2]
    return gains.kp * e[..., 0, :] + gains.kd * e[..., 1, :]


def closed_loop_spectral_radius(gains: ControllerGains, dt: float) -> float:
    """Largest closed-loop eigenvalue modulus of the sampled PD loop with one-step input delay.

    Per axis the state is (position error, velocity error, held input)
    for a constant reference; the loop is stable when the result is below 1.
    """
    m = step_matrices(dt)
    rho = 0.0
    for kp, kd in zip(gains.kp, gains.kd):
        A = np.zeros((3, 3))
        A[:2, :2] = m.A
        A[:2, 2] = m.B[:, 0]
        A[2, :2] = [-kp, -kd]
        rho = max(rho, float(np.abs(np.linalg.eigvals(A)).max()))
    return rho
