"""Per-point local frames and the 2x3 homogeneous state matrix.

A state is the row-stacked matrix::

    [[px, py, 1],
     [vx, vy, 0]]

Right-multiplying by a 3x3 frame transform rotates both rows and
translates only the position row, because the velocity row's homogeneous
entry is zero.
"""
from __future__ import annotations

import numpy as np


def state_matrix(px, py, vx=0.0, vy=0.0) -> np.ndarray:
    return np.array([[px, py, 1.0], [vx, vy, 0.0]], dtype=float)


def position(state: np.ndarray) -> np.ndarray:
    return state[..., 0, :2]


def velocity(state: np.ndarray) -> np.ndarray:
    return state[..., 1, :2]


def frame_of(point) -> np.ndarray:
    """Global-from-local transform for a contour point (anything with x_xi, y_xi, alpha)."""
    return frame_at(point.x_xi, point.y_xi, point.alpha)


def frame_at(x_xi: float, y_xi: float, alpha: float) -> np.ndarray:
    """Origin at (x_xi, y_xi), x-axis along the tangent angle ``alpha``."""
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [x_xi, y_xi, 1.0]])


def frames_of(xy: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Vectorized :func:`frame_at`, shape (N, 3, 3)."""
    n = len(alpha)
    T = np.zeros((n, 3, 3))
    c, s = np.cos(alpha), np.sin(alpha)
    T[:, 0, 0], T[:, 0, 1] = c, s
    T[:, 1, 0], T[:, 1, 1] = -s, c
    T[:, 2, :2] = xy
    T[:, 2, 2] = 1.0
    return T


def invert_frame(frame: np.ndarray) -> np.ndarray:
    """Closed-form inverse: transposed rotation, back-rotated negated translation."""
    R = frame[..., :2, :2]
    o = frame[..., 2, :2]
    inv = np.zeros_like(frame)
    Rt = np.swapaxes(R, -1, -2)
    inv[..., :2, :2] = Rt
    inv[..., 2, :2] = -np.einsum("...i,...ij->...j", o, Rt)
    inv[..., 2, 2] = 1.0
    return inv


def to_global(state_local: np.ndarray, frame: np.ndarray) -> np.ndarray:
    out = state_local @ frame
    out[..., 0, 2] = 1.0
    out[..., 1, 2] = 0.0
    return out


def to_local(state_global: np.ndarray, frame: np.ndarray) -> np.ndarray:
    out = state_global @ invert_frame(frame)
    out[..., 0, 2] = 1.0
    out[..., 1, 2] = 0.0
    return out
