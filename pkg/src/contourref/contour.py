"""Target contours: polyline input, constant arc-length resampling and tangents.

Arc length is measured as cumulative chord length of the source polyline.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidInputError

MIN_VERTEX_GAP = 1e-12
DENSE_VERTICES = 4096


@dataclass(frozen=True)
class RawPath:
    vertices: np.ndarray  # (n, 2) meters
    closed: bool = False

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise InvalidInputError(f"vertices must have shape (n, 2), got {v.shape}")
        if len(v) < 2:
            raise InvalidInputError("a path needs at least 2 vertices")
        gaps = np.hypot(*np.diff(v, axis=0).T)
        if np.any(gaps <= MIN_VERTEX_GAP):
            i = int(np.argmax(gaps <= MIN_VERTEX_GAP))
            raise InvalidInputError(f"vertices {i} and {i + 1} coincide")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def polyline(self) -> np.ndarray:
        """Vertices with the first one repeated at the end for closed paths."""
        if self.closed:
            return np.vstack([self.vertices, self.vertices[:1]])
        return self.vertices

    def cumulative_length(self) -> np.ndarray:
        pts = self.polyline()
        return np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])

    @property
    def length(self) -> float:
        return float(self.cumulative_length()[-1])

    def reversed(self) -> "RawPath":
        return RawPath(self.vertices[::-1].copy(), self.closed)


@dataclass(frozen=True)
class ContourPoint:
    x_xi: float
    y_xi: float
    alpha: float


@dataclass(frozen=True)
class Objective:
    """N contour points at constant arc-length spacing ``delta_s``."""

    xy: np.ndarray  # (N, 2)
    alpha: np.ndarray  # (N,)
    delta_s: float
    source: RawPath | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if len(self.xy) < 3:
            raise InvalidInputError("an objective needs at least 3 points")
        if self.xy.shape != (len(self.alpha), 2):
            raise InvalidInputError("xy and alpha lengths differ")

    def __len__(self) -> int:
        return len(self.alpha)

    @property
    def points(self) -> list[ContourPoint]:
        return [ContourPoint(float(x), float(y), float(a)) for (x, y), a in zip(self.xy, self.alpha)]

    def reference_polyline(self) -> np.ndarray:
        """Dense polyline for error measurement; falls back to the samples."""
        if self.source is not None:
            return self.source.polyline()
        return self.xy


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return w if np.ndim(a) else float(w)


def resample_constant_arclength(path: RawPath, n_points: int) -> Objective:
    """Sample ``n_points`` positions along ``path`` with equal chord spacing.

    Successive samples are exactly ``delta_s`` apart in Euclidean distance
    (a divider walk along the polyline); ``delta_s`` is root-found so that
    the walk ends on the last vertex of an open path, or returns to the
    start of a closed one.
    """
    if n_points < 3:
        raise InvalidInputError("n_points must be at least 3")
    pts = path.polyline()
    cum = path.cumulative_length()
    total = cum[-1]
    if not total > 0:
        raise InvalidInputError("path has zero length")
    n_steps = n_points if path.closed else n_points - 1

    def overshoot(delta):
        return _divider_walk(pts, cum, delta, n_steps)[1] - total

    hi = total / n_steps
    lo = 0.5 * hi
    while overshoot(lo) >= 0:
        lo *= 0.5
    if overshoot(hi) < 0:
        # only possible for paths that fold back on themselves
        hi = total
    delta_s = brentq(overshoot, lo, hi, xtol=1e-15 * total, rtol=4 * np.finfo(float).eps, maxiter=200)
    xy, _ = _divider_walk(pts, cum, delta_s, n_steps)
    gap = float(np.hypot(*(xy[n_steps] - pts[-1])))
    if gap > 1e-6 * delta_s:
        raise InvalidInputError(
            f"cannot place {n_points} equally spaced points on this path (end missed by {gap:.3g} m); "
            "it likely folds back on itself"
        )
    xy = xy[:n_points]
    if not path.closed:
        xy[-1] = pts[-1]
    alpha = tangent_orientations(xy, closed=path.closed)
    return Objective(xy, alpha, float(delta_s), source=path)


def _divider_walk(pts, cum, delta, n_steps):
    """Step ``n_steps`` times along the polyline, each step a chord of length ``delta``.

    Returns the visited points and the arc position reached; walking off
    the end continues along the final segment direction.
    """
    a, b = pts[:-1], pts[1:]
    seg_len = np.diff(cum)
    out = np.empty((n_steps + 1, 2))
    out[0] = pts[0]
    p = pts[0].copy()
    seg, t = 0, 0.0
    nseg = len(a)
    for k in range(1, n_steps + 1):
        found = False
        lo = seg
        window = 8
        while not found and lo < nseg:
            hi_ = min(nseg, lo + window)
            d = b[lo:hi_] - a[lo:hi_]
            f = a[lo:hi_] - p
            qa = np.einsum("ij,ij->i", d, d)
            qb = 2 * np.einsum("ij,ij->i", f, d)
            qc = np.einsum("ij,ij->i", f, f) - delta * delta
            disc = qb * qb - 4 * qa * qc
            with np.errstate(invalid="ignore"):
                root = (-qb + np.sqrt(disc)) / (2 * qa)
            tmin = np.zeros(hi_ - lo)
            if lo == seg:
                tmin[0] = t
            ok = (disc >= 0) & (root >= tmin) & (root <= 1.0)
            if ok.any():
                j = int(np.argmax(ok))
                seg, t = lo + j, float(root[j])
                p = a[seg] + t * (b[seg] - a[seg])
                found = True
            else:
                lo = hi_
                window *= 4
        if not found:
            # off the end: extrapolate along the last segment
            u = (b[-1] - a[-1]) / seg_len[-1]
            f = pts[-1] - p
            proj = f @ u
            extra = -proj + np.sqrt(max(proj * proj - (f @ f - delta * delta), 0.0))
            p = pts[-1] + extra * u
            out[k] = p
            arc = cum[-1] + extra + (n_steps - k) * delta
            return out, arc
        out[k] = p
    return out, cum[seg] + t * seg_len[seg]


def tangent_orientations(points, closed: bool = False) -> np.ndarray:
    """Tangent angle at each point from central differences.

    Endpoints of open paths use one-sided differences. At a corner the
    central difference bisects the two adjacent segment directions.
    """
    p = np.asarray(points, dtype=float)
    if len(p) < 3:
        raise InvalidInputError("need at least 3 points")
    if closed:
        d = np.roll(p, -1, axis=0) - np.roll(p, 1, axis=0)
    else:
        d = np.empty_like(p)
        d[1:-1] = p[2:] - p[:-2]
        d[0] = p[1] - p[0]
        d[-1] = p[-1] - p[-2]
    return wrap_angle(np.arctan2(d[:, 1], d[:, 0]))


def make_smooth_spiral(
    r0: float,
    turns: float,
    pitch: float,
    n_vertices: int = DENSE_VERTICES,
    start_angle: float = -np.pi / 2,
) -> RawPath:
    """Archimedean spiral r(theta) = r0 + pitch * theta / 2pi, counterclockwise.

    ``theta`` is measured from ``start_angle``; the default starts below
    the center so the initial heading is close to +x.
    """
    if r0 <= 0 or turns <= 0:
        raise InvalidInputError("r0 and turns must be positive")
    n = max(int(n_vertices), DENSE_VERTICES)
    theta = np.linspace(0.0, 2 * np.pi * turns, n)
    r = r0 + pitch * theta / (2 * np.pi)
    phi = theta + start_angle
    return RawPath(np.column_stack([r * np.cos(phi), r * np.sin(phi)]))


def make_sharp_spiral(r0: float, steps: int, increment: float | None = None) -> RawPath:
    """Rectilinear spiral of ``steps`` axis-aligned segments with 90 degree left turns.

    Segment i lies on a line at distance ``r0 + i*increment/2`` from the
    origin, so segment lengths are ``2*r0 + i*increment``. The default
    increment is ``r0/2``.
    """
    if r0 <= 0:
        raise InvalidInputError("r0 must be positive")
    if steps < 1:
        raise InvalidInputError("steps must be a positive integer")
    inc = 0.5 * r0 if increment is None else float(increment)
    if inc <= 0:
        raise InvalidInputError("increment must be positive")
    headings = np.array([[0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]])
    start = np.array([r0, -(r0 - inc / 2)])
    verts = [start]
    for i in range(steps):
        verts.append(verts[-1] + (2 * r0 + i * inc) * headings[i % 4])
    return RawPath(np.array(verts))


def sharp_spiral_corners(path: RawPath) -> np.ndarray:
    """Arc-length positions of the interior vertices (corners) of a polyline."""
    return path.cumulative_length()[1:-1]


def read_path_csv(path: str | Path, closed: bool = False) -> RawPath:
    rows = _read_csv(path, ["x", "y"])
    return RawPath(np.array(rows), closed)


def write_path_csv(path: RawPath, file: str | Path) -> None:
    """Write the measurement polyline (closed paths include the closing vertex)."""
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in path.polyline():
            w.writerow([repr(float(x)), repr(float(y))])


def write_objective_csv(objective: Objective, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "alpha"])
        for (x, y), a in zip(objective.xy, objective.alpha):
            w.writerow([f"{x:.15e}", f"{y:.15e}", f"{a:.15e}"])


def read_objective_csv(path: str | Path, source: RawPath | None = None) -> Objective:
    """Objective samples; ``source`` attaches the dense path used for error measurement."""
    rows = np.array(_read_csv(path, ["x", "y", "alpha"]))
    steps = np.hypot(*np.diff(rows[:, :2], axis=0).T)
    return Objective(rows[:, :2], rows[:, 2], float(np.mean(steps)), source=source)


def _read_csv(path, header: list[str]) -> list[list[float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file") from None
        if [h.strip() for h in first] != header:
            raise InvalidInputError(f"{path}: line 1: expected header {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InvalidInputError(f"{path}: line {lineno}: expected {len(header)} fields")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise InvalidInputError(f"{path}: line {lineno}: non-numeric field") from None
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    return rows
