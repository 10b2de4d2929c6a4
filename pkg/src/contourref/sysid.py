"""Least-squares identification of the per-axis PD gains from tracking logs."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IdentifiabilityError, InvalidInputError
from .plant import ControllerGains

LOG_HEADER = ["t", "rx", "ry", "rvx", "rvy", "ox", "oy", "ovx", "ovy", "ux", "uy"]
MAX_CONDITION = 1e12


@dataclass
class TrackingLog:
    t: np.ndarray  # (M,)
    ref_pos: np.ndarray  # (M, 2)
    ref_vel: np.ndarray
    out_pos: np.ndarray
    out_vel: np.ndarray
    accel: np.ndarray  # acceleration applied over [t_i, t_i+1)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        m = len(self.t)
        for name in ("ref_pos", "ref_vel", "out_pos", "out_vel", "accel"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (m, 2):
                raise InvalidInputError(f"{name} has shape {a.shape}, expected ({m}, 2)")
            setattr(self, name, a)
        if m and np.any(np.diff(self.t) <= 0):
            raise InvalidInputError("log times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    def errors(self) -> tuple[np.ndarray, np.ndarray]:
        """Position and velocity errors, reference minus output."""
        return self.ref_pos - self.out_pos, self.ref_vel - self.out_vel

    def write_csv(self, path: str | Path) -> None:
        cols = np.column_stack([self.t, self.ref_pos, self.ref_vel, self.out_pos, self.out_vel, self.accel])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_HEADER)
            for row in cols:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def read_csv(cls, path: str | Path) -> "TrackingLog":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise InvalidInputError(f"{path}: line 1: empty file, expected header {','.join(LOG_HEADER)}")
            if [h.strip() for h in header] != LOG_HEADER:
                raise InvalidInputError(f"{path}: line 1: expected header {','.join(LOG_HEADER)}")
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(LOG_HEADER):
                    raise InvalidInputError(f"{path}: line {lineno}: expected {len(LOG_HEADER)} fields, got {len(row)}")
                try:
                    vals = [float(c) for c in row]
                except ValueError:
                    raise InvalidInputError(f"{path}: line {lineno}: non-numeric field") from None
                if not np.all(np.isfinite(vals)):
                    raise InvalidInputError(f"{path}: line {lineno}: non-finite value")
                rows.append(vals)
        if not rows:
            raise InvalidInputError(f"{path}: no data rows")
        a = np.array(rows)
        return cls(a[:, 0], a[:, 1:3], a[:, 3:5], a[:, 5:7], a[:, 7:9], a[:, 9:11])


@dataclass
class FitReport:
    gains: ControllerGains
    residual_rms: np.ndarray  # (2,) m/s^2 per axis
    r_squared: np.ndarray  # (2,)
    std_errors: np.ndarray  # (2, 2): rows (kp, kd), columns (x, y)
    condition: np.ndarray  # (2,) of the scaled regressor
    n_samples: int

    def as_dict(self) -> dict:
        g = self.gains
        d = {"kp_x": g.kp_x, "kp_y": g.kp_y, "kd_x": g.kd_x, "kd_y": g.kd_y}
        for j, ax in enumerate("xy"):
            d[f"se_kp_{ax}"] = float(self.std_errors[0, j])
            d[f"se_kd_{ax}"] = float(self.std_errors[1, j])
            d[f"residual_rms_{ax}"] = float(self.residual_rms[j])
            d[f"r_squared_{ax}"] = float(self.r_squared[j])
            d[f"condition_{ax}"] = float(self.condition[j])
        d["n_samples"] = self.n_samples
        return d

    def summary(self) -> str:
        lines = ["PD gain fit (through the origin, u(k+1) against e(k))"]
        for j, ax in enumerate("xy"):
            lines.append(
                f"  {ax}: Kp = {self.gains.kp[j]:.10g} +/- {self.std_errors[0, j]:.3g} 1/s^2, "
                f"Kd = {self.gains.kd[j]:.10g} +/- {self.std_errors[1, j]:.3g} 1/s, "
                f"residual RMS {self.residual_rms[j]:.3e} m/s^2, R^2 {self.r_squared[j]:.6f}"
            )
        lines.append(f"  samples used: {self.n_samples}")
        return "\n".join(lines)

    def write(self, text_path: str | Path, kv_path: str | Path) -> None:
        Path(text_path).write_text(self.summary() + "\n")
        Path(kv_path).write_text("".join(f"{k} = {_kv(v)}\n" for k, v in self.as_dict().items()))


def _kv(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def read_gains(path: str | Path) -> ControllerGains:
    """Gains from a key-value file as written by :meth:`FitReport.write`."""
    vals = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}: line {lineno}: expected 'key = value'")
        k, v = (p.strip() for p in line.split("=", 1))
        vals[k] = v
    try:
        return ControllerGains(*(float(vals[k]) for k in ("kp_x", "kp_y", "kd_x", "kd_y")))
    except KeyError as exc:
        raise InvalidInputError(f"{path}: missing key {exc.args[0]}") from None
    except ValueError:
        raise InvalidInputError(f"{path}: gain values must be numeric") from None


def _fit_axis(e_pos: np.ndarray, e_vel: np.ndarray, u_next: np.ndarray):
    X = np.column_stack([e_pos, e_vel])
    y = u_next
    n = len(y)
    # Column scaling only: centering would fit an intercept the model does not have.
    scale = np.sqrt(np.mean(X * X, axis=0))
    if np.any(scale == 0) or not np.all(np.isfinite(scale)):
        raise IdentifiabilityError("regressor column is identically zero")
    Xs = X / scale
    sv = np.linalg.svd(Xs, compute_uv=False)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    if cond > MAX_CONDITION:
        raise IdentifiabilityError(f"regressor is rank deficient (condition number {cond:.3g})")
    Q, R = np.linalg.qr(Xs)
    beta_s = np.linalg.solve(R, Q.T @ y)
    beta = beta_s / scale
    resid = y - X @ beta
    rss = float(resid @ resid)
    dof = max(n - 2, 1)
    Rinv = np.linalg.inv(R)
    cov_s = (rss / dof) * (Rinv @ Rinv.T)
    se = np.sqrt(np.diag(cov_s)) / scale
    yc = y - y.mean()
    tss = float(yc @ yc)
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss == 0 else 0.0)
    return beta, float(np.sqrt(rss / n)), float(r2), se, float(cond)


def fit_gains(log: TrackingLog) -> FitReport:
    """Per-axis least squares of u(k+1) on the errors at k.

    Each axis is fit independently through the origin with a QR
    factorization of the RMS-scaled regressor.
    """
    m = len(log)
    if m < 3:
        raise InvalidInputError(f"need at least 3 samples, got {m}")
    e_pos, e_vel = log.errors()
    kp, kd = np.zeros(2), np.zeros(2)
    rms, r2, cond = np.zeros(2), np.zeros(2), np.zeros(2)
    se = np.zeros((2, 2))
    for j in range(2):
        beta, rms[j], r2[j], se[:, j], cond[j] = _fit_axis(e_pos[:-1, j], e_vel[:-1, j], log.accel[1:, j])
        kp[j], kd[j] = beta
    gains = ControllerGains(kp_x=kp[0], kp_y=kp[1], kd_x=kd[0], kd_y=kd[1])
    return FitReport(gains, rms, r2, se, cond, m - 1)


def synth_log(reference, gains: ControllerGains, initial_state: np.ndarray, noise_std: float = 0.0, seed: int = 0) -> TrackingLog:
    """Closed-loop log of ``reference`` with Gaussian noise on the applied acceleration.

    The logged acceleration is the applied one, noise included, so a fit
    sees the disturbance as regression error.
    """
    from .postprocess import simulate_closed_loop

    if noise_std < 0:
        raise InvalidInputError("noise_std must be non-negative")
    rng = np.random.default_rng(seed)
    traj = simulate_closed_loop(reference, gains, initial_state, noise_std=noise_std, rng=rng)
    return TrackingLog(
        t=traj.t,
        ref_pos=reference.pos,
        ref_vel=reference.vel,
        out_pos=traj.states[:, 0, :2],
        out_vel=traj.states[:, 1, :2],
        accel=traj.inputs,
    )


def sinusoid_reference(amplitude=(1e-3, 5e-4), frequency=(1.0, 1.7), duration: float = 2.0, dt: float = 1e-4):
    """A two-axis sinusoidal reference useful as identification excitation."""
    from .postprocess import ReferenceFile

    t = dt * np.arange(int(round(duration / dt)) + 1)
    a, f = np.asarray(amplitude, dtype=float), np.asarray(frequency, dtype=float)
    w = 2 * np.pi * f
    pos = a * np.sin(np.outer(t, w))
    vel = a * w * np.cos(np.outer(t, w))
    return ReferenceFile(float(dt), t, pos, vel)
