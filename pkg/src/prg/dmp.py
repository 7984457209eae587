"""Discrete dynamic movement primitive for a planar trajectory.

Transformation system per dimension, with phase ``s`` decaying from 1:

    tau * dx = v
    tau * dv = alpha_z * (beta_z * (g - x) - v) + f(s)
    tau * ds = -alpha_s * s

The forcing term ``f(s) = sum(psi_i(s) w_i) s / sum(psi_i(s))`` is not scaled
by ``g - x0``, so closed strokes that end where they began fit without a
singular amplitude.

Pen trajectories carry no timing, so a demonstration is timed along its arc
length with a minimum-jerk progress profile: it starts and ends at rest,
which is what the unforced system does at the goal.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ALPHA_Z = 25.0
BETA_Z = 6.25
ALPHA_S = 4.6
S_MIN = 1e-3


class DmpError(RuntimeError):
    pass


@dataclass
class DmpParams:
    x0: np.ndarray  # (D,)
    g: np.ndarray  # (D,)
    weights: np.ndarray  # (D, B)
    centers: np.ndarray  # (B,) strictly decreasing in s
    widths: np.ndarray  # (B,)
    tau: float = 1.0
    alpha_z: float = ALPHA_Z
    beta_z: float = BETA_Z
    alpha_s: float = ALPHA_S
    scale: float = 1.0  # spatial extent of the demonstration, for divergence checks

    def __post_init__(self):
        self.x0, self.g = np.asarray(self.x0, float), np.asarray(self.g, float)
        self.weights = np.atleast_2d(np.asarray(self.weights, float))
        self.centers, self.widths = np.asarray(self.centers, float), np.asarray(self.widths, float)
        b = len(self.centers)
        if b < 1 or self.weights.shape != (len(self.x0), b) or self.widths.shape != (b,):
            raise ValueError(f"inconsistent DMP shapes: x0 {self.x0.shape}, weights {self.weights.shape}, "
                             f"centers {self.centers.shape}, widths {self.widths.shape}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if abs(self.alpha_z - 4 * self.beta_z) > 1e-12:
            raise ValueError("alpha_z must equal 4 * beta_z for critical damping")
        if b > 1 and np.any(np.diff(self.centers) >= 0):
            raise ValueError("basis centers must be strictly decreasing")

    @property
    def n_basis(self) -> int:
        return len(self.centers)

    def forcing(self, s) -> np.ndarray:
        """f(s) for each dimension, shape (..., D)."""
        s = np.asarray(s, float)
        # normalized basis activations, shifted in log space so tails never underflow to 0/0
        logpsi = -self.widths * (s[..., None] - self.centers) ** 2
        psi = np.exp(logpsi - logpsi.max(axis=-1, keepdims=True))
        return (psi @ self.weights.T) * (s / psi.sum(axis=-1))[..., None]

    def to_dict(self) -> dict:
        return {"dims": len(self.x0), "tau": self.tau, "alpha_z": self.alpha_z, "beta_z": self.beta_z,
                "alpha_s": self.alpha_s, "scale": self.scale, "x0": self.x0.tolist(), "g": self.g.tolist(),
                "centers": self.centers.tolist(), "widths": self.widths.tolist(),
                "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DmpParams":
        return cls(d["x0"], d["g"], d["weights"], d["centers"], d["widths"], d["tau"],
                   d["alpha_z"], d["beta_z"], d["alpha_s"], d.get("scale", 1.0))


def basis(n_basis: int, alpha_s: float = ALPHA_S) -> tuple[np.ndarray, np.ndarray]:
    """Centers evenly spaced in time over [0, tau] and matching widths."""
    if n_basis < 1:
        raise ValueError(f"need at least one basis function, got {n_basis}")
    centers = np.exp(-alpha_s * np.linspace(0.0, 1.0, n_basis))
    if n_basis == 1:
        return centers, np.ones(1)
    gaps = -np.diff(centers)
    # neighbouring bases cross at about exp(-1/2) of their peak
    widths = 2.0 / np.append(gaps, gaps[-1]) ** 2
    return centers, widths


def min_jerk(u):
    """Progress 10u^3 - 15u^4 + 6u^5: zero velocity and acceleration at both ends."""
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10 - 15 * u + 6 * u**2)


def _arc(y: np.ndarray) -> np.ndarray:
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(y, axis=0), axis=1))])
    return arc / arc[-1] if arc[-1] > 0 else np.linspace(0.0, 1.0, len(y))


def demo_times(traj, tau: float = 1.0) -> np.ndarray:
    """Time stamp of every demonstration point under minimum-jerk arc-length timing."""
    u = np.linspace(0.0, 1.0, 4001)
    return tau * np.interp(_arc(np.asarray(traj, float)), min_jerk(u), u)


def timed_demo(traj, tau: float = 1.0, n: int = 2000) -> tuple[np.ndarray, np.ndarray]:
    """Demonstration resampled on an even time grid of ``n`` points over [0, tau]."""
    y = np.asarray(traj, float)
    t = np.linspace(0.0, tau, n)
    a = min_jerk(t / tau)
    arc = _arc(y)
    # repeated arc values (zero-length segments) are harmless for interp
    return t, np.stack([np.interp(a, arc, y[:, d]) for d in range(y.shape[1])], axis=1)


def fit_dmp(traj, tau: float = 1.0, n_basis: int = 30) -> DmpParams:
    """Fit weights by locally weighted regression to a timed demonstration over [0, tau]."""
    y = np.asarray(traj, dtype=np.float64)
    if y.ndim != 2 or len(y) < 3:
        raise ValueError(f"need an (n >= 3, D) trajectory, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("trajectory contains non-finite values")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    x0, g = y[0], y[-1]
    t, y = timed_demo(y, tau, max(2000, 20 * len(y)))
    dy = np.gradient(y, t, axis=0)
    ddy = np.gradient(dy, t, axis=0)
    f_target = tau**2 * ddy - ALPHA_Z * (BETA_Z * (g - y) - tau * dy)
    s = np.exp(-ALPHA_S * t / tau)
    centers, widths = basis(n_basis)
    psi = np.exp(-widths * (s[:, None] - centers) ** 2)  # (n, B)
    num = (psi * s[:, None]).T @ f_target  # (B, D)
    den = (psi * s[:, None] ** 2).sum(axis=0)  # (B,)
    weights = (num / np.maximum(den, 1e-300)[:, None]).T
    scale = float(np.linalg.norm(y.max(axis=0) - y.min(axis=0))) or 1.0
    return DmpParams(x0, g, weights, centers, widths, tau, scale=scale)


def rollout(params: DmpParams, dt: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Euler-integrate from x0 at rest until the phase drops below 1e-3; returns (t, x)."""
    tau = params.tau
    dt = tau / 1000 if dt is None else float(dt)
    if not 0 < dt <= tau / 100:
        raise ValueError(f"dt must be in (0, tau/100], got {dt}")
    n_steps = int(np.ceil(tau * np.log(1.0 / S_MIN) / (params.alpha_s * dt)))
    # phase has a closed form, so only the transformation system is integrated
    s_all = np.exp(-params.alpha_s * dt * np.arange(n_steps + 1) / tau)
    f_all = params.forcing(s_all)
    x = np.empty((n_steps + 1, len(params.x0)))
    x[0] = params.x0
    v = np.zeros(len(params.x0))
    limit = 1e3 * max(params.scale, np.abs(params.x0).max(), np.abs(params.g).max(), 1e-12)
    k = dt / tau
    az, bz, g = params.alpha_z, params.beta_z, params.g
    for i in range(n_steps):
        xi = x[i]
        x[i + 1] = xi + k * v
        v = v + k * (az * (bz * (g - xi) - v) + f_all[i])
        if np.abs(x[i + 1]).max() > limit or not np.all(np.isfinite(x[i + 1])):
            raise DmpError(f"rollout diverged at step {i + 1} (|x| > {limit:.3g})")
    return np.arange(n_steps + 1) * dt, x


def resample_at(t: np.ndarray, x: np.ndarray, times: np.ndarray) -> np.ndarray:
    return np.stack([np.interp(times, t, x[:, d]) for d in range(x.shape[1])], axis=1)


def reconstruction_rmse(traj, params: DmpParams, dt: float | None = None) -> float:
    """RMSE between a demonstration and the rollout at the demonstration's sample times."""
    y = np.asarray(traj, float)
    t, x = rollout(params, dt)
    pred = resample_at(t, x, demo_times(y, params.tau))
    return float(np.sqrt(np.mean(np.sum((pred - y) ** 2, axis=1))))


def diameter(traj) -> float:
    """Largest pairwise distance between trajectory points."""
    y = np.asarray(traj, float)
    d = np.linalg.norm(y[:, None] - y[None], axis=-1)
    return float(d.max())


def hausdorff(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    d = np.linalg.norm(a[:, None] - b[None], axis=-1)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def save_dmp(params: DmpParams, path) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=1) + "\n")


def load_dmp(path) -> DmpParams:
    return DmpParams.from_dict(json.loads(Path(path).read_text()))


def write_csv(path, t: np.ndarray, x: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y"])
        for ti, (xi, yi) in zip(t, x):
            w.writerow([f"{ti:.6f}", f"{xi:.6f}", f"{yi:.6f}"])
