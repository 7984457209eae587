"""Greedy curvature-limited strokes joining consecutive letter trajectories.

The pen keeps a point ``p`` and a unit heading ``h``. Each iteration scores one
candidate per point of the next letter: turn towards that point (clamped to
``alpha_max``), step ``delta`` forward, and weigh index, turn, distance to the
next letter's start and distance to the aimed point. The cheapest candidate
is emitted. The stroke ends once ``p`` is within ``delta`` of the next start.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels


class ConnectError(RuntimeError):
    """Iteration budget exhausted; ``partial`` holds the points emitted so far."""

    def __init__(self, msg: str, partial: np.ndarray):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class ConnectConfig:
    delta: float = 0.02
    # at pi/3 the turning circle has radius delta, so circling a target passes within delta of it
    alpha_max: float = np.pi / 3
    theta_o: float = 1.0
    theta_a: float = 1.0
    theta_f: float = 2.0
    theta_p: float = 1.0
    max_iters: int = 500

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not 0 < self.alpha_max <= np.pi:
            raise ValueError(f"alpha_max must be in (0, pi], got {self.alpha_max}")
        for name in ("theta_o", "theta_a", "theta_f", "theta_p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.max_iters <= 0:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")

    @classmethod
    def for_height(cls, height: float, **kw) -> "ConnectConfig":
        """Defaults with the step length scaled to an uppercase height."""
        return cls(delta=0.02 * height, **kw)


def candidate_costs(p: np.ndarray, h: np.ndarray, next_traj: np.ndarray, cfg: ConnectConfig):
    """(costs, turn angles, candidate points) for every index of ``next_traj``."""
    if len(next_traj) == 0:
        raise ValueError("next trajectory is empty")
    return _kernels.connect_costs(float(p[0]), float(p[1]), float(h[0]), float(h[1]),
                                  np.ascontiguousarray(next_traj, dtype=np.float64), cfg.delta,
                                  cfg.alpha_max, cfg.theta_o, cfg.theta_a, cfg.theta_f, cfg.theta_p)


def initial_heading(prev_traj: np.ndarray) -> np.ndarray:
    """Unit direction of the last non-degenerate segment of ``prev_traj``."""
    seg = np.diff(prev_traj, axis=0)
    norms = np.linalg.norm(seg, axis=1)
    nz = np.flatnonzero(norms > 0)
    if len(nz) == 0:
        raise ValueError("previous trajectory has no direction (all points coincide)")
    return seg[nz[-1]] / norms[nz[-1]]


@dataclass
class ConnectTrace:
    points: np.ndarray  # (k, 2) emitted points, start excluded
    states: np.ndarray  # (k, 4) point and heading before each step
    choices: np.ndarray  # (k,) selected target index per step


def connect_trace(prev_traj, next_traj, cfg: ConnectConfig = ConnectConfig()) -> ConnectTrace:
    """Like :func:`connect`, also returning the per-step states and selected indices."""
    prev_traj = np.asarray(prev_traj, dtype=np.float64)
    next_traj = np.ascontiguousarray(next_traj, dtype=np.float64)
    if prev_traj.ndim != 2 or len(prev_traj) < 2:
        raise ValueError("previous trajectory needs at least 2 points")
    if next_traj.ndim != 2 or len(next_traj) == 0:
        raise ValueError("next trajectory is empty")
    p = prev_traj[-1]
    h = initial_heading(prev_traj)
    pts, states, choices, reached = _kernels.connect_walk(
        p[0], p[1], h[0], h[1], next_traj, cfg.delta, cfg.alpha_max,
        cfg.theta_o, cfg.theta_a, cfg.theta_f, cfg.theta_p, cfg.max_iters)
    if not reached:
        left = np.hypot(*(next_traj[0] - pts[-1]))
        raise ConnectError(f"connection did not reach the next letter within {cfg.max_iters} steps "
                           f"(distance left {left:.4g}); try a larger delta or alpha_max", pts.copy())
    return ConnectTrace(pts.copy(), states.copy(), choices.copy())


def connect(prev_traj, next_traj, cfg: ConnectConfig = ConnectConfig()) -> np.ndarray:
    """Connection points from the end of ``prev_traj`` towards the start of ``next_traj``.

    The returned (k, 2) array excludes the starting point and is empty when
    the pen already sits within ``delta`` of the next start.
    """
    return connect_trace(prev_traj, next_traj, cfg).points
