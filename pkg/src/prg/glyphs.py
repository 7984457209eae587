"""Parametric one-stroke templates for the 62 character classes.

Templates live in a box with baseline y=0, x-height 0.5, cap height 1 and
descenders down to -0.5 (y up). They are only used to generate a synthetic
corpus; proportions are lost after normalization, so what matters is that each
class has a distinct stroke shape and direction.
"""

from __future__ import annotations

import numpy as np

from . import _kernels


def _seg(*pts, n: int = 12) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    out = [pts[0][None]]
    for a, b in zip(pts[:-1], pts[1:]):
        t = np.linspace(0, 1, n + 1)[1:, None]
        out.append(a + t * (b - a))
    return np.concatenate(out)


def _arc(cx, cy, rx, ry, a0, a1, n: int = 36) -> np.ndarray:
    t = np.radians(np.linspace(a0, a1, n))
    return np.stack([cx + rx * np.cos(t), cy + ry * np.sin(t)], axis=1)


def _join(*parts) -> np.ndarray:
    out = [parts[0]]
    for p in parts[1:]:
        # bridge any gap with a straight piece, then drop the duplicate start
        if np.linalg.norm(out[-1][-1] - p[0]) > 1e-9:
            out.append(_seg(out[-1][-1], p[0])[1:])
        out.append(p[1:] if np.linalg.norm(out[-1][-1] - p[0]) < 1e-9 else p)
    return np.concatenate(out)


def _build() -> dict[str, np.ndarray]:
    g: dict[str, np.ndarray] = {}
    # digits
    g["0"] = _arc(0.5, 0.5, 0.33, 0.5, 90, -270)
    g["1"] = _seg((0.3, 0.78), (0.55, 1.0), (0.55, 0.0))
    g["2"] = _join(_arc(0.5, 0.72, 0.3, 0.28, 160, -40), _seg((0.73, 0.54), (0.2, 0.0), (0.85, 0.0)))
    g["3"] = _join(_arc(0.5, 0.76, 0.28, 0.24, 150, -90), _arc(0.5, 0.27, 0.32, 0.25, 90, -150))
    g["4"] = _seg((0.62, 0.0), (0.62, 1.0), (0.12, 0.3), (0.88, 0.3))
    g["5"] = _join(_seg((0.8, 1.0), (0.3, 1.0), (0.25, 0.58)), _arc(0.5, 0.32, 0.32, 0.3, 125, -165))
    g["6"] = _join(_arc(0.52, 0.5, 0.36, 0.5, 55, 270), _arc(0.52, 0.28, 0.32, 0.28, 270, 560))
    g["7"] = _seg((0.12, 1.0), (0.88, 1.0), (0.38, 0.0))
    g["8"] = _join(_arc(0.5, 0.76, 0.24, 0.24, 90, 270), _arc(0.5, 0.26, 0.3, 0.26, 90, -270),
                   _arc(0.5, 0.76, 0.24, 0.24, 270, 450))
    g["9"] = _join(_arc(0.5, 0.72, 0.3, 0.28, 20, 380), _seg((0.78, 0.8), (0.68, 0.0)))
    # uppercase
    g["A"] = _seg((0.1, 0.0), (0.5, 1.0), (0.9, 0.0), (0.6, 0.3), (0.25, 0.38))
    g["B"] = _join(_seg((0.2, 0.0), (0.2, 1.0)), _arc(0.2, 0.75, 0.48, 0.25, 90, -90),
                   _arc(0.2, 0.25, 0.55, 0.25, 90, -90))
    g["C"] = _arc(0.55, 0.5, 0.45, 0.5, 50, 310)
    g["D"] = _join(_seg((0.2, 0.0), (0.2, 1.0)), _arc(0.2, 0.5, 0.62, 0.5, 90, -90))
    g["E"] = _join(_arc(0.52, 0.76, 0.3, 0.24, 20, 270), _arc(0.52, 0.26, 0.34, 0.26, 90, 330))
    g["F"] = _seg((0.85, 1.0), (0.25, 1.0), (0.25, 0.0))
    g["G"] = _join(_arc(0.55, 0.5, 0.45, 0.5, 45, 340), _seg((0.97, 0.33), (0.97, 0.45), (0.62, 0.45)))
    g["H"] = _seg((0.2, 1.0), (0.2, 0.0), (0.4, 0.5), (0.8, 0.5), (0.8, 0.0))
    g["I"] = _seg((0.35, 1.0), (0.5, 1.0), (0.5, 0.0), (0.65, 0.0))
    g["J"] = _join(_seg((0.45, 1.0), (0.72, 1.0), (0.72, 0.3)), _arc(0.46, 0.3, 0.26, 0.3, 0, -180))
    g["K"] = _seg((0.2, 1.0), (0.2, 0.0), (0.45, 0.5), (0.85, 1.0), (0.5, 0.62), (0.85, 0.0))
    g["L"] = _seg((0.25, 1.0), (0.25, 0.0), (0.85, 0.0))
    g["M"] = _seg((0.1, 0.0), (0.12, 1.0), (0.5, 0.3), (0.88, 1.0), (0.9, 0.0))
    g["N"] = _seg((0.2, 0.0), (0.2, 1.0), (0.8, 0.0), (0.8, 1.0))
    g["O"] = _arc(0.5, 0.5, 0.45, 0.5, 90, 450)
    g["P"] = _join(_seg((0.2, 0.0), (0.2, 1.0)), _arc(0.2, 0.75, 0.52, 0.25, 90, -90))
    g["Q"] = _join(_arc(0.5, 0.55, 0.45, 0.45, 90, 450), _seg((0.5, 1.0), (0.58, 0.3), (0.95, 0.0)))
    g["R"] = _join(_seg((0.2, 0.0), (0.2, 1.0)), _arc(0.2, 0.75, 0.52, 0.25, 90, -90),
                   _seg((0.2, 0.5), (0.82, 0.0)))
    g["S"] = _join(_arc(0.5, 0.75, 0.32, 0.25, 20, 270), _arc(0.5, 0.25, 0.32, 0.25, 90, -160))
    g["T"] = _seg((0.1, 1.0), (0.9, 1.0), (0.5, 0.75), (0.5, 0.0))
    g["U"] = _join(_seg((0.2, 1.0), (0.2, 0.35)), _arc(0.5, 0.35, 0.3, 0.35, 180, 360), _seg((0.8, 0.35), (0.8, 1.0)))
    g["V"] = _seg((0.1, 1.0), (0.5, 0.0), (0.9, 1.0))
    g["W"] = _seg((0.05, 1.0), (0.28, 0.0), (0.5, 0.7), (0.72, 0.0), (0.95, 1.0))
    g["X"] = _seg((0.1, 1.0), (0.9, 0.0), (0.9, 1.0), (0.1, 0.0))
    g["Y"] = _seg((0.1, 1.0), (0.45, 0.55), (0.9, 1.0), (0.5, 0.0))
    g["Z"] = _seg((0.1, 1.0), (0.9, 1.0), (0.1, 0.0), (0.9, 0.0))
    # lowercase
    g["a"] = _join(_arc(0.45, 0.25, 0.3, 0.25, 30, 385), _seg((0.75, 0.35), (0.78, 0.0), (0.88, 0.08)))
    g["b"] = _join(_seg((0.2, 1.0), (0.2, 0.25)), _arc(0.45, 0.25, 0.25, 0.25, 180, -180))
    g["c"] = _arc(0.5, 0.25, 0.3, 0.25, 40, 320)
    g["d"] = _join(_arc(0.45, 0.25, 0.25, 0.25, 30, 370), _seg((0.7, 0.33), (0.7, 1.0)))
    g["e"] = _join(_seg((0.2, 0.25), (0.8, 0.25)), _arc(0.5, 0.25, 0.3, 0.25, 0, 320))
    g["f"] = _join(_arc(0.62, 0.85, 0.2, 0.15, 20, 180), _seg((0.42, 0.85), (0.42, -0.5)))
    g["g"] = _join(_arc(0.45, 0.25, 0.25, 0.25, 30, 385), _seg((0.7, 0.35), (0.7, -0.3)),
                   _arc(0.45, -0.3, 0.25, 0.2, 0, -180))
    g["h"] = _join(_seg((0.2, 1.0), (0.2, 0.0)), _arc(0.45, 0.25, 0.25, 0.25, 215, 0),
                   _seg((0.7, 0.25), (0.7, 0.0)))
    g["i"] = _seg((0.38, 0.42), (0.5, 0.5), (0.5, 0.0), (0.62, 0.06))
    g["j"] = _join(_seg((0.5, 0.5), (0.5, -0.3)), _arc(0.3, -0.3, 0.2, 0.2, 0, -180))
    g["k"] = _seg((0.2, 1.0), (0.2, 0.0), (0.4, 0.3), (0.72, 0.5), (0.45, 0.25), (0.75, 0.0))
    g["l"] = _seg((0.48, 1.0), (0.5, 0.0))
    g["m"] = _join(_seg((0.05, 0.0), (0.1, 0.4)), _arc(0.3, 0.3, 0.2, 0.2, 150, 0),
                   _seg((0.5, 0.3), (0.5, 0.0)), _arc(0.7, 0.3, 0.2, 0.2, 215, 0),
                   _seg((0.9, 0.3), (0.9, 0.0)))
    g["n"] = _join(_seg((0.15, 0.0), (0.2, 0.4)), _arc(0.45, 0.25, 0.25, 0.25, 145, 0),
                   _seg((0.7, 0.25), (0.7, 0.0)))
    g["o"] = _arc(0.5, 0.25, 0.3, 0.25, 90, -270)
    g["p"] = _join(_seg((0.2, -0.5), (0.2, 0.25)), _arc(0.45, 0.25, 0.25, 0.25, 180, -180))
    g["q"] = _join(_arc(0.45, 0.25, 0.25, 0.25, 30, 385), _seg((0.7, 0.35), (0.72, -0.5), (0.85, -0.35)))
    g["r"] = _join(_seg((0.15, 0.0), (0.2, 0.45)), _arc(0.45, 0.3, 0.25, 0.2, 150, 45))
    g["s"] = _join(_arc(0.5, 0.375, 0.2, 0.125, 20, 270), _arc(0.5, 0.125, 0.2, 0.125, 90, -160))
    g["t"] = _join(_seg((0.5, 1.0), (0.5, 0.1)), _arc(0.65, 0.1, 0.15, 0.1, 180, 360),
                   _seg((0.8, 0.1), (0.78, 0.62), (0.2, 0.62)))
    g["u"] = _join(_seg((0.2, 0.5), (0.2, 0.2)), _arc(0.45, 0.2, 0.25, 0.2, 180, 360),
                   _seg((0.7, 0.2), (0.7, 0.5), (0.8, 0.0)))
    g["v"] = _seg((0.2, 0.5), (0.5, 0.0), (0.8, 0.5))
    g["w"] = _seg((0.1, 0.5), (0.3, 0.0), (0.5, 0.4), (0.7, 0.0), (0.9, 0.5))
    g["x"] = _seg((0.2, 0.5), (0.8, 0.0), (0.8, 0.5), (0.2, 0.0))
    g["y"] = _seg((0.2, 0.5), (0.5, 0.0), (0.8, 0.5), (0.3, -0.5))
    g["z"] = _seg((0.2, 0.5), (0.8, 0.5), (0.2, 0.0), (0.8, 0.0))
    return g


def _smooth(pts: np.ndarray, spacing: float = 0.01, window: int = 7) -> np.ndarray:
    knots = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    s = np.linspace(0.0, knots[-1], max(int(knots[-1] / spacing), window + 2))
    dense = np.stack([np.interp(s, knots, pts[:, 0]), np.interp(s, knots, pts[:, 1])], axis=1)
    pad = window // 2
    padded = np.concatenate([np.repeat(dense[:1], pad, 0), dense, np.repeat(dense[-1:], pad, 0)])
    kernel = np.ones(window) / window
    return np.stack([np.convolve(padded[:, i], kernel, mode="valid") for i in range(2)], axis=1)


def _pursue(pts: np.ndarray, radius: float = 0.04, ds: float = 0.004) -> np.ndarray:
    """Retrace with a minimum turning radius so hairpins open into U-turns."""
    dense = _smooth(pts, spacing=ds / 2, window=1)
    traced = _kernels.pursue(dense, radius, ds, 20 * len(dense))
    return _smooth(traced, spacing=0.01, window=5)


TEMPLATES = {ch: _pursue(pts) for ch, pts in _build().items()}


def _smooth_noise(n: int, rng: np.random.Generator, amplitude: float, modes: int = 3) -> np.ndarray:
    t = np.linspace(0, 1, n)[:, None]
    out = np.zeros((n, 2))
    for k in range(1, modes + 1):
        a = rng.normal(0, amplitude / k, 2)
        phase = rng.uniform(0, 2 * np.pi, 2)
        out += a * np.sin(np.pi * k * t + phase)
    return out


def jittered(char: str, rng: np.random.Generator, amount: float = 1.0) -> np.ndarray:
    """A random affine + smooth-noise deformation of the template for ``char``."""
    pts = TEMPLATES[char]
    center = pts.mean(axis=0)
    rot = rng.normal(0, 0.06 * amount)
    shear = rng.normal(0, 0.08 * amount)
    sx, sy = np.exp(rng.normal(0, 0.06 * amount, 2))
    c, s = np.cos(rot), np.sin(rot)
    a = np.array([[c, -s], [s, c]]) @ np.array([[1, shear], [0, 1]]) @ np.diag([sx, sy])
    out = (pts - center) @ a.T + center
    return out + _smooth_noise(len(pts), rng, 0.025 * amount)
