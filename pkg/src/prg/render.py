"""SVG output for a composed word: one polyline for the whole stroke."""

from __future__ import annotations

import numpy as np

from .pipeline import ComposedWord

COLORS = {"letter": "#1f5fbf", "connection": "#d0402b"}


def _path(pts: np.ndarray, to_svg) -> str:
    xy = to_svg(pts)
    return "M " + " L ".join(f"{x:.3f} {y:.3f}" for x, y in xy)


def svg(word: ComposedWord, px_per_unit: float = 100.0, margin: float = 0.2, stroke: float = 2.0,
        color_tags: bool = False) -> str:
    """SVG document; ``color_tags`` overlays letter and connection segments in distinct colors."""
    full = word.full
    lo, hi = full.min(axis=0) - margin, full.max(axis=0) + margin
    w, h = (hi - lo) * px_per_unit

    def to_svg(p):
        # flip y so the baseline sits below the ascenders
        return np.stack([(p[:, 0] - lo[0]) * px_per_unit, (hi[1] - p[:, 1]) * px_per_unit], axis=1)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1f}" height="{h:.1f}" '
           f'viewBox="0 0 {w:.3f} {h:.3f}">',
           f'<path d="{_path(full, to_svg)}" fill="none" stroke="black" stroke-width="{stroke}" '
           'stroke-linecap="round" stroke-linejoin="round"/>']
    if color_tags:
        for kind, a, b in word.segments:
            if b - a < 1:
                continue
            # start each overlay at the previous segment's last point so joins stay visible
            seg = full[max(a - 1, 0):b]
            out.append(f'<path class="{kind}" d="{_path(seg, to_svg)}" fill="none" '
                       f'stroke="{COLORS[kind]}" stroke-width="{stroke}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
