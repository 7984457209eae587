"""Compiled inner loops (numba): resampling, convolutions, optimizer, connection costs."""

import numpy as np
from numba import njit


@njit(cache=True)
def _walk(pts, step, n, out):
    """Walk a divider of opening ``step`` along ``pts``; return points placed."""
    m = pts.shape[0] - 1
    cx, cy = pts[0, 0], pts[0, 1]
    out[0, 0], out[0, 1] = cx, cy
    placed = 1
    k = 0
    u = 0.0
    r2 = step * step
    while placed < n:
        found = False
        j = k
        while j < m:
            ax, ay = pts[j, 0], pts[j, 1]
            dx, dy = pts[j + 1, 0] - ax, pts[j + 1, 1] - ay
            qa = dx * dx + dy * dy
            ex, ey = ax - cx, ay - cy
            qb = 2.0 * (dx * ex + dy * ey)
            qc = ex * ex + ey * ey - r2
            disc = qb * qb - 4.0 * qa * qc
            if disc >= 0.0:
                sq = np.sqrt(disc)
                lo = u + 1e-12 if j == k else 0.0
                best = 2.0
                r1 = (-qb - sq) / (2.0 * qa)
                r2_ = (-qb + sq) / (2.0 * qa)
                if lo <= r1 <= 1.0:
                    best = r1
                elif lo <= r2_ <= 1.0:
                    best = r2_
                if best <= 1.0:
                    k, u = j, best
                    cx, cy = ax + best * dx, ay + best * dy
                    out[placed, 0], out[placed, 1] = cx, cy
                    placed += 1
                    found = True
                    break
            j += 1
        if not found:
            break
    return placed


@njit(cache=True)
def equal_chord_resample(pts, n, grid, iters, tol):
    """Search the divider opening so the n-th point lands on the path end.

    The count of points a walk fits is not monotone in the opening when the
    path folds back, so openings are scanned downward for a fit/no-fit
    bracket, bisected, and accepted once the last point lands within
    ``tol * opening`` of the true end.
    """
    m = pts.shape[0]
    total = 0.0
    for i in range(m - 1):
        total += np.sqrt((pts[i + 1, 0] - pts[i, 0]) ** 2 + (pts[i + 1, 1] - pts[i, 1]) ** 2)
    top = total / (n - 1)
    out = np.empty((n, 2))
    cand = np.empty((n, 2))
    ex, ey = pts[m - 1, 0], pts[m - 1, 1]
    prev_fit = False
    prev_step = top
    for g in range(grid):
        step = top * (1.0 - 0.75 * g / (grid - 1))
        fits = _walk(pts, step, n, cand) == n
        if fits and not prev_fit:
            lo, hi = step, prev_step
            out[:, :] = cand
            for _ in range(iters):
                mid = 0.5 * (lo + hi)
                if _walk(pts, mid, n, cand) == n:
                    lo = mid
                    out[:, :] = cand
                else:
                    hi = mid
            d = np.sqrt((out[n - 1, 0] - ex) ** 2 + (out[n - 1, 1] - ey) ** 2)
            if d <= tol * lo:
                out[n - 1, 0], out[n - 1, 1] = ex, ey
                return True, out
        prev_fit = fits
        prev_step = step
    return False, out


@njit(cache=True)
def pursue(dense, radius, ds, max_steps):
    """Retrace a densely sampled path with a follower of bounded turn rate.

    The follower moves ``ds`` per step, turns at most ``ds / radius`` and
    chases the first path point at least ``2.5 * radius`` away. Hairpins open
    into U-turns about ``2 * radius`` wide. The path end is appended last.
    """
    look = 2.5 * radius
    last = dense.shape[0] - 1
    out = np.empty((max_steps + 2, 2))
    px, py = dense[0, 0], dense[0, 1]
    out[0, 0], out[0, 1] = px, py
    j = 0
    while j < last and np.hypot(dense[j, 0] - px, dense[j, 1] - py) < look:
        j += 1
    h = np.arctan2(dense[j, 1] - py, dense[j, 0] - px)
    max_turn = ds / radius
    k = 1
    for _ in range(max_steps):
        while j < last and np.hypot(dense[j, 0] - px, dense[j, 1] - py) < look:
            j += 1
        dx, dy = dense[j, 0] - px, dense[j, 1] - py
        if j == last and np.hypot(dx, dy) < look:
            break
        turn = (np.arctan2(dy, dx) - h + np.pi) % (2.0 * np.pi) - np.pi
        h += min(max(turn, -max_turn), max_turn)
        px += ds * np.cos(h)
        py += ds * np.sin(h)
        out[k, 0], out[k, 1] = px, py
        k += 1
    out[k, 0], out[k, 1] = dense[last, 0], dense[last, 1]
    return out[:k + 1].copy()


@njit(cache=True)
def im2col_rows(x, k, stride, pad, ho, wo):
    """(B, C, H, W) -> (B*ho*wo, C*k*k) patch matrix of the zero-padded input.

    Rows are ordered (b, y, x) and columns (c, i, j).
    """
    b, c, h, w = x.shape
    kk = k * k
    out = np.empty((b * ho * wo, c * kk))
    for bi in range(b):
        for ci in range(c):
            src = x[bi, ci]
            for y in range(ho):
                for xo in range(wo):
                    row = out[(bi * ho + y) * wo + xo]
                    base = ci * kk
                    for i in range(k):
                        sy = y * stride + i - pad
                        if sy < 0 or sy >= h:
                            for j in range(k):
                                row[base + i * k + j] = 0.0
                            continue
                        srow = src[sy]
                        for j in range(k):
                            sx = xo * stride + j - pad
                            row[base + i * k + j] = srow[sx] if 0 <= sx < w else 0.0
    return out


@njit(cache=True)
def col2im_rows(mat, b, c, h, w, k, stride, pad, hi, wi):
    """Adjoint of :func:`im2col_rows`: scatter-add patch rows into (B, C, h, w).

    Patch positions run over an ``hi x wi`` grid; taps landing in the padding
    border are dropped.
    """
    kk = k * k
    out = np.zeros((b, c, h, w))
    for bi in range(b):
        for ci in range(c):
            dst = out[bi, ci]
            for y in range(hi):
                for xo in range(wi):
                    row = mat[(bi * hi + y) * wi + xo]
                    base = ci * kk
                    for i in range(k):
                        sy = y * stride + i - pad
                        if sy < 0 or sy >= h:
                            continue
                        drow = dst[sy]
                        for j in range(k):
                            sx = xo * stride + j - pad
                            if 0 <= sx < w:
                                drow[sx] += row[base + i * k + j]
    return out


@njit(cache=True)
def adam_update(p, g, m, v, lr, b1, b2, eps, bc1, bc2):
    """Fused in-place Adam step on flat arrays; ``bc*`` are 1 - beta**t."""
    step = lr / bc1
    inv = 1.0 / np.sqrt(bc2)
    for i in range(p.size):
        gi = g[i]
        mi = b1 * m[i] + (1.0 - b1) * gi
        vi = b2 * v[i] + (1.0 - b2) * gi * gi
        m[i] = mi
        v[i] = vi
        p[i] -= step * mi / (np.sqrt(vi) * inv + eps)


@njit(cache=True)
def leaky_back(x, g, slope):
    out = np.empty_like(g)
    xf, gf, of = x.reshape(-1), g.reshape(-1), out.reshape(-1)
    for i in range(xf.size):
        of[i] = gf[i] if xf[i] > 0 else slope * gf[i]
    return out


@njit(cache=True)
def _minmax_into(v, out, weight):
    lo, hi = v.min(), v.max()
    if hi > lo:
        for i in range(v.size):
            out[i] += weight * (v[i] - lo) / (hi - lo)


@njit(cache=True)
def connect_costs(px, py, hx, hy, nxt, delta, amax, th_o, th_a, th_f, th_p):
    """Candidate costs, clamped turn angles and candidate points for one pen step."""
    n = nxt.shape[0]
    angles = np.empty(n)
    cand = np.empty((n, 2))
    da = np.empty(n)
    dstart = np.empty(n)
    daim = np.empty(n)
    costs = np.empty(n)
    for j in range(n):
        dx, dy = nxt[j, 0] - px, nxt[j, 1] - py
        a = np.arctan2(hx * dy - hy * dx, hx * dx + hy * dy)
        a = min(max(a, -amax), amax)
        c, s = np.cos(a), np.sin(a)
        cx = px + delta * (c * hx - s * hy)
        cy = py + delta * (s * hx + c * hy)
        angles[j] = a
        cand[j, 0], cand[j, 1] = cx, cy
        da[j] = abs(a)
        dstart[j] = np.hypot(nxt[0, 0] - cx, nxt[0, 1] - cy)
        daim[j] = np.hypot(nxt[j, 0] - cx, nxt[j, 1] - cy)
        costs[j] = th_o * j / n
    _minmax_into(da, costs, th_a)
    _minmax_into(dstart, costs, th_f)
    _minmax_into(daim, costs, th_p)
    return costs, angles, cand


@njit(cache=True)
def connect_walk(px, py, hx, hy, nxt, delta, amax, th_o, th_a, th_f, th_p, max_iters):
    """Greedy pen walk; returns (points, pre-step states [p, h], chosen indices, reached)."""
    pts = np.empty((max_iters, 2))
    states = np.empty((max_iters, 4))
    choice = np.empty(max_iters, dtype=np.int64)
    gx, gy = nxt[0, 0], nxt[0, 1]
    k = 0
    while np.hypot(gx - px, gy - py) > delta:
        if k >= max_iters:
            return pts[:k], states[:k], choice[:k], False
        costs, angles, cand = connect_costs(px, py, hx, hy, nxt, delta, amax, th_o, th_a, th_f, th_p)
        j = np.argmin(costs)
        states[k, 0], states[k, 1], states[k, 2], states[k, 3] = px, py, hx, hy
        choice[k] = j
        c, s = np.cos(angles[j]), np.sin(angles[j])
        hx, hy = c * hx - s * hy, s * hx + c * hy
        norm = np.hypot(hx, hy)
        hx, hy = hx / norm, hy / norm
        px, py = cand[j, 0], cand[j, 1]
        pts[k, 0], pts[k, 1] = px, py
        k += 1
    return pts[:k], states[:k], choice[:k], True
