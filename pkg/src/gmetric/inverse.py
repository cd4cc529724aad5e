"""Bracketing root finder for one-dimensional maps on interval regions.

Solves ``f(c) = target`` for ``c`` in a finite union of closed intervals.
Every subinterval of a uniform grid is scanned for sign changes, which are
then bisected together in one vectorised loop. Grid nodes and caller hints
that already satisfy the equation are kept as roots, so maps that are
constant on a piece (every point a root) are handled too.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

MAX_BISECTIONS = 200


@dataclass
class Roots:
    """All roots found, with their residuals."""

    points: np.ndarray
    residuals: np.ndarray

    def __len__(self) -> int:
        return int(self.points.size)


def find_roots(
    f: Callable[[np.ndarray], np.ndarray],
    target: float,
    intervals,
    residual: Callable[[np.ndarray, float], np.ndarray] | None = None,
    residual_tol: float = 1e-12,
    subdivisions: int = 64,
    hints=(),
) -> Roots:
    """Roots of ``f(c) = target`` on the union of ``intervals``.

    ``f`` maps a 1-D array of abscissae to a 1-D array of values.
    ``residual(values, target)`` measures the mismatch (absolute difference
    by default). A bracket is bisected until the residual drops below
    ``residual_tol`` or the bracket stops shrinking in floating point.
    """
    if residual is None:
        def residual(v, t):
            return np.abs(v - t)

    found, res = [], []
    for lo, hi in intervals:
        lo, hi = float(lo), float(hi)
        nodes = np.array([lo]) if lo == hi else np.linspace(lo, hi, subdivisions + 1)
        extra = np.clip(np.asarray(hints, dtype=float), lo, hi) if len(hints) else np.empty(0)
        probe = np.concatenate([nodes, extra])
        vals = f(probe)
        r = residual(vals, target)
        hit = r <= residual_tol
        found.append(probe[hit])
        res.append(r[hit])
        if lo == hi:
            continue
        g = f(nodes) - target
        a, b = nodes[:-1], nodes[1:]
        ga, gb = g[:-1], g[1:]
        sel = (np.sign(ga) * np.sign(gb) < 0) & np.isfinite(ga) & np.isfinite(gb)
        if not sel.any():
            continue
        a, b, ga = a[sel].copy(), b[sel].copy(), ga[sel].copy()
        done = np.zeros(a.size, dtype=bool)
        mid = 0.5 * (a + b)
        for _ in range(MAX_BISECTIONS):
            mid = 0.5 * (a + b)
            gm = f(mid) - target
            rm = residual(gm + target, target)
            stuck = (mid <= a) | (mid >= b)
            done |= (rm <= residual_tol) | stuck
            if done.all():
                break
            left = np.sign(gm) == np.sign(ga)
            upd = ~done
            a = np.where(upd & left, mid, a)
            ga = np.where(upd & left, gm, ga)
            b = np.where(upd & ~left, mid, b)
        found.append(mid)
        res.append(residual(f(mid), target))
    pts = np.concatenate(found) if found else np.empty(0)
    rs = np.concatenate(res) if res else np.empty(0)
    if pts.size:
        order = np.lexsort((rs, pts))
        pts, rs = pts[order], rs[order]
        keep = np.concatenate([[True], np.diff(pts) > 0])
        pts, rs = pts[keep], rs[keep]
    return Roots(pts, rs)


def solve_batch(
    f: Callable[[np.ndarray], np.ndarray],
    targets,
    intervals,
    residual: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    residual_tol: float = 1e-12,
    subdivisions: int = 64,
):
    """One root of ``f(c) = t`` for each target ``t``, solved together.

    The grid values of ``f`` are shared by all targets. Per target, an
    exact grid hit is preferred, otherwise the first sign-change bracket is
    bisected. Returns ``(points, residuals, found)``.
    """
    if residual is None:
        def residual(v, t):
            return np.abs(v - t)

    t = np.asarray(targets, dtype=float).reshape(-1)
    nodes, seg_a = [], []
    for lo, hi in intervals:
        lo, hi = float(lo), float(hi)
        pts = np.array([lo]) if lo == hi else np.linspace(lo, hi, subdivisions + 1)
        start = sum(p.size for p in nodes)
        nodes.append(pts)
        seg_a.extend(range(start, start + pts.size - 1))
    x = np.concatenate(nodes)
    seg_a = np.asarray(seg_a, dtype=int)
    fv = f(x)
    m = t.size
    res = residual(np.broadcast_to(fv, (m, x.size)).ravel(), np.repeat(t, x.size)).reshape(m, x.size)
    hit = res <= residual_tol
    g = fv[None, :] - t[:, None]
    if seg_a.size:
        ga, gb = g[:, seg_a], g[:, seg_a + 1]
        bracket = (np.sign(ga) * np.sign(gb) < 0) & np.isfinite(ga) & np.isfinite(gb)
    else:
        bracket = np.zeros((m, 0), dtype=bool)

    points = np.full(m, np.nan)
    found = hit.any(axis=1)
    points[found] = x[np.argmax(hit[found], axis=1)]
    need = ~found & bracket.any(axis=1)
    if need.any():
        rows = np.flatnonzero(need)
        seg = seg_a[np.argmax(bracket[rows], axis=1)]
        a, b = x[seg].copy(), x[seg + 1].copy()
        tt = t[rows]
        ga = fv[seg] - tt
        done = np.zeros(rows.size, dtype=bool)
        mid = 0.5 * (a + b)
        for _ in range(MAX_BISECTIONS):
            mid = 0.5 * (a + b)
            fm = f(mid)
            gm = fm - tt
            done |= (residual(fm, tt) <= residual_tol) | (mid <= a) | (mid >= b)
            if done.all():
                break
            left = np.sign(gm) == np.sign(ga)
            upd = ~done
            a = np.where(upd & left, mid, a)
            ga = np.where(upd & left, gm, ga)
            b = np.where(upd & ~left, mid, b)
        points[rows] = mid
    ok = np.isfinite(points)
    residuals = np.full(m, np.inf)
    if ok.any():
        residuals[ok] = residual(f(points[ok]), t[ok])
    found = ok & (residuals <= residual_tol)
    return points, residuals, found
