"""Regions of the point universe and the three-set distance.

A region knows how to test membership, how to draw seeded samples, and, on
the line, how to describe itself as a finite union of closed intervals.
Finite regions (point sets, truncated lattices) are handled exactly by brute
force; interval regions are searched on a coarse grid and then polished by
coordinate descent with golden-section line searches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import DEFAULT_TOL, GMetric, as_batch, as_point, metric_from_g
from .errors import BudgetExhaustedWithoutRefinement, DimensionMismatch, EmptyRegion

MEMBER_SLACK = 1e-12
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class Region:
    """A named subset of R^dim.

    ``contains`` maps an ``(n, dim)`` array to a boolean ``(n,)`` array and
    ``sampler(n, rng)`` returns ``n`` member points. ``intervals`` is the
    optional 1-D description as closed ``(lo, hi)`` pairs (``lo == hi`` for
    isolated points); ``finite`` holds every member when the region is a
    finite set, or the truncated member list used for sampling when it is
    an unbounded lattice.
    """

    name: str
    contains: Callable[[np.ndarray], np.ndarray]
    bounds: np.ndarray
    sampler: Callable[[int, np.random.Generator], np.ndarray]
    intervals: list | None = None
    finite: np.ndarray | None = None
    exhaustive: bool = False
    description: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.bounds.shape[0])

    def __contains__(self, x) -> bool:
        return bool(self.contains(as_point(x)[None, :])[0])

    def member(self, pts) -> np.ndarray:
        return np.asarray(self.contains(as_batch(pts, self.dim)), dtype=bool)

    def sample(self, n: int, seed=0) -> np.ndarray:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        out = np.asarray(self.sampler(n, rng), dtype=float).reshape(n, self.dim)
        if n and out.shape[0] == 0:
            raise EmptyRegion(f"region {self.name} yielded no samples")
        return out

    def project(self, pts: np.ndarray) -> np.ndarray | None:
        """Nearest member for each row, or None if the region has no simple form."""
        pts = as_batch(pts, self.dim)
        if self.finite is not None and self.exhaustive:
            diff = np.abs(pts[:, None, :] - self.finite[None, :, :]).max(axis=-1)
            return self.finite[np.argmin(diff, axis=1)]
        if self.intervals is not None:
            x = pts[:, 0]
            best = np.full_like(x, np.nan)
            gap = np.full_like(x, np.inf)
            for lo, hi in self.intervals:
                c = np.clip(x, lo, hi)
                g = np.abs(c - x)
                take = g < gap
                best[take], gap[take] = c[take], g[take]
            return best[:, None]
        if "box" in self.description:
            b = self.bounds
            return np.clip(pts, b[:, 0], b[:, 1])
        return None

    # constructors

    @staticmethod
    def interval(name: str, lo: float, hi: float) -> "Region":
        return Region.union(name, [(lo, hi)])

    @staticmethod
    def union(name: str, intervals) -> "Region":
        """Finite union of closed 1-D intervals."""
        ivs = sorted((float(lo), float(hi)) for lo, hi in intervals)
        if not ivs:
            raise EmptyRegion(f"region {name} has no intervals")
        for lo, hi in ivs:
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise EmptyRegion(f"region {name}: bad interval [{lo}, {hi}]")
        lows = np.array([lo for lo, _ in ivs])
        highs = np.array([hi for _, hi in ivs])
        lengths = highs - lows

        def contains(p):
            x = p[:, 0:1]
            slack = MEMBER_SLACK * (1.0 + np.abs(x))
            return np.any((x >= lows - slack) & (x <= highs + slack), axis=1) & (p.shape[1] == 1)

        ends = np.unique(np.concatenate([lows, highs]))

        def sampler(n, rng):
            head = ends[:n]
            k = n - head.size
            if k <= 0:
                return head[:, None]
            if lengths.sum() > 0:
                which = rng.choice(len(ivs), size=k, p=lengths / lengths.sum())
            else:
                which = rng.integers(0, len(ivs), size=k)
            draws = lows[which] + rng.uniform(0.0, 1.0, size=k) * lengths[which]
            return np.concatenate([head, draws])[:, None]

        finite = ends[:, None] if np.all(lengths == 0) else None
        return Region(
            name,
            contains,
            np.array([[lows.min(), highs.max()]]),
            sampler,
            intervals=ivs,
            finite=finite,
            exhaustive=finite is not None,
            description={"intervals": [list(iv) for iv in ivs]},
        )

    @staticmethod
    def points(name: str, pts) -> "Region":
        """Finite point set in any dimension."""
        arr = np.asarray(pts, dtype=float)
        if arr.ndim <= 1:
            arr = arr.reshape(-1, 1)
        if arr.shape[0] == 0:
            raise EmptyRegion(f"region {name} has no points")
        if not np.all(np.isfinite(arr)):
            raise EmptyRegion(f"region {name} has non-finite points")
        arr = np.unique(arr, axis=0)

        def contains(p):
            if p.shape[1] != arr.shape[1]:
                raise DimensionMismatch(f"region {name} has dimension {arr.shape[1]}")
            slack = MEMBER_SLACK * (1.0 + np.abs(p[:, None, :]))
            return np.any(np.all(np.abs(p[:, None, :] - arr[None, :, :]) <= slack, axis=-1), axis=1)

        def sampler(n, rng):
            head = arr[:n]
            k = n - head.shape[0]
            if k <= 0:
                return head
            return np.concatenate([head, arr[rng.integers(0, arr.shape[0], size=k)]])

        bounds = np.stack([arr.min(axis=0), arr.max(axis=0)], axis=1)
        ivs = [(float(v), float(v)) for v in arr[:, 0]] if arr.shape[1] == 1 else None
        return Region(
            name, contains, bounds, sampler, intervals=ivs, finite=arr, exhaustive=True,
            description={"points": arr.tolist()},
        )

    @staticmethod
    def box(name: str, bounds) -> "Region":
        """Axis-aligned box ``[lo_i, hi_i]`` in R^dim."""
        b = np.asarray(bounds, dtype=float).reshape(-1, 2)
        if np.any(b[:, 0] > b[:, 1]):
            raise EmptyRegion(f"region {name} has an empty box")
        if b.shape[0] == 1:
            return Region.interval(name, b[0, 0], b[0, 1])

        def contains(p):
            slack = MEMBER_SLACK * (1.0 + np.abs(p))
            return np.all((p >= b[:, 0] - slack) & (p <= b[:, 1] + slack), axis=1)

        corners = np.array(np.meshgrid(*b, indexing="ij")).reshape(b.shape[0], -1).T

        def sampler(n, rng):
            head = corners[:n]
            k = n - head.shape[0]
            if k <= 0:
                return head
            return np.concatenate([head, rng.uniform(b[:, 0], b[:, 1], size=(k, b.shape[0]))])

        return Region(name, contains, b, sampler, description={"box": b.tolist()})

    @staticmethod
    def lattice(name: str, step: float, offset: float, n_min: int, n_max: int) -> "Region":
        """Points ``offset + n*step`` for integers ``n >= n_min``.

        Membership admits the whole half-infinite progression so that images
        under affine maps can be classified. ``n_max`` only truncates the
        member list used for sampling and brute-force distance.
        """
        if step <= 0 or n_max < n_min:
            raise EmptyRegion(f"region {name}: need step > 0 and n_max >= n_min")
        members = offset + step * np.arange(n_min, n_max + 1, dtype=float)

        def contains(p):
            q = (p[:, 0] - offset) / step
            k = np.rint(q)
            return (np.abs(q - k) <= 1e-9 * (1.0 + np.abs(q))) & (k >= n_min) & (p.shape[1] == 1)

        def sampler(n, rng):
            head = members[:n]
            k = n - head.size
            if k <= 0:
                return head[:, None]
            return np.concatenate([head, members[rng.integers(0, members.size, size=k)]])[:, None]

        return Region(
            name,
            contains,
            np.array([[members[0], members[-1]]]),
            sampler,
            intervals=[(float(v), float(v)) for v in members],
            finite=members[:, None],
            exhaustive=False,
            description={"lattice": {"step": step, "offset": offset, "n_min": n_min, "n_max": n_max}},
        )


# ---------------------------------------------------------------------------
# three-set distance


@dataclass
class DistanceEstimate:
    """Best value found for inf G(a,b,c), with the triple achieving it.

    ``exact`` marks a brute-force answer over finite member lists;
    ``refined`` marks that local refinement ran to its step tolerance.
    """

    value: float
    argmin: tuple
    budget_used: int
    refined: bool
    exact: bool = False

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "argmin": [np.asarray(p).tolist() for p in self.argmin],
            "budget_used": self.budget_used,
            "refined": self.refined,
            "exact": self.exact,
        }


def _brute_force(G: GMetric, pa, pb, pc, chunk: int = 1 << 18):
    best, arg = math.inf, None
    nb, nc = pb.shape[0], pc.shape[0]
    per_a = max(1, chunk // max(1, nb * nc))
    for s in range(0, pa.shape[0], per_a):
        blk = pa[s : s + per_a]
        ia, ib, ic = np.meshgrid(np.arange(blk.shape[0]), np.arange(nb), np.arange(nc), indexing="ij")
        vals = G.fn(blk[ia.ravel()], pb[ib.ravel()], pc[ic.ravel()])
        i = int(np.argmin(vals))
        if vals[i] < best:
            best = float(vals[i])
            arg = (blk[ia.ravel()[i]].copy(), pb[ib.ravel()[i]].copy(), pc[ic.ravel()[i]].copy())
    return best, arg


def _golden(f, lo: float, hi: float, tol: float):
    """Minimise a unimodal scalar function on [lo, hi]; returns (x, f(x), evals)."""
    if hi - lo <= tol:
        x = 0.5 * (lo + hi) if hi > lo else lo
        return x, f(x), 1
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
        evals += 1
    # endpoints matter for piecewise-linear G, whose minimum often sits there
    cands = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    fx, x = min(cands)
    return x, fx, evals + 2


def _line_min(f, intervals, tol: float):
    best = (math.inf, None)
    evals = 0
    for lo, hi in intervals:
        if lo == hi:
            v = f(lo)
            evals += 1
            if v < best[0]:
                best = (v, lo)
            continue
        x, v, k = _golden(f, lo, hi, tol)
        evals += k
        if v < best[0]:
            best = (v, x)
    return best[1], best[0], evals


def _refine(G: GMetric, regions, start, tol: float, max_sweeps: int = 200):
    """Coordinate descent over the three interval-form regions."""
    pts = [float(p[0]) for p in start]

    def value(p):
        return G(p[0], p[1], p[2])

    cur = value(pts)
    evals = 1
    for _ in range(max_sweeps):
        prev = cur
        moved = 0.0
        for i, reg in enumerate(regions):
            def f(t, i=i):
                q = list(pts)
                q[i] = t
                return value(q)

            x, v, k = _line_min(f, reg.intervals, tol)
            evals += k
            if v <= cur:
                moved = max(moved, abs(x - pts[i]))
                pts[i], cur = x, v
        if prev - cur <= tol * (1.0 + abs(cur)) or moved <= tol:
            return pts, cur, evals, True
    return pts, cur, evals, False


def g_set_distance(
    G: GMetric,
    A: Region,
    B: Region,
    C: Region,
    budget: int = 100_000,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    strict: bool = False,
) -> DistanceEstimate:
    """Upper bound on inf G(a,b,c) over A x B x C, with a witness triple.

    Exhaustive finite regions are brute-forced when the product fits the
    budget. Otherwise a seeded grid, plus triples obtained by projecting each
    sample onto all three regions, seeds a coordinate-descent polish on the
    line. Without an interval description the coarse value is returned with
    ``refined=False``; ``strict=True`` turns that into an exception.
    """
    if budget < 27:
        raise ValueError("budget must be at least 27")
    regions = (A, B, C)
    if len({r.dim for r in regions}) != 1:
        raise DimensionMismatch("regions have different dimensions")
    finite = [r.finite if (r.finite is not None) else None for r in regions]
    if all(f is not None for f in finite):
        sizes = [f.shape[0] for f in finite]
        if math.prod(sizes) <= budget:
            value, arg = _brute_force(G, *finite)
            return DistanceEstimate(value, arg, math.prod(sizes), True, exact=True)

    rng = np.random.default_rng(seed)
    m = max(3, int((budget / 2) ** (1.0 / 3.0)))
    samples = [r.sample(m, rng) for r in regions]
    for r, s in zip(regions, samples):
        if s.shape[0] == 0:
            raise EmptyRegion(f"region {r.name} yielded no samples")
    value, arg = _brute_force(G, *samples)
    used = m**3

    pool = np.concatenate(samples)
    projected = [r.project(pool) for r in regions]
    if all(p is not None for p in projected):
        vals = G.fn(*projected)
        used += vals.size
        i = int(np.argmin(vals))
        if vals[i] < value:
            value = float(vals[i])
            arg = tuple(p[i].copy() for p in projected)

    can_refine = A.dim == 1 and all(r.intervals is not None for r in regions)
    if not can_refine:
        est = DistanceEstimate(value, arg, used, False)
        if strict:
            raise BudgetExhaustedWithoutRefinement("no interval form to refine on", est)
        return est

    pts, v, evals, ok = _refine(G, regions, arg, tol)
    used += evals
    if v <= value:
        value, arg = v, tuple(np.array([p]) for p in pts)
    est = DistanceEstimate(float(value), arg, used, ok)
    if strict and not ok:
        raise BudgetExhaustedWithoutRefinement("refinement did not converge", est)
    return est


# ---------------------------------------------------------------------------
# proximal triples


@dataclass
class ProximalTriple:
    """Sampled members of each region that take part in a near-optimal triple."""

    retained: dict
    samples: dict
    threshold: float
    distance: float
    g: GMetric

    @property
    def a0(self) -> np.ndarray:
        return self.retained["A"]

    @property
    def b0(self) -> np.ndarray:
        return self.retained["B"]

    @property
    def c0(self) -> np.ndarray:
        return self.retained["C"]


def proximal_triple(
    G: GMetric,
    A: Region,
    B: Region,
    C: Region,
    dist: DistanceEstimate,
    threshold: float = 1e-6,
    budget: int = 20_000,
    samples_per_region: int = 40,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
) -> ProximalTriple:
    """Keep each sampled point whose best completion is within ``threshold`` of the distance."""
    regions = {"A": A, "B": B, "C": C}
    rng = np.random.default_rng(seed)
    cutoff = dist.value + threshold + tol * (1.0 + abs(dist.value))
    per_call = max(27, budget // (3 * samples_per_region))
    retained, drawn = {}, {}
    for slot, (label, reg) in enumerate(regions.items()):
        pts = reg.finite if reg.exhaustive else reg.sample(samples_per_region, rng)
        if pts.shape[0] == 0:
            raise EmptyRegion(f"region {label} yielded no samples")
        keep = []
        for p in pts:
            single = Region.points(label, p[None, :])
            trio = [A, B, C]
            trio[slot] = single
            est = g_set_distance(G, *trio, budget=per_call, tol=tol, seed=seed)
            keep.append(est.value <= cutoff)
        drawn[label] = pts
        retained[label] = pts[np.array(keep, dtype=bool)]
    return ProximalTriple(retained, drawn, threshold, dist.value, G)


def is_proximal(A: Region, B: Region, C: Region, pt: ProximalTriple, coverage_tol: float = 1e-6) -> bool:
    """True iff every sampled member of each region is near a retained one in the associated metric."""
    d = metric_from_g(pt.g)
    for label in ("A", "B", "C"):
        drawn, kept = pt.samples[label], pt.retained[label]
        if kept.shape[0] == 0:
            return False
        n, k = drawn.shape[0], kept.shape[0]
        gaps = d.fn(np.repeat(drawn, k, axis=0), np.tile(kept, (n, 1))).reshape(n, k)
        if np.any(gaps.min(axis=1) > coverage_tol):
            return False
    return True
