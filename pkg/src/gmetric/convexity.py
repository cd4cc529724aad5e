"""Convex structures on a G-metric space and a sampled uniform-convexity probe."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import DEFAULT_TOL, AxiomReport, CheckResult, GMetric, as_batch, as_point
from .errors import BadWeights, EmptyRegion, EmptySampleSet, NoAdmissibleConfigurations
from .regions import Region

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class ConvexStructure:
    """A three-point combiner.

    ``combiner(x, y, z, weights)`` takes ``(n, dim)`` point arrays and an
    ``(n, 3)`` weight array and returns the ``(n, dim)`` combined points.
    """

    combiner: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    name: str = "W"


def _centroid(x, y, z, w):
    return w[:, 0:1] * x + w[:, 1:2] * y + w[:, 2:3] * z


CENTROID = ConvexStructure(_centroid, "centroid")


def validate_weights(weights) -> np.ndarray:
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    if w.shape[-1] != 3:
        raise BadWeights(f"need three weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise BadWeights(f"weights must be finite and nonnegative: {w.tolist()[:3]}")
    if np.any(np.abs(w.sum(axis=1) - 1.0) > WEIGHT_TOL):
        raise BadWeights("weights must sum to 1")
    return w


def combine(W: ConvexStructure, x, y, z, weights):
    """Combine three points; a single point in gives a single point out."""
    w = validate_weights(weights)
    single = np.ndim(weights) == 1
    if single:
        pts = [as_point(p)[None, :] for p in (x, y, z)]
    else:
        dim = np.shape(x)[-1] if np.ndim(x) == 2 else 1
        pts = [as_batch(p, dim) for p in (x, y, z)]
    out = np.asarray(W.combiner(*pts, w), dtype=float)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# convex-structure inequality


def _corner_and_edge_weights() -> np.ndarray:
    eye = np.eye(3)
    halves = np.array([p for p in set(itertools.permutations((0.5, 0.5, 0.0)))], dtype=float)
    halves = halves[np.lexsort(halves.T[::-1])]
    return np.concatenate([eye, halves, np.full((1, 3), 1.0 / 3.0)])


def sample_convex_configs(n: int, low=-1.0, high=1.0, dim: int = 1, seed: int = 0):
    """Seeded ``(points, weights)`` for the convex-structure inequality.

    ``points`` has shape ``(n, 5, dim)`` holding x, y, z, u, v. The leading
    rows pair each unit weight vector with u = v placed on the selected
    point, the configuration where any combiner that ignores its weights
    is exposed.
    """
    if n <= 0:
        raise EmptySampleSet("need at least one sample")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(low, high, size=(n, 5, dim))
    weights = rng.dirichlet(np.ones(3), size=n)
    fixed = _corner_and_edge_weights()
    k = min(n, fixed.shape[0])
    weights[:k] = fixed[:k]
    for row in range(min(n, 3)):
        pts[row, 3] = pts[row, row]
        pts[row, 4] = pts[row, row]
    return pts, weights


@dataclass
class ConvexWitness:
    points: tuple
    weights: tuple
    combined: list
    lhs: float
    rhs: float

    def to_dict(self) -> dict:
        return {
            "points": [np.asarray(p).tolist() for p in self.points],
            "weights": list(self.weights),
            "combined": self.combined,
            "lhs": self.lhs,
            "rhs": self.rhs,
        }


def convex_inequality(G: GMetric, W: ConvexStructure, pts: np.ndarray, weights: np.ndarray):
    """Both sides of the weighted inequality for each configuration."""
    x, y, z, u, v = (pts[:, i, :] for i in range(5))
    m = W.combiner(x, y, z, weights)
    lhs = G.fn(u, v, m)
    rhs = weights[:, 0] * G.fn(u, v, x) + weights[:, 1] * G.fn(u, v, y) + weights[:, 2] * G.fn(u, v, z)
    return lhs, rhs, m


def check_convex_structure(G: GMetric, W: ConvexStructure, samples, tol: float = DEFAULT_TOL, max_witnesses: int = 5) -> AxiomReport:
    """Sampled check of ``G(u,v,W(x,y,z;l)) <= sum_i l_i G(u,v,p_i)``.

    ``samples`` is a ``(points, weights)`` pair as produced by
    :func:`sample_convex_configs`.
    """
    pts, weights = samples
    pts = np.asarray(pts, dtype=float)
    if pts.size == 0:
        raise EmptySampleSet("no samples supplied")
    if pts.ndim == 2:
        pts = pts[:, :, None]
    weights = validate_weights(weights)
    lhs, rhs, m = convex_inequality(G, W, pts, weights)
    bad = lhs - rhs > tol * (1.0 + np.maximum(np.abs(lhs), np.abs(rhs)))
    excess = lhs - rhs
    witnesses = []
    for i in np.flatnonzero(bad)[np.argsort(-excess[bad], kind="stable")][:max_witnesses]:
        witnesses.append(
            ConvexWitness(
                tuple(pts[i, j].copy() for j in range(5)),
                tuple(float(t) for t in weights[i]),
                m[i].tolist(),
                float(lhs[i]),
                float(rhs[i]),
            )
        )
    res = CheckResult("convex_structure", not bad.any(), int(pts.shape[0]), float(excess.max()), witnesses)
    return AxiomReport({"convex_structure": res}, int(pts.shape[0]), tol)


def check_g_convex_set(
    W: ConvexStructure, R: Region, samples: int = 30, weight_samples: int = 20, seed: int = 0
) -> tuple[bool, dict | None]:
    """Whether combinations of sampled members of ``R`` stay in ``R``.

    Returns the first escaping combination as a witness.
    """
    rng = np.random.default_rng(seed)
    members = R.sample(samples, rng)
    if members.shape[0] == 0:
        raise EmptyRegion(f"region {R.name} yielded no samples")
    members = np.unique(members, axis=0)
    weights = np.concatenate([_corner_and_edge_weights(), rng.dirichlet(np.ones(3), size=weight_samples)])
    k = members.shape[0]
    if k**3 <= 20_000:
        idx = np.array(list(itertools.product(range(k), repeat=3)))
    else:
        idx = rng.integers(0, k, size=(20_000, 3))
    n, m = idx.shape[0], weights.shape[0]
    x = np.repeat(members[idx[:, 0]], m, axis=0)
    y = np.repeat(members[idx[:, 1]], m, axis=0)
    z = np.repeat(members[idx[:, 2]], m, axis=0)
    w = np.tile(weights, (n, 1))
    out = W.combiner(x, y, z, w)
    inside = R.member(out)
    if inside.all():
        return True, None
    i = int(np.flatnonzero(~inside)[0])
    return False, {
        "points": [x[i].tolist(), y[i].tolist(), z[i].tolist()],
        "weights": w[i].tolist(),
        "combined": out[i].tolist(),
    }


# ---------------------------------------------------------------------------
# uniform convexity


@dataclass
class ModulusEstimate:
    """Sampled uniform-convexity modulus for one epsilon.

    ``alpha_hat`` is the smallest observed relative margin
    ``1 - G(u,v,centroid)/r`` over admissible configurations, clipped at 0
    and minimised over the probed radii. ``tightest`` is the configuration
    that attained it.
    """

    epsilon: float
    alpha_hat: float
    samples_used: int
    admissible: int
    per_r: dict = field(default_factory=dict)
    violated: dict | None = None
    tightest: dict | None = None

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "alpha_hat": self.alpha_hat,
            "samples_used": self.samples_used,
            "admissible": self.admissible,
            "per_r": {repr(k): v for k, v in self.per_r.items()},
            "violated": self.violated,
            "tightest": self.tightest,
        }


def _window(G: GMetric, r: float, low: np.ndarray, span: float) -> float:
    """Largest h <= span with G(c, c, c + h*e) <= r along every axis.

    Bisection on a monotone scalar; it gives the natural sampling scale for
    configurations that satisfy the radius constraint.
    """
    c = low[None, :]
    e = np.ones_like(c)

    def g(h):
        return float(G.fn(c, c, c + h * e)[0])

    if g(span) <= r:
        return span
    lo, hi = 0.0, span
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if g(mid) <= r:
            lo = mid
        else:
            hi = mid
    return lo


def draw_configs(G: GMetric, r: float, n: int, bounds, seed: int) -> np.ndarray:
    """Seeded ``(n, 5, dim)`` configurations x, y, z, u, v sized to radius ``r``.

    Each configuration lives in a window whose side is the radius scale of G.
    In half of the rows two of x, y, z are pinned to opposite window corners,
    which is where the separation constraint is tight. All randomness comes
    from one uniform block, so a longer run extends a shorter one.
    """
    b = np.asarray(bounds, dtype=float).reshape(-1, 2)
    dim = b.shape[0]
    lo_box, hi_box = b[:, 0], b[:, 1]
    span = float(np.min(hi_box - lo_box))
    h = _window(G, r, lo_box, span)
    rng = np.random.default_rng(seed)
    U = rng.uniform(0.0, 1.0, size=(n, 7, dim))
    base = lo_box + U[:, 0, :] * (hi_box - lo_box - h)
    pts = base[:, None, :] + U[:, 1:6, :] * h
    pin = U[:, 6, 0] < 0.5
    # pinned rows have U < 0.5, so this picks one of the six role orders
    perm = (U[:, 6, 0] * 12).astype(int) % 6
    orders = np.array(list(itertools.permutations(range(3))))
    lo_w, hi_w = base, base + h
    for row in np.flatnonzero(pin):
        i, j, _ = orders[perm[row]]
        pts[row, i] = lo_w[row]
        pts[row, j] = hi_w[row]
    return np.clip(pts, lo_box, hi_box)


def estimate_uniform_convexity(
    G: GMetric,
    W: ConvexStructure,
    epsilon: float,
    r_samples=(0.5, 1.0, 2.0),
    config_samples: int = 100_000,
    bounds=((-1.0, 1.0),),
    seed: int = 0,
    tol: float = DEFAULT_TOL,
) -> ModulusEstimate:
    """Sampled modulus of uniform convexity at equal weights.

    A configuration is admissible when G(u,v,p) <= r for p in x, y, z,
    G(x,y,z) >= r*epsilon, and x, y, z are pairwise separated by more than
    ``tol * (1 + r)``. Both inequalities are compared with a relative slack
    of ``tol`` so that configurations pinned to window corners are not lost
    to rounding.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    thirds = np.full((config_samples, 3), 1.0 / 3.0)
    per_r = {}
    alpha = np.inf
    admissible_total = 0
    violated = tightest = None
    for k, r in enumerate(r_samples):
        r = float(r)
        pts = draw_configs(G, r, config_samples, bounds, seed + k)
        x, y, z, u, v = (pts[:, i, :] for i in range(5))
        slack = tol * (1.0 + r)
        sep = tol * (1.0 + r)
        ok = (
            (G.fn(u, v, x) <= r + slack)
            & (G.fn(u, v, y) <= r + slack)
            & (G.fn(u, v, z) <= r + slack)
            & (G.fn(x, y, z) >= r * epsilon - slack)
            & (np.max(np.abs(x - y), axis=-1) > sep)
            & (np.max(np.abs(y - z), axis=-1) > sep)
            & (np.max(np.abs(x - z), axis=-1) > sep)
        )
        count = int(ok.sum())
        admissible_total += count
        if count == 0:
            per_r[r] = None
            continue
        m = W.combiner(x[ok], y[ok], z[ok], thirds[:count])
        margin = 1.0 - G.fn(u[ok], v[ok], m) / r
        i = int(np.argmin(margin))
        per_r[r] = max(0.0, float(margin[i]))
        config = {
            "r": r,
            "points": pts[ok][i].tolist(),
            "margin": float(margin[i]),
        }
        if margin[i] < -tol and violated is None:
            violated = config
        if per_r[r] < alpha:
            alpha, tightest = per_r[r], config
    if admissible_total == 0:
        raise NoAdmissibleConfigurations(
            f"no sampled configuration satisfies the constraints for epsilon={epsilon}"
        )
    return ModulusEstimate(
        float(epsilon),
        float(alpha),
        config_samples * len(r_samples),
        admissible_total,
        per_r,
        violated,
        tightest,
    )
