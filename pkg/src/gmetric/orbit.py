"""The iteration T x_n = S x_{n+1} = K x_{n+2} and its diagnostics.

Iterates cycle through the regions A, C, B, A, C, B, ... Each new iterate
is a preimage under S of the previous T-image. When S leaves a choice
(several roots, or a whole flat piece of roots), the root whose K-image is
closest to T x_{n-1} wins, so the K-relation is honoured as far as S
permits; remaining ties go to the root nearest the current iterate. The
K-relation mismatch is kept as a trace instead of being assumed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import GMetric, metric_from_g
from .errors import (
    InverseSolveFailed,
    InverseUnavailable,
    MaxStepsExceeded,
    OrbitStalled,
    OrbitTooShort,
    RegionViolation,
    SequenceTooShort,
)
from .inverse import find_roots
from .mappings import ROLE_TARGETS, RlnTriple, SelfMap

PHASES = ("A", "C", "B")
NEXT = ROLE_TARGETS["left_cyclic"]


@dataclass
class SolveConfig:
    max_steps: int = 200
    residual_tol: float = 1e-12
    stop_tol: float = 1e-8
    bracket_subdivisions: int = 64
    cauchy_tol: float = 1e-6
    cauchy_window: int = 3
    stall_tol: float = 1e-12

    def __post_init__(self):
        if self.max_steps < 3:
            raise ValueError("max_steps must be at least 3")
        for name in ("residual_tol", "stop_tol", "cauchy_tol", "stall_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.bracket_subdivisions < 1 or self.cauchy_window < 3:
            raise ValueError("bracket_subdivisions >= 1 and cauchy_window >= 3 required")


@dataclass
class Orbit:
    """Iterates with their region labels and the diagnostic traces."""

    points: list
    tags: list
    traces: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)

    def phase(self, label: str) -> np.ndarray:
        return np.array([p for p, t in zip(self.points, self.tags) if t == label])

    def to_dict(self) -> dict:
        return {
            "points": [np.asarray(p).tolist() for p in self.points],
            "tags": list(self.tags),
            "traces": {k: list(map(float, v)) for k, v in self.traces.items()},
        }


def _pt(x) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(1, -1)


def _roots(m: SelfMap, label: str, triple: RlnTriple, target, cfg: SolveConfig, hints=()):
    region = triple.regions[label]
    d = metric_from_g(triple.g)
    target = np.asarray(target, dtype=float).reshape(-1)
    if label in m.inverses:
        p = m.inverses[label](target, region)
        if p is None:
            return np.empty((0, target.size))
        return _pt(p)
    if region.dim != 1 or region.intervals is None:
        raise InverseUnavailable(f"map {m.label} needs an explicit inverse on region {label}")

    def f(c):
        return m(c[:, None], label)[:, 0]

    def residual(v, t):
        v = np.asarray(v, dtype=float)
        return d.fn(v[:, None], np.full((v.size, 1), t))

    roots = find_roots(f, float(target[0]), region.intervals, residual, cfg.residual_tol, cfg.bracket_subdivisions, hints)
    ok = roots.residuals <= cfg.residual_tol
    return roots.points[ok][:, None]


def orbit_step(
    triple: RlnTriple,
    x_n,
    phase: str,
    cfg: SolveConfig | None = None,
    prev_target=None,
    hint=None,
    index: int = 0,
):
    """Advance one step from ``x_n`` in region ``phase``.

    Returns ``(x_{n+1}, x_{n+2})`` where ``S x_{n+1} = T x_n`` and
    ``K x_{n+2} = T x_n``. ``prev_target`` is ``T x_{n-1}``, used to pick
    among several S-preimages; ``hint`` is an extra candidate abscissa.
    """
    cfg = cfg or SolveConfig()
    d = metric_from_g(triple.g)
    x_n = _pt(x_n)
    target = triple.t(x_n, phase)
    nxt, nxt2 = NEXT[phase], NEXT[NEXT[phase]]

    hints = [float(x_n[0, 0])] if x_n.shape[1] == 1 else []
    if hint is not None and np.size(hint) == 1:
        hints.append(float(np.asarray(hint).ravel()[0]))
    cands = _roots(triple.s, nxt, triple, target, cfg, hints)
    if cands.shape[0] == 0:
        raise InverseSolveFailed(
            f"no preimage of T x_{index} under S in region {nxt}", index=index + 1, target=target[0].tolist()
        )
    near = d.fn(cands, np.repeat(x_n, cands.shape[0], axis=0))
    if prev_target is not None:
        kgap = d.fn(triple.k(cands, nxt), np.repeat(_pt(prev_target), cands.shape[0], axis=0))
    else:
        kgap = np.zeros(cands.shape[0])
    x1 = cands[np.lexsort((near, kgap))[0]][None, :]
    if not triple.regions[nxt].member(x1)[0]:
        raise RegionViolation(f"iterate {index + 1} left region {nxt}", index=index + 1, point=x1[0].tolist())

    kc = _roots(triple.k, nxt2, triple, target, cfg, [float(x1[0, 0])] if x1.shape[1] == 1 else [])
    if kc.shape[0] == 0:
        raise InverseSolveFailed(
            f"no preimage of T x_{index} under K in region {nxt2}", index=index + 2, target=target[0].tolist()
        )
    x2 = kc[np.argmin(d.fn(kc, np.repeat(x1, kc.shape[0], axis=0)))][None, :]
    return x1[0], x2[0]


# ---------------------------------------------------------------------------
# traces


def compute_traces(triple: RlnTriple, points, tags) -> dict:
    """Every diagnostic sequence of a finished orbit."""
    G = triple.g
    d = metric_from_g(G)
    X = np.array([np.asarray(p, dtype=float).reshape(-1) for p in points])
    n = X.shape[0]
    T = np.array([triple.t(X[i : i + 1], tags[i])[0] for i in range(n)])
    S = np.array([triple.s(X[i : i + 1], tags[i])[0] for i in range(n)])
    K = np.array([triple.k(X[i : i + 1], tags[i])[0] for i in range(n)])
    full = n // 3
    i0 = 3 * np.arange(full)
    tr = {
        "t_collapse": G.fn(T[i0], T[i0 + 1], T[i0 + 2]) if full else np.empty(0),
        "k_distance": G.fn(K[i0], K[i0 + 1], K[i0 + 2]) if full else np.empty(0),
        "s_distance": G.fn(S[i0], S[i0 + 1], S[i0 + 2]) if full else np.empty(0),
        "s_residual": d.fn(S[1:], T[:-1]) if n > 1 else np.empty(0),
        "relation_gap": d.fn(K[2:], T[:-2]) if n > 2 else np.empty(0),
    }
    for name, off in (("A", 0), ("C", 1), ("B", 2)):
        j = np.arange(off, n - 6, 3)
        tr[f"triple_collapse_{name}"] = G.fn(K[j], K[j + 3], K[j + 6]) if j.size else np.empty(0)
    # T-chain values G(T x_m, T x_{m+1}, T x_{m+2}) for every m
    tr["t_chain"] = G.fn(T[:-2], T[1:-1], T[2:]) if n > 2 else np.empty(0)
    return {k: np.asarray(v, dtype=float) for k, v in tr.items()}


def _check_start(triple: RlnTriple, x0):
    x0 = _pt(x0)
    if not triple.regions["A"].member(x0)[0]:
        raise RegionViolation("starting point is not in A", index=0, point=x0[0].tolist())
    return x0[0]


def _iterate(triple: RlnTriple, x0, cfg: SolveConfig):
    """Yield ``(points, tags)`` after each new iterate."""
    points, tags = [_check_start(triple, x0)], ["A"]
    yield points, tags
    prev_target, hint = None, None
    for n in range(cfg.max_steps):
        phase = tags[-1]
        try:
            x1, x2 = orbit_step(triple, points[-1], phase, cfg, prev_target, hint, index=n)
        except (InverseSolveFailed, RegionViolation) as err:
            err.orbit = Orbit(list(points), list(tags), compute_traces(triple, points, tags))
            raise
        prev_target = triple.t(_pt(points[-1]), phase)[0]
        hint = x2
        points.append(x1)
        tags.append(NEXT[phase])
        yield points, tags


def generate_orbit(triple: RlnTriple, x0, cfg: SolveConfig | None = None) -> Orbit:
    """Run ``cfg.max_steps`` steps from ``x0`` in A and attach the traces."""
    cfg = cfg or SolveConfig()
    points = tags = None
    for points, tags in _iterate(triple, x0, cfg):
        pass
    return Orbit(list(points), list(tags), compute_traces(triple, points, tags))


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class RateReport:
    r: float
    gabc: float
    t_ok: bool
    k_ok: bool
    worst_t: float
    worst_k: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.t_ok and self.k_ok

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "gabc": self.gabc,
            "t_ok": self.t_ok,
            "k_ok": self.k_ok,
            "worst_t_excess": self.worst_t,
            "worst_k_excess": self.worst_k,
            "tol": self.tol,
        }


def rate_envelopes(orbit: Orbit, r: float, gabc: float):
    """Geometric bounds for the T-collapse and K-distance traces at each index."""
    t, k = orbit.traces["t_collapse"], orbit.traces["k_distance"]
    p = r ** (3.0 * np.arange(t.size))
    return p * t[0], p * k[0] + (1.0 - p) * gabc


def check_rate_bounds(orbit: Orbit, r: float, gabc: float = 0.0, tol: float = 1e-9) -> RateReport:
    """Compare both traces with their geometric envelopes."""
    t, k = orbit.traces["t_collapse"], orbit.traces["k_distance"]
    if t.size < 2:
        raise OrbitTooShort("need at least two complete triples")
    t_env, k_env = rate_envelopes(orbit, r, gabc)
    et, ek = t - t_env, k - k_env
    return RateReport(
        float(r), float(gabc), bool(np.all(et <= tol)), bool(np.all(ek <= tol)), float(et.max()), float(ek.max()), tol
    )


@dataclass
class BoundedWitness:
    x0: list
    y0: list
    M: float
    corollary_max: float
    corollary_ok: bool

    def to_dict(self) -> dict:
        return {"x0": self.x0, "y0": self.y0, "M": self.M, "corollary_max": self.corollary_max, "corollary_ok": self.corollary_ok}


def check_g_bounded(seq, g: GMetric, probe=None, samples: int = 2000, seed: int = 0, tol: float = 1e-9) -> BoundedWitness:
    """M = max G(x_n, x0, y0) and a sampled check that every G(x_n,x_m,x_l) <= 3M."""
    X = np.asarray(seq, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise SequenceTooShort("sequence is empty")
    x0, y0 = (X[0], X[0]) if probe is None else (np.asarray(probe[0], float).reshape(-1), np.asarray(probe[1], float).reshape(-1))
    n = X.shape[0]
    M = float(np.max(g.fn(X, np.repeat(x0[None, :], n, 0), np.repeat(y0[None, :], n, 0))))
    if n**3 <= samples:
        idx = np.array(list(itertools.product(range(n), repeat=3)))
    else:
        idx = np.random.default_rng(seed).integers(0, n, size=(samples, 3))
    top = float(np.max(g.fn(X[idx[:, 0]], X[idx[:, 1]], X[idx[:, 2]])))
    return BoundedWitness(x0.tolist(), y0.tolist(), M, top, top <= 3.0 * M + tol * (1.0 + M))


@dataclass
class CauchyResult:
    ok: bool
    tail_max: float
    window: int
    tol: float

    def to_dict(self) -> dict:
        return {"ok": self.ok, "tail_max": self.tail_max, "window": self.window, "tol": self.tol}


def cauchy_tail(seq, g: GMetric, window: int) -> float:
    X = np.asarray(seq, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    tail = X[-window:]
    idx = np.array(list(itertools.product(range(window), repeat=3)))
    return float(np.max(g.fn(tail[idx[:, 0]], tail[idx[:, 1]], tail[idx[:, 2]])))


def check_cauchy(seq, g: GMetric, tol: float = 1e-6, window: int = 3) -> CauchyResult:
    """Largest G over index triples drawn from the last ``window`` terms."""
    n = np.asarray(seq).shape[0]
    if window < 3 or n <= window:
        raise SequenceTooShort(f"need window >= 3 and more than {window} terms, got {n}")
    top = cauchy_tail(seq, g, window)
    return CauchyResult(top <= tol, top, window, tol)


# ---------------------------------------------------------------------------
# coincidence point


@dataclass
class ConvergenceReport:
    limit: list | None
    final_gap: float
    steps: int
    orbit: Orbit
    rate: RateReport | None = None
    rate_reference: RateReport | None = None
    cauchy: CauchyResult | None = None
    bounded: BoundedWitness | None = None
    stop_reason: str = ""

    def to_dict(self) -> dict:
        return {
            "limit": self.limit,
            "final_gap": self.final_gap,
            "steps": self.steps,
            "stop_reason": self.stop_reason,
            "rate": None if self.rate is None else self.rate.to_dict(),
            "rate_reference": None if self.rate_reference is None else self.rate_reference.to_dict(),
            "cauchy": None if self.cauchy is None else self.cauchy.to_dict(),
            "bounded": None if self.bounded is None else self.bounded.to_dict(),
        }


def coincidence_gap(triple: RlnTriple, p) -> float:
    """G(Kp, Tp, Sp) - G(A,B,C) for p taken from A."""
    p = _pt(p)
    return float(triple.g.fn(triple.k(p, "A"), triple.t(p, "A"), triple.s(p, "A"))[0]) - triple.gabc


def find_coincidence_point(
    triple: RlnTriple,
    x0,
    cfg: SolveConfig | None = None,
    r: float | None = None,
    r_reference: float | None = None,
) -> ConvergenceReport:
    """Iterate from ``x0`` until a phase-A iterate closes the gap.

    Stops when G(Kp,Tp,Sp) - gabc <= stop_tol at a phase-A iterate and the
    K-images of the last ``cauchy_window`` phase-A iterates are within
    ``cauchy_tol`` of each other. Raises :class:`OrbitStalled` when the
    K-distance trace stops moving without closing the gap, and
    :class:`MaxStepsExceeded` when the step budget runs out.
    """
    cfg = cfg or SolveConfig()
    best, best_gap = None, np.inf
    k_hist, still = [], 0
    points = tags = None
    stop = None
    for points, tags in _iterate(triple, x0, cfg):
        n = len(points) - 1
        if tags[-1] != "A":
            continue
        p = points[-1]
        gap = coincidence_gap(triple, p)
        if gap < best_gap:
            best, best_gap = p, gap
        ka = np.array([triple.k(_pt(q), "A")[0] for q in points[::3]])
        if n >= 3:
            kd = float(triple.g.fn(*(triple.k(_pt(points[-4 + j]), tags[-4 + j]) for j in range(3)))[0])
            if k_hist and abs(kd - k_hist[-1]) <= cfg.stall_tol * (1.0 + abs(kd)):
                still += 1
            else:
                still = 0
            k_hist.append(kd)
        tail_ok = ka.shape[0] > cfg.cauchy_window and cauchy_tail(ka, triple.g, cfg.cauchy_window) <= cfg.cauchy_tol
        if gap <= cfg.stop_tol and tail_ok:
            stop = "converged"
            break
        if still >= 3 and gap > cfg.stop_tol:
            orbit = Orbit(list(points), list(tags), compute_traces(triple, points, tags))
            raise OrbitStalled(
                f"K-distance stalled with gap {gap:.3e}", best=np.asarray(best).tolist(), final_gap=best_gap, orbit=orbit
            )
    orbit = Orbit(list(points), list(tags), compute_traces(triple, points, tags))
    if stop is None:
        raise MaxStepsExceeded(
            f"no convergence within {cfg.max_steps} steps (best gap {best_gap:.3e})",
            best=np.asarray(best).tolist(),
            final_gap=best_gap,
            orbit=orbit,
        )
    p = points[-1]
    ka = orbit.phase("A")
    ka = np.array([triple.k(_pt(q), "A")[0] for q in ka])
    report = ConvergenceReport(
        limit=np.asarray(p).tolist(),
        final_gap=coincidence_gap(triple, p),
        steps=len(points) - 1,
        orbit=orbit,
        cauchy=check_cauchy(ka, triple.g, cfg.cauchy_tol, cfg.cauchy_window),
        bounded=check_g_bounded(ka, triple.g),
        stop_reason=stop,
    )
    if orbit.traces["t_collapse"].size >= 2:
        if r is not None and 0.0 < r < 1.0:
            report.rate = check_rate_bounds(orbit, r, triple.gabc)
        if r_reference is not None and 0.0 < r_reference < 1.0:
            report.rate_reference = check_rate_bounds(orbit, r_reference, triple.gabc)
    return report
