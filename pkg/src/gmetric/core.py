"""G-metric evaluation, constructions from ordinary metrics, and sampled checks.

Points are real vectors. A scalar is promoted to a 1-dimensional point and a
1-D array is a single point. Batched evaluation takes arrays of shape
``(n, dim)`` for each argument and returns an array of shape ``(n,)``.

Every check in this module is an inequality ``lhs <= rhs`` (or ``lhs < rhs``
for the strict ones) evaluated over a batch of sample tuples. The inequality
definitions live in a single registry so that a reported witness can be
replayed through exactly the code that produced it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, EmptySampleSet, NonFinitePoint, SequenceTooShort

DEFAULT_TOL = 1e-9
MAX_WITNESSES = 5


# ---------------------------------------------------------------------------
# points


def as_point(x) -> np.ndarray:
    """Return ``x`` as a finite float vector of shape ``(dim,)``."""
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1:
        raise DimensionMismatch(f"a point must be a scalar or 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise NonFinitePoint(f"point has non-finite coordinates: {p.tolist()}")
    return p


def as_batch(x, dim: int | None = None) -> np.ndarray:
    """Return ``x`` as an ``(n, dim)`` float array.

    A 1-D input is read as ``n`` one-dimensional points unless ``dim`` says
    otherwise.
    """
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1) if dim in (None, 1) else a.reshape(1, -1)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected an (n, dim) array, got shape {a.shape}")
    if dim is not None and a.shape[1] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {a.shape[1]}")
    return a


def _same_dim(*arrays: np.ndarray) -> int:
    dims = {a.shape[-1] for a in arrays}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed point dimensions: {sorted(dims)}")
    return dims.pop()


# ---------------------------------------------------------------------------
# metrics and G-metrics


@dataclass(frozen=True)
class Metric:
    """An ordinary metric. ``fn`` maps two ``(n, dim)`` arrays to ``(n,)``."""

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "metric"

    def batch(self, x, y) -> np.ndarray:
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        _same_dim(x, y)
        return np.asarray(self.fn(x, y), dtype=float)

    def __call__(self, x, y) -> float:
        x, y = as_point(x), as_point(y)
        _same_dim(x, y)
        return float(self.fn(x[None, :], y[None, :])[0])


def _abs_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x - y
    if diff.shape[-1] == 1:
        return np.abs(diff[..., 0])
    return np.sqrt(np.sum(diff * diff, axis=-1))


abs_metric = Metric(_abs_distance, "abs")
"""|x - y| on the line, Euclidean distance in higher dimension."""


@dataclass(frozen=True)
class GMetric:
    """A ternary distance. ``fn`` maps three ``(n, dim)`` arrays to ``(n,)``.

    ``symmetric`` caches whether G(x,y,y) = G(x,x,y) is known to hold;
    ``None`` means unknown.
    """

    fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    name: str = "G"
    symmetric: bool | None = None

    def batch(self, x, y, z) -> np.ndarray:
        x, y, z = (np.asarray(a, dtype=float) for a in (x, y, z))
        _same_dim(x, y, z)
        return np.asarray(self.fn(x, y, z), dtype=float)

    def __call__(self, x, y, z) -> float:
        x, y, z = as_point(x), as_point(y), as_point(z)
        _same_dim(x, y, z)
        return float(self.fn(x[None, :], y[None, :], z[None, :])[0])


def g_from_metric_sum(d: Metric, scale: float = 1.0 / 3.0) -> GMetric:
    """``scale * (d(x,y) + d(y,z) + d(x,z))``.

    The three distances are added in sorted order, which makes the value
    bitwise independent of the argument order.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")

    def fn(x, y, z):
        parts = np.sort(np.stack([d.fn(x, y), d.fn(y, z), d.fn(x, z)], axis=-1), axis=-1)
        return scale * ((parts[..., 0] + parts[..., 1]) + parts[..., 2])

    return GMetric(fn, f"sum[{d.name}, scale={scale!r}]", symmetric=True)


def g_from_metric_max(d: Metric) -> GMetric:
    """Largest of the three pairwise distances."""

    def fn(x, y, z):
        return np.maximum(np.maximum(d.fn(x, y), d.fn(y, z)), d.fn(x, z))

    return GMetric(fn, f"max[{d.name}]", symmetric=True)


def metric_from_g(G: GMetric) -> Metric:
    """The associated metric ``G(x,y,y) + G(x,x,y)``."""

    def fn(x, y):
        return G.fn(x, y, y) + G.fn(x, x, y)

    return Metric(fn, f"d[{G.name}]")


# ---------------------------------------------------------------------------
# reports


@dataclass
class Witness:
    """A sample tuple violating one check, with both sides of the inequality."""

    check: str
    points: tuple
    lhs: float
    rhs: float

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "points": [np.asarray(p).tolist() for p in self.points],
            "lhs": self.lhs,
            "rhs": self.rhs,
        }


@dataclass
class CheckResult:
    name: str
    passed: bool
    checked: int
    worst_excess: float
    witnesses: list = field(default_factory=list)

    def merge(self, other: "CheckResult") -> "CheckResult":
        return CheckResult(
            self.name,
            self.passed and other.passed,
            self.checked + other.checked,
            max(self.worst_excess, other.worst_excess),
            self.witnesses + other.witnesses,
        )

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checked": self.checked,
            "worst_excess": self.worst_excess,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


@dataclass
class AxiomReport:
    """Outcome of a batch of sampled checks, keyed by check name."""

    checks: dict
    samples_used: int
    tol: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    @property
    def witnesses(self) -> list:
        return [w for c in self.checks.values() for w in c.witnesses]

    def failed(self) -> list[str]:
        return [name for name, c in self.checks.items() if not c.passed]

    def merge(self, other: "AxiomReport") -> "AxiomReport":
        """Combine reports on disjoint sample batches (fail dominates)."""
        names = list(self.checks) + [n for n in other.checks if n not in self.checks]
        merged = {}
        for n in names:
            a, b = self.checks.get(n), other.checks.get(n)
            merged[n] = a.merge(b) if a is not None and b is not None else (a or b)
        return AxiomReport(merged, self.samples_used + other.samples_used, max(self.tol, other.tol))

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "samples_used": self.samples_used,
            "tol": self.tol,
            "checks": {n: c.to_dict() for n, c in self.checks.items()},
        }


# ---------------------------------------------------------------------------
# inequality registry
#
# Each entry maps (G, pts) to (lhs, rhs, guard) where pts is the tuple of
# (n, dim) arrays x, y, z, a and guard selects the samples the check applies
# to. Strict entries demand lhs < rhs; the others lhs <= rhs within tolerance.


@dataclass(frozen=True)
class Inequality:
    name: str
    arity: int
    strict: bool
    evaluate: Callable


def _sep(p, q) -> np.ndarray:
    return np.max(np.abs(p - q), axis=-1)


def _true(p) -> np.ndarray:
    return np.ones(p.shape[0], dtype=bool)


def _zero(p) -> np.ndarray:
    return np.zeros(p.shape[0])


def _make_registry(tol_guard: float) -> dict:
    # tol_guard is the distinctness threshold used by strict checks
    def diag(G, p):
        x = p[0]
        return np.abs(G.fn(x, x, x)), _zero(x), _true(x)

    def positive(G, p):
        x, y = p[0], p[1]
        return _zero(x), G.fn(x, x, y), _sep(x, y) > tol_guard

    def degenerate_bound(G, p):
        x, y, z = p[0], p[1], p[2]
        return G.fn(x, x, y), G.fn(x, y, z), _sep(z, y) > tol_guard

    def symmetry(G, p):
        x, y, z = p[0], p[1], p[2]
        vals = np.stack(
            [G.fn(x, y, z), G.fn(x, z, y), G.fn(y, x, z), G.fn(y, z, x), G.fn(z, x, y), G.fn(z, y, x)],
            axis=-1,
        )
        hi, lo = vals.max(axis=-1), vals.min(axis=-1)
        return hi, lo, _true(x)

    def rectangle(G, p):
        x, y, z, a = p
        return G.fn(x, y, z), G.fn(x, a, a) + G.fn(a, y, z), _true(x)

    def zero_implies_equal(G, p):
        x, y, z = p[0], p[1], p[2]
        spread = np.maximum(np.maximum(_sep(x, y), _sep(y, z)), _sep(x, z))
        return _zero(x), G.fn(x, y, z), spread > tol_guard

    def split_at_x(G, p):
        x, y, z = p[0], p[1], p[2]
        return G.fn(x, y, z), G.fn(x, x, y) + G.fn(x, x, z), _true(x)

    def doubled_swap(G, p):
        x, y = p[0], p[1]
        return G.fn(x, y, y), 2.0 * G.fn(y, x, x), _true(x)

    def replace_first(G, p):
        x, y, z, a = p
        return G.fn(x, y, z), G.fn(x, a, z) + G.fn(a, y, z), _true(x)

    def two_thirds(G, p):
        x, y, z, a = p
        return G.fn(x, y, z), (2.0 / 3.0) * (G.fn(x, y, a) + G.fn(x, a, z) + G.fn(a, y, z)), _true(x)

    def star(G, p):
        x, y, z, a = p
        return G.fn(x, y, z), G.fn(x, a, a) + G.fn(y, a, a) + G.fn(z, a, a), _true(x)

    def sym_pair(G, p):
        x, y = p[0], p[1]
        u, v = G.fn(x, y, y), G.fn(x, x, y)
        return np.maximum(u, v), np.minimum(u, v), _true(x)

    def _assoc_sum(G, x, y, z):
        d = metric_from_g(G)
        return g_from_metric_sum(d, 1.0 / 3.0).fn(x, y, z)

    def _assoc_max(G, x, y, z):
        return g_from_metric_max(metric_from_g(G)).fn(x, y, z)

    def sandwich_sum_lower(G, p):
        x, y, z = p[0], p[1], p[2]
        return G.fn(x, y, z), _assoc_sum(G, x, y, z), _true(x)

    def sandwich_sum_upper(G, p):
        x, y, z = p[0], p[1], p[2]
        return _assoc_sum(G, x, y, z), 2.0 * G.fn(x, y, z), _true(x)

    def sandwich_max_lower(G, p):
        x, y, z = p[0], p[1], p[2]
        return 0.5 * G.fn(x, y, z), _assoc_max(G, x, y, z), _true(x)

    def sandwich_max_upper(G, p):
        x, y, z = p[0], p[1], p[2]
        return _assoc_max(G, x, y, z), 2.0 * G.fn(x, y, z), _true(x)

    entries = [
        Inequality("axiom_diagonal", 1, False, diag),
        Inequality("axiom_positive", 2, True, positive),
        Inequality("axiom_degenerate_bound", 3, False, degenerate_bound),
        Inequality("axiom_symmetry", 3, False, symmetry),
        Inequality("axiom_rectangle", 4, False, rectangle),
        Inequality("derived_zero_implies_equal", 3, True, zero_implies_equal),
        Inequality("derived_split_at_x", 3, False, split_at_x),
        Inequality("derived_doubled_swap", 2, False, doubled_swap),
        Inequality("derived_replace_first", 4, False, replace_first),
        Inequality("derived_two_thirds", 4, False, two_thirds),
        Inequality("derived_star", 4, False, star),
        Inequality("symmetric_pair", 2, False, sym_pair),
        Inequality("sandwich_sum_lower", 3, False, sandwich_sum_lower),
        Inequality("sandwich_sum_upper", 3, False, sandwich_sum_upper),
        Inequality("sandwich_max_lower", 3, False, sandwich_max_lower),
        Inequality("sandwich_max_upper", 3, False, sandwich_max_upper),
    ]
    return {e.name: e for e in entries}


AXIOMS = (
    "axiom_diagonal",
    "axiom_positive",
    "axiom_degenerate_bound",
    "axiom_symmetry",
    "axiom_rectangle",
)
DERIVED = (
    "derived_zero_implies_equal",
    "derived_split_at_x",
    "derived_doubled_swap",
    "derived_replace_first",
    "derived_two_thirds",
    "derived_star",
)
SANDWICH = ("sandwich_sum_lower", "sandwich_sum_upper", "sandwich_max_lower", "sandwich_max_upper")


def inequality(name: str, tol: float = DEFAULT_TOL) -> Inequality:
    return _make_registry(tol)[name]


def _violations(ineq: Inequality, lhs, rhs, tol: float) -> np.ndarray:
    if ineq.strict:
        return rhs - lhs <= 0.0
    return lhs - rhs > tol * (1.0 + np.maximum(np.abs(lhs), np.abs(rhs)))


def _run_checks(G: GMetric, tuples: np.ndarray, names, tol: float, max_witnesses: int) -> AxiomReport:
    registry = _make_registry(tol)
    n = tuples.shape[0]
    results = {}
    for name in names:
        ineq = registry[name]
        pts = tuple(tuples[:, i, :] for i in range(4))
        lhs, rhs, guard = ineq.evaluate(G, pts)
        bad = guard & _violations(ineq, lhs, rhs, tol)
        excess = np.where(guard, lhs - rhs, -np.inf)
        worst = float(np.max(excess)) if n else float("-inf")
        witnesses = []
        if bad.any():
            idx = np.flatnonzero(bad)
            idx = idx[np.argsort(-excess[idx], kind="stable")][:max_witnesses]
            for i in idx:
                pts_i = tuple(tuples[i, j, :].copy() for j in range(ineq.arity))
                witnesses.append(Witness(name, pts_i, float(lhs[i]), float(rhs[i])))
        results[name] = CheckResult(name, not bad.any(), int(guard.sum()), worst, witnesses)
    return AxiomReport(results, n, tol)


def replay_witness(G: GMetric, witness: Witness, tol: float = DEFAULT_TOL) -> bool:
    """Re-evaluate a witness from scratch; True iff it still violates its check."""
    ineq = inequality(witness.check, tol)
    pts = [as_point(p)[None, :] for p in witness.points]
    while len(pts) < 4:
        pts.append(pts[-1])
    lhs, rhs, guard = ineq.evaluate(G, tuple(pts))
    return bool(guard[0] and _violations(ineq, lhs, rhs, tol)[0])


# ---------------------------------------------------------------------------
# samples


def sample_tuples(
    n: int,
    low: float = -10.0,
    high: float = 10.0,
    dim: int = 1,
    arity: int = 4,
    seed: int = 0,
) -> np.ndarray:
    """Seeded ``(n, arity, dim)`` sample array, uniform in the box ``[low, high]^dim``.

    The first rows are deterministic degenerate cases: all points equal, and
    each pattern with exactly two equal points, so the diagonal and
    two-equal regimes are always exercised.
    """
    if n <= 0:
        raise EmptySampleSet("need at least one sample")
    rng = np.random.default_rng(seed)
    out = rng.uniform(low, high, size=(n, arity, dim))
    patterns = [(0, 0, 0, 0)]
    for i in range(arity):
        for j in range(i + 1, arity):
            pat = list(range(arity))
            pat[j] = i
            patterns.append(tuple(pat))
    # x=x=y style rows for the two-equal regime
    patterns += [(0, 0, 1, 1), (0, 1, 1, 0), (0, 1, 0, 1)][: max(0, arity - 2)]
    for row, pat in enumerate(patterns[: n // 2]):
        out[row] = out[row][list(pat[:arity])]
    return out


def _prepare(samples, dim: int | None = None) -> np.ndarray:
    """Normalise samples to an ``(n, 4, dim)`` array, filling missing slots.

    Triples get a fourth point borrowed from the next sample's first point,
    which keeps the rectangle-type checks meaningful.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise EmptySampleSet("no samples supplied")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise DimensionMismatch(f"samples must be (n, arity[, dim]), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinitePoint("samples contain non-finite coordinates")
    n, arity, d = arr.shape
    if dim is not None and d != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {d}")
    if arity >= 4:
        return arr[:, :4, :]
    cols = [arr[:, i, :] for i in range(arity)]
    while len(cols) < 3:
        cols.append(cols[-1])
    cols.append(np.roll(arr[:, 0, :], -1, axis=0))
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# public checks


def check_g_axioms(G: GMetric, samples, tol: float = DEFAULT_TOL, max_witnesses: int = MAX_WITNESSES) -> AxiomReport:
    """Sampled falsification of the five defining axioms.

    The strict axiom (positivity off the diagonal) only uses samples whose
    points differ by more than ``tol``; so does the degenerate bound, which
    requires ``z != y``.
    """
    return _run_checks(G, _prepare(samples), AXIOMS, tol, max_witnesses)


def check_derived_properties(
    G: GMetric, samples, tol: float = DEFAULT_TOL, max_witnesses: int = MAX_WITNESSES
) -> AxiomReport:
    """Sampled check of the six inequalities every G-metric satisfies."""
    return _run_checks(G, _prepare(samples), DERIVED, tol, max_witnesses)


def check_symmetric(G: GMetric, samples, tol: float = DEFAULT_TOL) -> tuple[bool, Witness | None]:
    """Whether ``G(x,y,y) == G(x,x,y)`` on every sampled pair, with the worst offender."""
    report = _run_checks(G, _prepare(samples), ("symmetric_pair",), tol, 1)
    res = report.checks["symmetric_pair"]
    return res.passed, (res.witnesses[0] if res.witnesses else None)


def check_sandwich(G: GMetric, samples, tol: float = DEFAULT_TOL, max_witnesses: int = MAX_WITNESSES) -> AxiomReport:
    """Compare G with the sum and max constructions built on its associated metric."""
    return _run_checks(G, _prepare(samples), SANDWICH, tol, max_witnesses)


@dataclass
class ConvergenceEquivalence:
    """Tail values of the four metric-style convergence criteria."""

    tails: dict
    converged: dict
    agree: bool
    tol: float

    def to_dict(self) -> dict:
        return {"tails": self.tails, "converged": self.converged, "agree": self.agree, "tol": self.tol}


def check_convergence_equivalence(G: GMetric, seq, x, tol: float = 1e-3) -> ConvergenceEquivalence:
    """Evaluate the four criteria at the end of ``seq`` and test that they agree.

    The double-index criterion ``G(x_m, x_n, x)`` is taken as the max over the
    last three indices.
    """
    pts = np.asarray(seq, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < 3:
        raise SequenceTooShort(f"need at least 3 terms, got {pts.shape[0]}")
    p = as_point(x)
    _same_dim(pts, p)
    last = pts[-1:]
    target = p[None, :]
    d = metric_from_g(G)
    tail = pts[-3:]
    m_idx, n_idx = np.meshgrid(np.arange(3), np.arange(3), indexing="ij")
    pairs = G.fn(tail[m_idx.ravel()], tail[n_idx.ravel()], np.repeat(target, 9, axis=0))
    tails = {
        "associated_metric": float(d.fn(last, target)[0]),
        "double_first": float(G.fn(last, last, target)[0]),
        "double_limit": float(G.fn(last, target, target)[0]),
        "two_index": float(np.max(pairs)),
    }
    converged = {k: v <= tol for k, v in tails.items()}
    agree = len(set(converged.values())) == 1
    return ConvergenceEquivalence(tails, converged, agree, tol)


def full_suite(G: GMetric, samples, tol: float = DEFAULT_TOL) -> AxiomReport:
    """Axioms, derived inequalities, symmetry and sandwich in one report."""
    names = AXIOMS + DERIVED + ("symmetric_pair",) + SANDWICH
    return _run_checks(G, _prepare(samples), names, tol, MAX_WITNESSES)
