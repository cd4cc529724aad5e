"""Self-maps of A, B, C: role classification and sampled certificates.

A map is evaluated together with the label of the region its argument is
taken from. This matters when regions overlap and the map is piecewise by
region, as with a rule that reads "a quarter of x on C, zero elsewhere".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import DEFAULT_TOL, GMetric, metric_from_g
from .errors import AllSamplesDegenerate, EmptyRegion, InverseUnavailable
from .inverse import find_roots, solve_batch
from .regions import Region

LABELS = ("A", "B", "C")

ROLE_TARGETS = {
    "right_cyclic": {"A": "B", "B": "C", "C": "A"},
    "left_cyclic": {"A": "C", "C": "B", "B": "A"},
    "noncyclic": {"A": "A", "B": "B", "C": "C"},
}
EXPECTED_ROLES = {"T": "right_cyclic", "S": "left_cyclic", "K": "noncyclic"}

# (name, image map, argument region, covering map, covering region)
INCLUSIONS = (
    ("T(A)<=S(C)", "t", "A", "s", "C"),
    ("S(C)<=K(B)", "s", "C", "k", "B"),
    ("T(B)<=S(A)", "t", "B", "s", "A"),
    ("S(A)<=K(C)", "s", "A", "k", "C"),
    ("T(C)<=S(B)", "t", "C", "s", "B"),
    ("S(B)<=K(A)", "s", "B", "k", "A"),
)


@dataclass
class SelfMap:
    """A map on A u B u C.

    ``forward(x, label)`` maps an ``(n, dim)`` array of points taken from
    region ``label`` to their images. ``inverses`` optionally maps a region
    label to a solver ``(target, region) -> point or None`` that returns a
    preimage of ``target`` inside that region.
    """

    forward: Callable[[np.ndarray, str], np.ndarray]
    label: str = "F"
    inverses: dict = field(default_factory=dict)

    def __call__(self, x, label: str) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim < 2:
            x = x.reshape(-1, 1)
        return np.asarray(self.forward(x, label), dtype=float).reshape(x.shape)

    @staticmethod
    def plain(fn: Callable[[np.ndarray], np.ndarray], label: str = "F") -> "SelfMap":
        """A map that ignores the region label."""
        return SelfMap(lambda x, _label: fn(x), label)


@dataclass
class RlnTriple:
    """Three maps with the regions, the G-metric and the three-set distance."""

    t: SelfMap
    s: SelfMap
    k: SelfMap
    regions: dict
    g: GMetric
    gabc: float = 0.0

    def region(self, label: str) -> Region:
        return self.regions[label]


@dataclass
class Certificate:
    """Outcome of one sampled verification.

    ``constant`` is the estimated r or c when the check produces one;
    ``margin`` is the worst slack over the samples at the constant used;
    ``witness`` describes a violating sample when the check fails.
    """

    kind: str
    passed: bool
    constant: float | None = None
    margin: float | None = None
    witness: dict | None = None
    samples_used: int = 0
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "passed": self.passed,
            "constant": self.constant,
            "margin": self.margin,
            "witness": self.witness,
            "samples_used": self.samples_used,
            "detail": self.detail,
        }


# ---------------------------------------------------------------------------
# sampling


def _anchors(reg: Region) -> np.ndarray:
    if reg.finite is not None:
        return reg.finite[:4]
    if reg.intervals is not None:
        return np.unique([v for iv in reg.intervals for v in iv])[:, None]
    return reg.sample(2**reg.dim, 0)  # box samplers lead with corners


def _corner_rows(regions: dict) -> np.ndarray:
    ends = [_anchors(regions[label]) for label in LABELS]
    grid = np.meshgrid(*[np.arange(e.shape[0]) for e in ends], indexing="ij")
    return np.stack([ends[i][grid[i].ravel()] for i in range(3)], axis=1)


def sample_product(regions: dict, n: int, seed: int = 0) -> np.ndarray:
    """``(n, 3, dim)`` samples from A x B x C.

    Leading rows enumerate combinations of interval endpoints, where
    piecewise-linear G-metrics attain their extreme ratios.
    """
    if n <= 0:
        raise EmptyRegion("need at least one product sample")
    rng = np.random.default_rng(seed)
    corners = _corner_rows(regions)
    k = min(n, corners.shape[0])
    rest = n - k
    cols = [regions[label].sample(rest, rng) if rest else np.empty((0, regions[label].dim)) for label in LABELS]
    body = np.stack(cols, axis=1) if rest else np.empty((0, 3, regions["A"].dim))
    return np.concatenate([corners[:k], body])


def _images(m: SelfMap, P: np.ndarray):
    return tuple(m(P[:, i, :], LABELS[i]) for i in range(3))


# ---------------------------------------------------------------------------
# roles


@dataclass
class RoleResult:
    roles: tuple
    witnesses: dict
    samples_used: int

    @property
    def role(self) -> str:
        if not self.roles:
            return "none"
        return self.roles[0] if len(self.roles) == 1 else "|".join(self.roles)

    def has(self, role: str) -> bool:
        return role in self.roles


def classify_role(m: SelfMap, regions: dict, samples: int = 200, seed: int = 0) -> RoleResult:
    """Every role consistent with the sampled images.

    On pairwise disjoint regions at most one role survives. For each role
    that fails, the first offending point is kept as a witness.
    """
    rng = np.random.default_rng(seed)
    pts = {}
    for label in LABELS:
        p = regions[label].sample(samples, rng)
        if p.shape[0] == 0:
            raise EmptyRegion(f"region {label} yielded no samples")
        pts[label] = p
    images = {label: m(pts[label], label) for label in LABELS}
    roles, witnesses = [], {}
    for role, targets in ROLE_TARGETS.items():
        bad = None
        for label in LABELS:
            inside = regions[targets[label]].member(images[label])
            if not inside.all():
                i = int(np.flatnonzero(~inside)[0])
                bad = {
                    "from": label,
                    "to": targets[label],
                    "point": pts[label][i].tolist(),
                    "image": images[label][i].tolist(),
                }
                break
        if bad is None:
            roles.append(role)
        else:
            witnesses[role] = bad
    return RoleResult(tuple(roles), witnesses, samples * 3)


def certify_rln(triple: RlnTriple, samples: int = 200, seed: int = 0) -> Certificate:
    """T right cyclic, S left cyclic and K noncyclic on the sampled regions."""
    detail, witness = {}, None
    for name, m in (("T", triple.t), ("S", triple.s), ("K", triple.k)):
        res = classify_role(m, triple.regions, samples, seed)
        want = EXPECTED_ROLES[name]
        detail[name] = {"expected": want, "roles": list(res.roles)}
        if not res.has(want) and witness is None:
            witness = {"map": name, "expected": want, **res.witnesses[want]}
    return Certificate("role", witness is None, witness=witness, samples_used=samples * 9, detail=detail)


# ---------------------------------------------------------------------------
# ratio certificates


def _ratio(num, den, tol):
    """Smallest r with num <= r*den; 0 where vacuous, inf where impossible."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    pos_den = den > tol * (1.0 + np.abs(den))
    pos_num = num > tol * (1.0 + np.abs(num))
    out = np.zeros_like(num)
    safe = np.where(pos_den, den, 1.0)
    out = np.where(pos_den, np.maximum(num, 0.0) / safe, out)
    out = np.where(~pos_den & pos_num, np.inf, out)
    return out


def _pair_certificate(kind, P, first, second, gabc, r, tol, names):
    """Shared logic for the two contraction-type definitions.

    ``first = (lhs, base)`` encodes lhs <= r*base + (1-r)*gabc and
    ``second = (lhs, base)`` encodes lhs <= r*base.
    """
    l1, b1 = first
    l2, b2 = second
    r1 = _ratio(l1 - gabc, b1 - gabc, tol)
    r2 = _ratio(l2, b2, tol)
    req = np.maximum(r1, r2)
    i = int(np.argmax(req))
    r_hat = float(req[i])
    bound = 1.0 if r is None else float(r)
    used = min(r_hat, 1.0) if r is None else bound
    slack1 = used * b1 + (1.0 - used) * gabc - l1
    slack2 = used * b2 - l2
    margin = float(min(slack1.min(), slack2.min()))
    if r is None:
        passed = r_hat < 1.0 - tol
    else:
        passed = r_hat <= bound + tol
    witness = None
    if not passed:
        which = 0 if r1[i] >= r2[i] else 1
        witness = {
            "points": [P[i, j].tolist() for j in range(3)],
            "inequality": names[which],
            "lhs": float((l1, l2)[which][i]),
            "base": float((b1, b2)[which][i]),
            "gabc": gabc,
            "required_r": r_hat,
            "bound": bound,
        }
    detail = {
        "r_first": float(r1.max()),
        "r_second": float(r2.max()),
        "max_lhs_first": float(l1.max()),
        "max_lhs_second": float(l2.max()),
        "r_checked": r,
    }
    return Certificate(kind, passed, r_hat, margin, witness, int(P.shape[0]), detail)


def contraction_sides(triple: RlnTriple, P: np.ndarray):
    """Sides of both contraction inequalities at each sample row."""
    G = triple.g
    TX, TY, TZ = _images(triple.t, P)
    SX, SY, SZ = _images(triple.s, P)
    KX, KY, KZ = _images(triple.k, P)
    gs, gk, gt = G.fn(SX, SY, SZ), G.fn(KX, KY, KZ), G.fn(TX, TY, TZ)
    return (gs, gk), (gt, gs)


def semi_contraction_sides(triple: RlnTriple, P: np.ndarray):
    """Sides of both semi-contraction inequalities at each sample row."""
    G = triple.g
    TX, _, _ = _images(triple.t, P)
    SX, SY, SZ = _images(triple.s, P)
    KX, KY, KZ = _images(triple.k, P)
    mixed = G.fn(TX, SY, KZ)
    return (mixed, G.fn(KX, KY, KZ)), (G.fn(SX, SY, SZ), mixed)


def _product(triple, samples, seed):
    if isinstance(samples, (int, np.integer)):
        return sample_product(triple.regions, int(samples), seed)
    P = np.asarray(samples, dtype=float)
    if P.ndim == 2:
        P = P[:, :, None]
    return P


def certify_tripartite_contraction(
    triple: RlnTriple, samples=10_000, tol: float = DEFAULT_TOL, r: float | None = None, seed: int = 0
) -> Certificate:
    """Smallest sampled r for the contraction pair of inequalities on A x B x C.

    ``samples`` is a count or an explicit ``(n, 3[, dim])`` array. With
    ``r`` given the certificate checks that value; otherwise it passes when
    the sampled r is below 1.
    """
    P = _product(triple, samples, seed)
    first, second = contraction_sides(triple, P)
    return _pair_certificate(
        "contraction", P, first, second, triple.gabc, r, tol, ("G(S..)<=rG(K..)+(1-r)gabc", "G(T..)<=rG(S..)")
    )


def certify_semi_contraction(
    triple: RlnTriple, samples=10_000, tol: float = DEFAULT_TOL, r: float | None = None, seed: int = 0
) -> Certificate:
    """Smallest sampled r for the semi-contraction pair built on G(Tx,Sy,Kz)."""
    P = _product(triple, samples, seed)
    first, second = semi_contraction_sides(triple, P)
    return _pair_certificate(
        "semi_contraction",
        P,
        first,
        second,
        triple.gabc,
        r,
        tol,
        ("G(Tx,Sy,Kz)<=rG(K..)+(1-r)gabc", "G(S..)<=rG(Tx,Sy,Kz)"),
    )


def replay_contraction_witness(triple: RlnTriple, cert: Certificate, tol: float = DEFAULT_TOL) -> bool:
    """Recompute a failing certificate's witness row; True iff it still violates."""
    if cert.witness is None:
        return False
    P = np.asarray(cert.witness["points"], dtype=float)[None, :, :]
    sides = contraction_sides if cert.kind == "contraction" else semi_contraction_sides
    first, second = sides(triple, P)
    req = max(
        float(_ratio(first[0] - triple.gabc, first[1] - triple.gabc, tol)[0]),
        float(_ratio(second[0], second[1], tol)[0]),
    )
    bound = cert.witness["bound"]
    return req > bound + tol if cert.detail.get("r_checked") is not None else req >= bound - tol


def certify_left_cyclic_contraction(
    s: SelfMap, regions: dict, g: GMetric, samples=10_000, tol: float = DEFAULT_TOL, seed: int = 0
) -> Certificate:
    """Largest sampled G(Sx,Sy,Sz)/G(x,y,z) over A x B x C."""
    P = sample_product(regions, samples, seed) if isinstance(samples, int) else np.asarray(samples, dtype=float)
    if P.ndim == 2:
        P = P[:, :, None]
    X, Y, Z = P[:, 0], P[:, 1], P[:, 2]
    base = g.fn(X, Y, Z)
    img = g.fn(*_images(s, P))
    live = base > tol
    if not live.any():
        raise AllSamplesDegenerate("every sampled triple has G(x,y,z) <= tol")
    ratios = np.where(live, img / np.where(live, base, 1.0), -np.inf)
    i = int(np.argmax(ratios))
    c = float(ratios[i])
    role = classify_role(s, regions, 100, seed)
    passed = c < 1.0
    witness = None if passed else {"points": [P[i, j].tolist() for j in range(3)], "ratio": c}
    return Certificate(
        "left_cyclic_contraction",
        passed,
        c,
        float(1.0 - c),
        witness,
        int(P.shape[0]),
        {"left_cyclic": role.has("left_cyclic")},
    )


def certify_anti_lipschitz(
    k: SelfMap, regions: dict, g: GMetric, samples=10_000, tol: float = DEFAULT_TOL, c: float | None = None, seed: int = 0
) -> Certificate:
    """Largest sampled G(x,y,z)/G(Kx,Ky,Kz); a collapsed distinct triple is unbounded."""
    P = sample_product(regions, samples, seed) if isinstance(samples, int) else np.asarray(samples, dtype=float)
    if P.ndim == 2:
        P = P[:, :, None]
    base = g.fn(P[:, 0], P[:, 1], P[:, 2])
    img = g.fn(*_images(k, P))
    ratios = _ratio(base, img, tol)
    i = int(np.argmax(ratios))
    c_hat = float(ratios[i])
    passed = np.isfinite(c_hat) and (c is None or c_hat <= c + tol)
    witness = None
    if not passed:
        witness = {
            "points": [P[i, j].tolist() for j in range(3)],
            "numerator": float(base[i]),
            "denominator": float(img[i]),
        }
    margin = None if c is None else float(np.min(c * img - base))
    return Certificate("anti_lipschitz", bool(passed), c_hat, margin, witness, int(P.shape[0]), {"c_checked": c})


def check_commuting(
    s: SelfMap, k: SelfMap, regions: dict, g: GMetric, samples: int = 1000, tol: float = DEFAULT_TOL, seed: int = 0
) -> Certificate:
    """K(Sx) against S(Kx) for x in A u C.

    S moves A to C and C to B, so the outer K sees the image under that
    label; K keeps labels, so the outer S sees the original one.
    """
    d = metric_from_g(g)
    rng = np.random.default_rng(seed)
    succ = ROLE_TARGETS["left_cyclic"]
    worst, witness, used = 0.0, None, 0
    for label in ("A", "C"):
        x = regions[label].sample(samples, rng)
        ks = k(s(x, label), succ[label])
        sk = s(k(x, label), label)
        gap = d.fn(ks, sk)
        used += x.shape[0]
        i = int(np.argmax(gap))
        if gap[i] > worst:
            worst = float(gap[i])
            if gap[i] > tol:
                witness = {"region": label, "point": x[i].tolist(), "K(Sx)": ks[i].tolist(), "S(Kx)": sk[i].tolist()}
    return Certificate("commuting", witness is None, None, float(-worst), witness, used, {"max_gap": worst})


def check_inclusion_chain(
    triple: RlnTriple,
    samples: int = 200,
    tol: float = 1e-10,
    subdivisions: int = 64,
    seed: int = 0,
) -> Certificate:
    """Each of the six inclusions, by solving for a covering preimage.

    For every sampled ``x`` in the argument region the target ``F(x)`` must
    have a preimage under the covering map inside the covering region,
    within ``tol`` in the associated metric.
    """
    d = metric_from_g(triple.g)
    rng = np.random.default_rng(seed)
    maps = {"t": triple.t, "s": triple.s, "k": triple.k}
    detail, witness, used = {}, None, 0
    for name, img_map, arg, cover_map, cover in INCLUSIONS:
        xs = triple.regions[arg].sample(samples, rng)
        targets = maps[img_map](xs, arg)
        used += xs.shape[0]
        ok, residuals = preimages(maps[cover_map], cover, triple.regions[cover], targets, d, tol, subdivisions)
        worst = float(residuals[ok].max()) if ok.any() else None
        detail[name] = {"passed": bool(ok.all()), "max_residual": worst}
        if not ok.all() and witness is None:
            i = int(np.flatnonzero(~ok)[0])
            witness = {"inclusion": name, "point": xs[i].tolist(), "target": targets[i].tolist()}
    return Certificate("inclusion_chain", witness is None, None, None, witness, used, detail)


def preimages(m: SelfMap, label: str, region: Region, targets, d, tol: float, subdivisions: int = 64):
    """Whether each row of ``targets`` has a preimage under ``m`` inside ``region``.

    Returns ``(ok, residuals)``. Explicit inverses are used when declared;
    otherwise the region must be a 1-D interval union.
    """
    targets = np.asarray(targets, dtype=float)
    if label in m.inverses:
        ok = np.zeros(targets.shape[0], dtype=bool)
        res = np.full(targets.shape[0], np.inf)
        for i, t in enumerate(targets):
            hit = preimage(m, label, region, t, d, tol, subdivisions)
            if hit is not None:
                ok[i], res[i] = True, hit[1]
        return ok, res
    if region.dim != 1 or region.intervals is None:
        raise InverseUnavailable(f"map {m.label} has no inverse on region {label} and the region is not 1-D intervals")

    def f(c):
        return m(c[:, None], label)[:, 0]

    def residual(v, t):
        return d.fn(np.asarray(v, dtype=float)[:, None], np.asarray(t, dtype=float)[:, None])

    pts, res, found = solve_batch(f, targets[:, 0], region.intervals, residual, tol, subdivisions)
    inside = np.zeros_like(found)
    if found.any():
        inside[found] = region.member(pts[found][:, None])
    return found & inside, res


def preimage(m: SelfMap, label: str, region: Region, target, d, tol: float, subdivisions: int = 64, hints=()):
    """One preimage of ``target`` under ``m`` inside ``region`` as ``(point, residual)``, or None."""
    target = np.asarray(target, dtype=float).reshape(-1)
    if label in m.inverses:
        p = m.inverses[label](target, region)
        if p is None:
            return None
        p = np.asarray(p, dtype=float).reshape(1, -1)
        r = float(d.fn(m(p, label), target[None, :])[0])
        return (p[0], r) if r <= tol and region.member(p)[0] else None
    roots = solve_all(m, label, region, target, d, tol, subdivisions, hints)
    if len(roots) == 0:
        return None
    return np.array([roots.points[0]]), float(roots.residuals[0])


def solve_all(m: SelfMap, label: str, region: Region, target, d, tol: float, subdivisions: int = 64, hints=()):
    """Every bracketed root of ``m(c) = target`` on a 1-D interval region."""
    target = np.asarray(target, dtype=float).reshape(-1)
    if region.dim != 1 or region.intervals is None:
        raise InverseUnavailable(f"map {m.label} has no inverse on region {label} and the region is not 1-D intervals")

    def f(c):
        return m(c[:, None], label)[:, 0]

    def residual(v, t):
        return d.fn(np.asarray(v, dtype=float)[:, None], np.full((np.size(v), 1), t))

    roots = find_roots(f, float(target[0]), region.intervals, residual, tol, subdivisions, hints)
    keep = (roots.residuals <= tol) & region.member(roots.points[:, None]) if len(roots) else np.zeros(0, bool)
    roots.points, roots.residuals = roots.points[keep], roots.residuals[keep]
    return roots
