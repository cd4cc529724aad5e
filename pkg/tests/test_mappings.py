import itertools
import math

import numpy as np
import pytest

from gmetric.core import abs_metric, g_from_metric_max, g_from_metric_sum
from gmetric.errors import AllSamplesDegenerate, InverseUnavailable
from gmetric.mappings import (
    RlnTriple,
    SelfMap,
    certify_anti_lipschitz,
    certify_left_cyclic_contraction,
    certify_rln,
    certify_semi_contraction,
    certify_tripartite_contraction,
    check_commuting,
    check_inclusion_chain,
    classify_role,
    contraction_sides,
    replay_contraction_witness,
    sample_product,
)
from gmetric.regions import Region

PERIM = g_from_metric_sum(abs_metric, 1.0)
MAXG = g_from_metric_max(abs_metric)
PI = math.pi


def lattices():
    return {
        "A": Region.lattice("A", 3 * PI, 0.0, 1, 10),
        "B": Region.lattice("B", 3 * PI, PI, 1, 10),
        "C": Region.lattice("C", 3 * PI, 2 * PI, 1, 10),
    }


def intervals_123():
    return {"A": Region.interval("A", 0, 1), "B": Region.interval("B", 0, 2), "C": Region.interval("C", 0, 3)}


def max_regions():
    return {"A": Region.interval("A", 0, 1), "B": Region.interval("B", -1, 0), "C": Region.interval("C", 0, 1)}


def plain(fn, label="F"):
    return SelfMap.plain(fn, label)


def on_c(fn_c, label):
    """A map that applies ``fn_c`` on C and is zero on A and B."""
    return SelfMap(lambda x, lb: fn_c(x) if lb == "C" else 0.0 * x, label)


def sine_triple():
    return RlnTriple(plain(lambda x: 0.25 * np.sin(x)), plain(lambda x: 0.5 * np.sin(x)), plain(lambda x: x), intervals_123(), PERIM, 0.0)


def affine_triple():
    return RlnTriple(
        plain(lambda x: x + PI), plain(lambda x: 4 * x + 2 * PI), plain(lambda x: 12 * x + 3 * PI), lattices(), PERIM, 4 * PI
    )


def max_half_triple():
    return RlnTriple(plain(lambda x: 0 * x), on_c(lambda x: 0.25 * x, "S"), plain(lambda x: 0.5 * x), max_regions(), MAXG, 0.0)


# roles


def test_lattice_roles():
    R = lattices()
    assert classify_role(plain(lambda x: x + PI), R).role == "right_cyclic"
    assert classify_role(plain(lambda x: x + 2 * PI), R).role == "left_cyclic"
    assert classify_role(plain(lambda x: x + 3 * PI), R).role == "noncyclic"


def test_rln_pass_and_swapped_fail():
    R = lattices()
    t, s, k = plain(lambda x: x + PI), plain(lambda x: x + 2 * PI), plain(lambda x: x + 3 * PI)
    assert certify_rln(RlnTriple(t, s, k, R, PERIM)).passed
    bad = certify_rln(RlnTriple(s, t, k, R, PERIM))
    assert not bad.passed
    w = bad.witness
    assert w["map"] == "T" and w["from"] == "A" and w["to"] == "B"
    assert w["point"] == [pytest.approx(3 * PI)] and w["image"] == [pytest.approx(5 * PI)]
    assert w["image"][0] in R["C"]


def test_identity_has_every_role():
    R = {n: Region.interval(n, 0, 1) for n in "ABC"}
    ident = plain(lambda x: x)
    assert set(classify_role(ident, R).roles) == {"right_cyclic", "left_cyclic", "noncyclic"}
    assert certify_rln(RlnTriple(ident, ident, ident, R, PERIM)).passed


def test_affine_k_is_not_noncyclic():
    # K(B) lands in A: 12(3n+1)pi + 3pi = 3(12n+5)pi
    res = classify_role(plain(lambda x: 12 * x + 3 * PI), lattices())
    assert not res.has("noncyclic")
    w = res.witnesses["noncyclic"]
    assert w["from"] == "B" and w["image"][0] in lattices()["A"]


def test_roles_are_exclusive_on_disjoint_regions():
    R = lattices()
    for shift in (PI, 2 * PI, 3 * PI, 0.5):
        assert len(classify_role(plain(lambda x, s=shift: x + s), R).roles) <= 1


# contraction certificates


def test_sine_contraction():
    cert = certify_tripartite_contraction(sine_triple(), 10_000)
    assert cert.passed and cert.witness is None
    assert cert.constant == pytest.approx(0.5, abs=1e-12)
    assert cert.constant <= 0.75


def test_affine_contraction_matches_exhaustive_oracle():
    # oracle: every triple of the truncated lattices; S, K scale G by 4 and 12
    best = 0.0
    A, B, C = ([3 * n * PI + off for n in range(1, 11)] for off in (0, PI, 2 * PI))
    for a, b, c in itertools.product(A, B, C):
        g = 2 * (max(a, b, c) - min(a, b, c))
        best = max(best, (4 * g - 4 * PI) / (12 * g - 4 * PI), 0.25)
    cert = certify_tripartite_contraction(affine_triple(), 10_000)
    assert cert.passed
    assert cert.constant == pytest.approx(best, abs=1e-12)
    assert cert.constant <= 1 / 3


def test_identity_triple_forces_r_one():
    R = {n: Region.interval(n, 0, 2) for n in "ABC"}
    ident = plain(lambda x: x)
    tr = RlnTriple(ident, ident, ident, R, PERIM, 0.0)
    cert = certify_tripartite_contraction(tr, np.array([[0.0, 1.0, 2.0]]))
    assert not cert.passed
    assert cert.witness["points"] == [[0.0], [1.0], [2.0]]
    assert cert.witness["required_r"] == 1.0
    assert replay_contraction_witness(tr, cert)


def test_semi_trivial_passes_for_any_r():
    tr = RlnTriple(
        plain(lambda x: 0 * x),
        plain(lambda x: 0 * x),
        SelfMap(lambda x, lb: 0 * x if lb == "C" else x, "K"),
        intervals_123(),
        PERIM,
        0.0,
    )
    for r in (0.01, 0.5, 0.99):
        cert = certify_semi_contraction(tr, 5_000, r=r)
        assert cert.passed
        assert cert.detail["max_lhs_first"] == 0.0 and cert.detail["max_lhs_second"] == 0.0


def test_max_half_semi_contraction_needs_r_one():
    tr = max_half_triple()
    # x=0 in A, y=0 in B, z=1 in C: G(Tx,Sy,Kz) = G(0,0,1/2) = G(Kx,Ky,Kz)
    lhs = MAXG(0.0, 0.0, 0.5)
    base = MAXG(0.0, 0.0, 0.5)
    assert lhs == base == 0.5
    cert = certify_semi_contraction(tr, 10_000)
    assert cert.constant == 1.0 and not cert.passed
    assert replay_contraction_witness(tr, cert)
    # the second inequality alone is satisfied with r = 1/2
    assert cert.detail["r_second"] == pytest.approx(0.5)


def test_monotone_in_samples():
    tr = sine_triple()
    P = sample_product(tr.regions, 4000, seed=3)
    r_small = certify_tripartite_contraction(tr, P[:500]).constant
    r_large = certify_tripartite_contraction(tr, P).constant
    assert r_small <= r_large


def test_certified_s_never_exceeds_k():
    for tr in (sine_triple(), affine_triple()):
        P = sample_product(tr.regions, 3000, seed=1)
        (gs, gk), _ = contraction_sides(tr, P)
        assert np.all(gs <= gk + 1e-9 * (1 + gk))


# single-map certificates


def test_left_cyclic_contraction():
    R = intervals_123()
    half = certify_left_cyclic_contraction(plain(lambda x: 0.5 * x), R, PERIM, 5_000)
    assert half.passed and half.constant == pytest.approx(0.5, abs=1e-12)
    iso = certify_left_cyclic_contraction(plain(lambda x: x + 2 * PI), lattices(), PERIM, 2_000)
    assert not iso.passed and iso.constant == pytest.approx(1.0, abs=1e-12)
    zero = certify_left_cyclic_contraction(plain(lambda x: 0 * x), R, PERIM, 2_000)
    assert zero.passed and zero.constant == 0.0


def test_left_cyclic_all_degenerate():
    R = {n: Region.points(n, [[1.0]]) for n in "ABC"}
    with pytest.raises(AllSamplesDegenerate):
        certify_left_cyclic_contraction(plain(lambda x: x), R, PERIM, 10)


def test_anti_lipschitz():
    R = intervals_123()
    ident = certify_anti_lipschitz(plain(lambda x: x), R, PERIM, 5_000, c=2.0)
    assert ident.passed and ident.constant == pytest.approx(1.0)
    half = certify_anti_lipschitz(plain(lambda x: 0.5 * x), R, PERIM, 5_000)
    assert half.constant == pytest.approx(2.0, abs=1e-12)
    zero = certify_anti_lipschitz(plain(lambda x: 0 * x), R, PERIM, np.array([[0.0, 1.0, 2.0]]))
    assert not zero.passed and zero.constant == math.inf
    assert zero.witness["numerator"] == 4.0 and zero.witness["denominator"] == 0.0


def test_commuting():
    R = intervals_123()
    assert check_commuting(plain(lambda x: 0.5 * np.sin(x)), plain(lambda x: x), R, PERIM).passed
    unit = {n: Region.interval(n, 0, 1) for n in "ABC"}
    bad = check_commuting(plain(lambda x: x + 1), plain(lambda x: 2 * x), unit, PERIM)
    assert not bad.passed
    w = bad.witness
    assert w["K(Sx)"][0] == pytest.approx(2 * w["point"][0] + 2)
    assert w["S(Kx)"][0] == pytest.approx(2 * w["point"][0] + 1)
    same = plain(lambda x: np.cos(x))
    assert check_commuting(same, same, R, PERIM).passed


# inclusion chain


def test_inclusion_chain_sine_passes():
    cert = check_inclusion_chain(sine_triple())
    assert cert.passed
    assert all(v["passed"] for v in cert.detail.values())


def test_inclusion_chain_max_half_fails_at_s_of_c():
    # S(C) = [0, 1/4] while K(B) = [-1/2, 0]
    cert = check_inclusion_chain(max_half_triple())
    assert not cert.passed
    assert cert.witness["inclusion"] == "S(C)<=K(B)"
    assert cert.detail["T(A)<=S(C)"]["passed"]


def test_inclusion_chain_unreachable_target():
    R = intervals_123()
    bounded = plain(lambda x: np.clip(x, 0, 3))
    tr = RlnTriple(plain(lambda x: x + 5), bounded, bounded, R, PERIM)
    cert = check_inclusion_chain(tr)
    assert not cert.passed
    assert cert.witness["inclusion"] == "T(A)<=S(C)"
    assert cert.witness["point"] == [0.0] and cert.witness["target"] == [5.0]


def test_inclusion_needs_interval_form_or_inverse():
    R = {n: Region.box(n, [(0, 1), (0, 1)]) for n in "ABC"}
    ident = SelfMap(lambda x, lb: x, "I")
    with pytest.raises(InverseUnavailable):
        check_inclusion_chain(RlnTriple(ident, ident, ident, R, PERIM))


def test_declared_inverses_are_used():
    R = {n: Region.box(n, [(0, 1), (0, 1)]) for n in "ABC"}
    inv = {lb: (lambda t, reg: t) for lb in "ABC"}
    ident = SelfMap(lambda x, lb: x, "I", inv)
    assert check_inclusion_chain(RlnTriple(ident, ident, ident, R, PERIM), samples=20).passed
