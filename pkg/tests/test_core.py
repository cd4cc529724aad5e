import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmetric.core import (
    AXIOMS,
    DERIVED,
    GMetric,
    Metric,
    abs_metric,
    check_convergence_equivalence,
    check_derived_properties,
    check_g_axioms,
    check_sandwich,
    check_symmetric,
    full_suite,
    g_from_metric_max,
    g_from_metric_sum,
    metric_from_g,
    replay_witness,
    sample_tuples,
)
from gmetric.errors import DimensionMismatch, EmptySampleSet, NonFinitePoint, SequenceTooShort

PERIM = g_from_metric_sum(abs_metric, 1.0)
THIRD = g_from_metric_sum(abs_metric, 1.0 / 3.0)
MAXG = g_from_metric_max(abs_metric)

reals = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def first_only():
    """|x - y|, ignoring z: not a G-metric."""
    return GMetric(lambda x, y, z: np.abs(x[:, 0] - y[:, 0]), "first_only")


def lopsided():
    """Perimeter plus a two-equal bonus that depends on which value repeats.

    Satisfies the five axioms but G(x,y,y) != G(x,x,y).
    """

    def fn(x, y, z):
        lo, mid, hi = np.sort(np.stack([x[:, 0], y[:, 0], z[:, 0]]), axis=0)
        extra = np.where(lo == hi, 0.0, np.where((lo == mid) & (mid < hi), 1.0, 2.0))
        return (hi - lo) * 2.0 + extra

    return GMetric(fn, "lopsided", symmetric=False)


# construction examples


def test_sum_examples():
    assert PERIM(0, 1, 2) == 4.0
    assert THIRD(3.5, 3.5, 3.5) == 0.0
    assert PERIM(0, math.pi, 2 * math.pi) == pytest.approx(4 * math.pi, abs=1e-12)


def test_max_examples():
    assert MAXG(0, 1, 2) == 2.0
    assert MAXG(-7, -7, -7) == 0.0
    assert MAXG(-1, 0, 1) == 2.0


def test_associated_metric_examples():
    assert metric_from_g(PERIM)(0, 1) == 4.0
    assert metric_from_g(PERIM)(2.5, 2.5) == 0.0
    assert metric_from_g(MAXG)(0, 1) == 2.0


def test_euclidean_metric_in_plane():
    G = g_from_metric_sum(abs_metric, 1.0)
    # 3-4-5 triangle
    assert G([0, 0], [3, 0], [0, 4]) == pytest.approx(12.0)


def test_points_are_validated():
    with pytest.raises(NonFinitePoint):
        PERIM(0, float("nan"), 1)
    with pytest.raises(DimensionMismatch):
        PERIM([0, 0], [1, 1], 1)


# sampled checks


def test_builtins_pass_axioms_on_random_triples():
    samples = sample_tuples(1000, -5, 5, seed=3)
    for G in (PERIM, MAXG, THIRD):
        rep = check_g_axioms(G, samples)
        assert rep.passed, rep.failed()
        assert set(rep.checks) == set(AXIOMS)
        assert rep.samples_used == 1000


def test_triples_are_accepted():
    tri = sample_tuples(200, seed=1, arity=3)
    assert check_g_axioms(PERIM, tri).passed


def test_empty_samples_rejected():
    with pytest.raises(EmptySampleSet):
        check_g_axioms(PERIM, np.empty((0, 4)))
    with pytest.raises(EmptySampleSet):
        sample_tuples(0)


def test_first_only_fails_symmetry_with_replayable_witness():
    G = first_only()
    rep = check_g_axioms(G, sample_tuples(500, seed=0))
    assert "axiom_symmetry" in rep.failed()
    for w in rep.checks["axiom_symmetry"].witnesses:
        assert replay_witness(G, w)
    # the hand-picked pair of orderings
    assert G(0, 1, 5) == 1.0 and G(0, 5, 1) == 5.0


def test_first_only_derived_failures():
    rep = check_derived_properties(first_only(), sample_tuples(500, seed=0))
    failed = set(rep.failed())
    assert {"derived_zero_implies_equal", "derived_split_at_x"} <= failed
    # G(x,y,y) <= 2G(y,x,x) reads |x-y| <= 2|y-x| here, which always holds
    assert rep.checks["derived_doubled_swap"].passed
    for w in rep.witnesses:
        assert replay_witness(first_only(), w)


def test_derived_properties_hold_for_builtins():
    samples = sample_tuples(2000, seed=5)
    for G in (PERIM, MAXG):
        rep = check_derived_properties(G, samples)
        assert rep.passed and set(rep.checks) == set(DERIVED)


def test_symmetric_true_for_builtins():
    samples = sample_tuples(500, seed=2)
    assert check_symmetric(PERIM, samples) == (True, None)
    assert check_symmetric(MAXG, samples)[0]


def test_lopsided_is_a_g_metric_but_not_symmetric():
    G = lopsided()
    grid = np.array(list(itertools.product(range(4), repeat=4)), dtype=float)
    assert check_g_axioms(G, grid).passed
    ok, w = check_symmetric(G, grid)
    assert not ok and replay_witness(G, w)
    assert G(0, 1, 1) - G(0, 0, 1) == 1.0


def test_sandwich_single_triple():
    d = metric_from_g(PERIM)
    pairs = (d(0, 1), d(1, 2), d(0, 2))
    assert pairs == (4.0, 4.0, 8.0)
    assert sum(pairs) / 3 == pytest.approx(16 / 3)
    assert check_sandwich(PERIM, np.array([[0.0, 1.0, 2.0]])).passed


def test_sandwich_random():
    samples = sample_tuples(2000, seed=9)
    assert check_sandwich(PERIM, samples).passed
    assert check_sandwich(MAXG, samples).passed


def test_full_suite_in_two_dimensions():
    samples = sample_tuples(500, -3, 3, dim=2, seed=4)
    assert full_suite(PERIM, samples).passed
    assert full_suite(MAXG, samples).passed


def test_report_merge_is_fail_dominant():
    good = check_g_axioms(PERIM, sample_tuples(50, seed=0))
    bad = check_g_axioms(first_only(), sample_tuples(50, seed=0))
    merged = good.merge(bad)
    assert not merged.passed
    assert merged.samples_used == 100
    assert merged.to_dict() == good.merge(bad).to_dict()


def test_degenerate_rows_lead_the_sample():
    s = sample_tuples(10, seed=0)
    assert np.all(s[0] == s[0, 0])


# convergence criteria


def test_convergence_equivalence_examples():
    n = np.arange(1, 10_001, dtype=float)
    rep = check_convergence_equivalence(PERIM, 1.0 / n, 0.0, tol=1e-3)
    assert rep.agree and all(rep.converged.values())
    const = check_convergence_equivalence(PERIM, np.full(20, 1.5), 1.5)
    assert const.agree and all(v == 0.0 for v in const.tails.values())
    alt = check_convergence_equivalence(PERIM, (-1.0) ** np.arange(50), 0.0)
    assert alt.agree and not any(alt.converged.values())


def test_convergence_equivalence_needs_three_terms():
    with pytest.raises(SequenceTooShort):
        check_convergence_equivalence(PERIM, [1.0, 2.0], 0.0)


# properties


@given(reals, reals, reals)
def test_permutations_bitwise_equal(x, y, z):
    for G in (PERIM, THIRD, MAXG):
        vals = {G(*p) for p in itertools.permutations((x, y, z))}
        assert len(vals) == 1


@given(reals, reals)
def test_third_scale_round_trip(x, y):
    assert metric_from_g(THIRD)(x, y) == pytest.approx(4.0 / 3.0 * abs(x - y), rel=1e-12, abs=1e-300)


@settings(max_examples=200)
@given(st.lists(reals, min_size=4, max_size=4), st.floats(0.01, 10))
def test_builtins_satisfy_everything(pts, scale):
    sample = np.array([pts])
    G = g_from_metric_sum(abs_metric, scale)
    assert full_suite(G, sample).passed
    assert full_suite(MAXG, sample).passed


def test_custom_metric_wrapper():
    taxi = Metric(lambda x, y: np.abs(x - y).sum(axis=1), "taxicab")
    G = g_from_metric_max(taxi)
    assert G([0, 0], [1, 1], [2, 0]) == 2.0
    assert full_suite(G, sample_tuples(300, dim=2, seed=1)).passed
