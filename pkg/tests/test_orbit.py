import math

import numpy as np
import pytest

from gmetric.core import abs_metric, g_from_metric_sum
from gmetric.errors import (
    InverseSolveFailed,
    MaxStepsExceeded,
    OrbitTooShort,
    RegionViolation,
    SequenceTooShort,
)
from gmetric.mappings import RlnTriple, SelfMap
from gmetric.orbit import (
    Orbit,
    SolveConfig,
    check_cauchy,
    check_g_bounded,
    check_rate_bounds,
    coincidence_gap,
    find_coincidence_point,
    generate_orbit,
    orbit_step,
    rate_envelopes,
)
from gmetric.regions import Region
from gmetric.scenario import builtin

PERIM = g_from_metric_sum(abs_metric, 1.0)
PI = math.pi


def sine(name="sine_34"):
    return builtin(name).triple()


def identity_triple():
    R = {n: Region.interval(n, 0, 1) for n in "ABC"}
    ident = SelfMap.plain(lambda x: x, "I")
    return RlnTriple(ident, ident, ident, R, PERIM)


def test_first_sine_step_matches_closed_form():
    # S x1 = T x0 in C, K x2 = T x0 in B; arcsin picks the root near x0
    target = 0.25 * math.sin(1.0)
    x1, x2 = orbit_step(sine(), 1.0, "A")
    assert x1[0] == pytest.approx(math.asin(2 * target), abs=1e-12)
    assert x2[0] == pytest.approx(target, abs=1e-12)


def test_step_rejects_start_outside_a():
    with pytest.raises(RegionViolation):
        generate_orbit(sine(), 2.5)


def test_identity_orbit_is_constant():
    orb = generate_orbit(identity_triple(), 0.3, SolveConfig(max_steps=12))
    assert len(orb) == 13
    assert np.allclose(np.array(orb.points)[:, 0], 0.3, atol=1e-12)
    assert np.all(orb.traces["t_collapse"] <= 1e-12)


def test_tags_cycle_a_c_b():
    orb = generate_orbit(sine(), 1.0, SolveConfig(max_steps=9))
    assert orb.tags == list("ACBACBACBA")


def test_orbit_satisfies_its_defining_relations():
    tr = sine()
    orb = generate_orbit(tr, 1.0, SolveConfig(max_steps=30))
    P = [np.asarray(p).reshape(1, -1) for p in orb.points]
    for n in range(len(P) - 1):
        t = tr.t(P[n], orb.tags[n])[0, 0]
        s_next = tr.s(P[n + 1], orb.tags[n + 1])[0, 0]
        assert abs(s_next - t) <= 1e-12
        assert tr.regions[orb.tags[n]].member(P[n])[0]
    assert np.all(orb.traces["s_residual"] <= 1e-12)


def test_sine_collapse_over_sixty_steps():
    orb = generate_orbit(sine(), 1.0, SolveConfig(max_steps=60))
    assert orb.traces["t_collapse"][-1] < 1e-8


def test_trace_consistency():
    orb = generate_orbit(sine(), 1.0, SolveConfig(max_steps=30))
    tr = orb.traces
    # S x_{3n+1} = T x_{3n}, so the S triple at n is the T chain starting one step earlier
    s_dist, chain = tr["s_distance"], tr["t_chain"]
    for n in range(1, s_dist.size):
        assert s_dist[n] == pytest.approx(chain[3 * n - 1], abs=1e-12)


def test_sine_rate_bounds():
    orb = generate_orbit(sine(), 1.0, SolveConfig(max_steps=45))
    rep = check_rate_bounds(orb, 0.75)
    assert rep.ok
    # at r = 1/10 the envelope falls faster than the orbit
    assert not check_rate_bounds(orb, 0.1).t_ok


def synthetic(r, gabc, steps=6, k0=20.0, t0=3.0, bump=0.0):
    p = r ** (3.0 * np.arange(steps))
    traces = {"t_collapse": p * t0, "k_distance": p * k0 + (1 - p) * gabc + bump * (np.arange(steps) == 3)}
    return Orbit([np.zeros(1)] * (3 * steps), list("ACB" * steps), traces)


def test_rate_envelope_with_positive_gabc():
    orb = synthetic(1 / 3, 4 * PI)
    assert check_rate_bounds(orb, 1 / 3, 4 * PI).ok
    t_env, k_env = rate_envelopes(orb, 1 / 3, 4 * PI)
    assert k_env[-1] == pytest.approx(4 * PI, abs=1e-5)
    bad = check_rate_bounds(synthetic(1 / 3, 4 * PI, bump=0.01), 1 / 3, 4 * PI)
    assert bad.t_ok and not bad.k_ok and bad.worst_k == pytest.approx(0.01)


def test_rate_bounds_need_two_triples():
    orb = generate_orbit(sine(), 1.0, SolveConfig(max_steps=3))
    with pytest.raises(OrbitTooShort):
        check_rate_bounds(orb, 0.75)


def test_g_bounded_on_integers():
    seq = np.arange(11, dtype=float)
    w = check_g_bounded(seq, PERIM)
    # G(n, 0, 0) = 2n, largest at n = 10; any triple is at most 2*10 = 20 <= 3M
    assert w.M == 20.0 and w.corollary_max == 20.0 and w.corollary_ok
    with pytest.raises(SequenceTooShort):
        check_g_bounded([], PERIM)


def test_cauchy_checks():
    assert check_cauchy(np.full(10, 2.0), PERIM).ok
    alt = check_cauchy((-1.0) ** np.arange(10), PERIM)
    assert not alt.ok and alt.tail_max == 4.0
    with pytest.raises(SequenceTooShort):
        check_cauchy([1.0, 2.0, 3.0], PERIM)


def test_sine_coincidence_point():
    tr = sine()
    rep = find_coincidence_point(tr, 1.0, r=0.5, r_reference=0.75)
    p = rep.limit[0]
    assert abs(p) < 1e-7 and rep.final_gap <= 1e-8
    assert coincidence_gap(tr, rep.limit) == rep.final_gap
    assert rep.rate.ok and rep.rate_reference.ok and rep.cauchy.ok
    assert rep.stop_reason == "converged"


def test_affine_orbit_has_no_preimage():
    # S x = 4 pi needs x = pi / 2, which is not in the lattice C
    with pytest.raises(InverseSolveFailed) as info:
        generate_orbit(builtin("affine_13").triple(4 * PI), 3 * PI)
    assert info.value.orbit is not None and len(info.value.orbit) == 1


def test_max_steps_exceeded_carries_best():
    with pytest.raises(MaxStepsExceeded) as info:
        find_coincidence_point(sine(), 1.0, SolveConfig(max_steps=4))
    err = info.value
    assert err.final_gap > 0 and err.best is not None and err.orbit is not None


def test_solve_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(max_steps=2)
    with pytest.raises(ValueError):
        SolveConfig(stop_tol=0.0)
    with pytest.raises(ValueError):
        SolveConfig(cauchy_window=2)
