"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line and the session summary lists them all.
"""

import itertools
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from hypothesis import given, settings
from strategies import exprs

from gmetric.cli import main
from gmetric.convexity import CENTROID, ConvexStructure, check_convex_structure, estimate_uniform_convexity, sample_convex_configs
from gmetric.core import (
    GMetric,
    abs_metric,
    check_g_axioms,
    full_suite,
    g_from_metric_max,
    g_from_metric_sum,
    replay_witness,
    sample_tuples,
)
from gmetric.expr import eval_expr, parse_expr, to_source
from gmetric.mappings import (
    RlnTriple,
    SelfMap,
    certify_anti_lipschitz,
    certify_semi_contraction,
    certify_tripartite_contraction,
    check_commuting,
    check_inclusion_chain,
    classify_role,
    replay_contraction_witness,
)
from gmetric.orbit import SolveConfig, check_rate_bounds, find_coincidence_point
from gmetric.regions import Region, g_set_distance
from gmetric.scenario import builtin

TOL = 1e-9
PI = math.pi
PERIM = g_from_metric_sum(abs_metric, 1.0)


def coincidence(name, r=None):
    s = builtin(name)
    gabc = g_set_distance(s.g, s.regions["A"], s.regions["B"], s.regions["C"]).value
    tr = s.triple(gabc)
    return tr, find_coincidence_point(tr, s.x0(), SolveConfig(max_steps=200), r=r)


def test_criterion_1_axiom_suite(criterion):
    start = time.perf_counter()
    samples = sample_tuples(100_000, -10, 10, seed=0)
    results = {}
    for label, G in [
        ("sum 1/3", g_from_metric_sum(abs_metric, 1 / 3)),
        ("sum 1", PERIM),
        ("max", g_from_metric_max(abs_metric)),
    ]:
        rep = full_suite(G, samples, TOL)
        results[label] = (rep.passed, len(rep.checks))
    elapsed = time.perf_counter() - start
    ok = all(p for p, _ in results.values()) and elapsed < 5.0
    criterion(1, ok, f"{results} in {elapsed:.2f}s")
    assert ok


def test_criterion_2_sine_scenario(criterion):
    start = time.perf_counter()
    s = builtin("sine_34")
    tr = s.triple(0.0)
    cert = certify_tripartite_contraction(tr, 10_000, TOL)
    anti = certify_anti_lipschitz(tr.k, tr.regions, tr.g, 10_000, TOL)
    comm = check_commuting(tr.s, tr.k, tr.regions, tr.g)
    incl = check_inclusion_chain(tr)
    conv = find_coincidence_point(tr, 1.0, SolveConfig(max_steps=200))
    rate = check_rate_bounds(conv.orbit, 0.75, 0.0, TOL)
    elapsed = time.perf_counter() - start
    p = conv.limit[0]
    ok = (
        cert.constant <= 0.75 + TOL
        and anti.constant <= 2
        and comm.passed
        and incl.passed
        and conv.final_gap <= 1e-8
        and abs(p) <= 1e-6
        and conv.steps <= 200
        and rate.ok
        and elapsed < 2.0
    )
    criterion(
        2,
        ok,
        f"r_hat={cert.constant:.6g} c_hat={anti.constant:.6g} commuting={comm.passed} inclusion={incl.passed} "
        f"gap={conv.final_gap:.2e} p={p:.2e} steps={conv.steps} envelopes={rate.ok} {elapsed:.2f}s",
    )
    assert ok


def test_criterion_3_second_sine_scenario(criterion):
    tr, conv = coincidence("sine_56")
    cert = certify_tripartite_contraction(tr, 10_000, TOL)
    p = conv.limit[0]
    ok = cert.constant <= 5 / 6 + TOL and abs(p) <= 1e-6
    criterion(3, ok, f"r_hat={cert.constant:.6g} (bound 5/6) p={p:.2e}")
    assert ok


def test_criterion_4_affine_scenario(criterion):
    s = builtin("affine_13")
    A, B, C = (s.regions[k] for k in "ABC")
    oracle = min(
        2 * (max(a, b, c) - min(a, b, c))
        for a, b, c in itertools.product(*([3 * n * PI + off for n in range(1, 11)] for off in (0, PI, 2 * PI)))
    )
    est = g_set_distance(s.g, A, B, C)
    cert = certify_tripartite_contraction(s.triple(est.value), 10_000, TOL)
    roles = {
        name: classify_role(SelfMap.plain(lambda x, d=shift: x + d, name), s.regions).role
        for name, shift in (("T", PI), ("S", 2 * PI), ("K", 3 * PI))
    }
    ok = (
        cert.constant <= 1 / 3 + TOL
        and abs(est.value - 4 * PI) <= TOL
        and abs(est.value - oracle) <= TOL
        and roles == {"T": "right_cyclic", "S": "left_cyclic", "K": "noncyclic"}
    )
    criterion(4, ok, f"r_hat={cert.constant:.6g} distance={est.value:.12g} (oracle {oracle:.12g}) roles={roles}")
    assert ok


@pytest.mark.parametrize("name", ["semi_max_half", "semi_max_sine"])
def test_criterion_5_semi_contraction_max_examples(criterion, name):
    tr, conv = coincidence(name)
    cert = certify_semi_contraction(tr, 10_000, TOL)
    anti = certify_anti_lipschitz(tr.k, tr.regions, tr.g, 10_000, TOL)
    p = conv.limit[0]
    ok = cert.constant <= 0.5 + TOL and anti.constant <= 3 and abs(p) <= 1e-6
    detail = f"{name}: r_hat={cert.constant:.6g} c_hat={anti.constant:.6g} p={p:.2e}"
    if cert.witness is not None:
        detail += f" witness={cert.witness['points']} required_r={cert.witness['required_r']:.6g}"
    criterion(f"5 {name}", ok, detail)
    assert ok


def test_criterion_6_trivial_semi_contraction(criterion):
    s = builtin("semi_trivial")
    tr = s.triple(0.0)
    cert = certify_semi_contraction(tr, 10_000, TOL, r=0.5)
    zero = cert.detail["max_lhs_first"] == 0.0 and cert.detail["max_lhs_second"] == 0.0
    ok = cert.passed and zero
    criterion(6, ok, f"passed={cert.passed} max_lhs=({cert.detail['max_lhs_first']}, {cert.detail['max_lhs_second']})")
    assert ok


def test_criterion_7_uniform_convexity(criterion):
    alphas = {
        eps: estimate_uniform_convexity(PERIM, CENTROID, eps, r_samples=(0.5, 1.0, 2.0), config_samples=100_000, seed=0).alpha_hat
        for eps in (0.25, 0.5, 1.0)
    }
    broken = ConvexStructure(lambda x, y, z, w: x.copy(), "returns_x")
    rep = check_convex_structure(PERIM, broken, sample_convex_configs(10_000, seed=0))
    rejected = not rep.passed and len(rep.witnesses) > 0
    ok = all(a > 0 for a in alphas.values()) and rejected
    criterion(7, ok, f"alpha_hat={alphas} broken_combiner_rejected={rejected}")
    assert ok


def test_criterion_8_falsification(criterion):
    R = {n: Region.interval(n, 0, 2) for n in "ABC"}
    ident = SelfMap.plain(lambda x: x, "I")
    tr = RlnTriple(ident, ident, ident, R, PERIM, 0.0)
    cert = certify_tripartite_contraction(tr, np.array([[0.0, 1.0, 2.0]]), TOL)
    forced = cert.witness is not None and cert.witness["required_r"] >= 1.0
    replay_cert = replay_contraction_witness(tr, cert)

    first_only = GMetric(lambda x, y, z: np.abs(x[:, 0] - y[:, 0]), "first_only")
    rep = check_g_axioms(first_only, sample_tuples(1000, seed=0), TOL)
    sym = rep.checks["axiom_symmetry"]
    replay_all = all(replay_witness(first_only, w) for w in rep.witnesses)
    ok = forced and replay_cert and not sym.passed and len(sym.witnesses) > 0 and replay_all
    criterion(
        8,
        ok,
        f"identity witness required_r={cert.witness['required_r'] if cert.witness else None} replay={replay_cert} "
        f"symmetry_failed={not sym.passed} witnesses_replayed={replay_all} ({len(rep.witnesses)})",
    )
    assert ok


def test_criterion_9_parser_and_exit_codes(criterion, tmp_path, capsys):
    round_trips = []

    @settings(max_examples=100, database=None)
    @given(exprs)
    def prop(e):
        assert parse_expr(to_source(e)) == e
        round_trips.append(1)

    prop()
    x = 0.7
    grammar = (
        eval_expr(parse_expr("0.25*sin(x)"), x) == 0.25 * math.sin(x)
        and abs(eval_expr(parse_expr("12*x + 3*pi"), x) - (12 * x + 3 * PI)) <= 1e-12
        and eval_expr(parse_expr("on C: 0.5*sin(x); else: 0"), x, "C", {"A", "B", "C"}) == 0.5 * math.sin(x)
        and eval_expr(parse_expr("on C: 0.5*sin(x); else: 0"), x, "A", {"A", "B", "C"}) == 0.0
    )
    bad = tmp_path / "bad.toml"
    bad.write_text("name = [unterminated\n")
    codes = (main(["run", "sine_34"]), main(["certify", "semi_max_half"]), main(["run", str(bad)]))
    capsys.readouterr()
    ok = len(round_trips) >= 100 and grammar and codes == (0, 1, 2)
    criterion(9, ok, f"round_trips={len(round_trips)} grammar={grammar} exit_codes={codes}")
    assert ok


def test_criterion_10_determinism(criterion):
    cmd = [sys.executable, "-m", "gmetric", "run", "sine_34", "--seed", "7"]
    a = subprocess.run(cmd, capture_output=True).stdout
    b = subprocess.run(cmd, capture_output=True).stdout
    ok = a == b and json.loads(a)["status"] == "ok"
    criterion(10, ok, f"identical={a == b} bytes={len(a)}")
    assert ok
