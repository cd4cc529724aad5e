"""Command-line interface.

Exit codes: 0 success, 1 a check or expected value failed, 2 bad input,
3 numerical failure (solver breakdown or divergence).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .core import DEFAULT_TOL
from .errors import GMetricError
from .scenario import BUILTIN_DATA, Budgets, exit_code_for, jsonable, resolve_scenario, run_scenario

U64_MAX = 2**64 - 1


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0, help="random seed (default 0)")
    common.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL, help="check tolerance (default 1e-9)")
    common.add_argument(
        "--budget", type=_positive_int, default=100_000, help="evaluation budget for the three-set distance"
    )

    p = argparse.ArgumentParser(prog="gmetric", description="Check G-metric scenarios and run their orbits.")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, help_text, report_out=True):
        sp = sub.add_parser(name, parents=[common], help=help_text)
        sp.add_argument("scenario", help="built-in scenario name or path to a .toml file")
        if report_out:
            sp.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
        return sp

    scenario_cmd("check-axioms", "sampled axiom, derived-inequality and sandwich checks")
    scenario_cmd("certify", "role, contraction, anti-Lipschitz, commuting and inclusion certificates")
    scenario_cmd("distance", "estimate the three-set distance G(A,B,C)")
    it = scenario_cmd("iterate", "run the orbit and extract the coincidence point")
    it.add_argument("--x0", type=float, help="starting point in A (default: the scenario's)")
    it.add_argument("--max-steps", type=int, help="step budget (default: the scenario's)")
    run = scenario_cmd("run", "full pipeline")
    run.add_argument("--timing", action="store_true", help="include per-stage wall time in the report")
    ex = scenario_cmd("export-traces", "write every orbit trace to a directory", report_out=False)
    ex.add_argument("--format", choices=("csv", "json"), default="csv")
    ex.add_argument("--out", type=Path, required=True, help="output directory")
    ex.add_argument("--x0", type=float)
    ex.add_argument("--max-steps", type=int)
    sub.add_parser("list-builtins", help="list the built-in scenarios")
    return p


def _emit(doc: dict, out: Path | None):
    text = json.dumps(jsonable(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _pick(report, keys) -> dict:
    d = report.to_dict()
    return {k: d[k] for k in ("scenario", *keys, "expected_check", "status", "error")}


def _export(report, fmt: str, out: Path):
    if report.orbit is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    traces = report.orbit["traces"]
    if fmt == "json":
        (out / "traces.json").write_text(json.dumps(traces, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return
    for name, values in traces.items():
        with open(out / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "value"])
            w.writerows(enumerate(values))


def run_command(args) -> int:
    if args.command == "list-builtins":
        for name, data in BUILTIN_DATA.items():
            print(f"{name}\t{data['description']}")
        return 0

    scenario = resolve_scenario(args.scenario)
    budgets = Budgets(distance=args.budget)
    kw = {"seed": args.seed, "budgets": budgets, "tol": args.tol}
    cmd = args.command
    if cmd == "check-axioms":
        rep = run_scenario(scenario, stages=("axioms",), **kw)
        _emit(_pick(rep, ("axioms",)), args.out)
    elif cmd == "certify":
        rep = run_scenario(scenario, stages=("certificates",), **kw)
        _emit(_pick(rep, ("distance", "certificates")), args.out)
    elif cmd == "distance":
        rep = run_scenario(scenario, stages=("distance",), **kw)
        _emit(_pick(rep, ("distance",)), args.out)
    elif cmd == "iterate":
        rep = run_scenario(
            scenario, stages=("orbit",), x0=args.x0, max_steps=args.max_steps, iterate=True, **kw
        )
        _emit(_pick(rep, ("distance", "orbit", "convergence")), args.out)
    elif cmd == "run":
        rep = run_scenario(scenario, **kw)
        _emit(rep.to_dict(timing=args.timing), args.out)
    elif cmd == "export-traces":
        rep = run_scenario(
            scenario, stages=("orbit",), x0=args.x0, max_steps=args.max_steps, iterate=True, **kw
        )
        _export(rep, args.format, args.out)
        _emit(_pick(rep, ("convergence",)), None)
    else:  # pragma: no cover - argparse rejects unknown commands
        raise AssertionError(cmd)
    if rep.error is not None:
        print(f"error: {rep.error['type']}: {rep.error['message']}", file=sys.stderr)
    return rep.exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run_command(args)
    except GMetricError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return exit_code_for(err)


if __name__ == "__main__":
    sys.exit(main())
