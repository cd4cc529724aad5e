"""Scenario files, the built-in catalog and the full pipeline run.

A scenario is a small TOML document::

    name = "sine_34"

    [space]
    metric = "abs"          # only the absolute difference is built in
    g = "sum"               # "sum" (scaled perimeter) or "max"
    scale = 1.0             # sum only

    [regions]
    A = [[0, 1]]                                  # union of closed intervals
    B = { points = [0, 1, 2] }                    # finite set
    C = { lattice = { step = "3*pi", offset = "2*pi", n_min = 1, n_max = 10 } }

    [maps]
    T = "0.25*sin(x)"
    S = "on C: 0.25*x; else: 0"
    K = "x"

    [expected]              # optional regression targets
    r = 0.75                # certified constant must not exceed this
    c = 2                   # anti-Lipschitz constant must not exceed this
    gabc = 0                # three-set distance
    p = 0                   # coincidence point, within p_tol
    claims = ["role", "contraction"]

    [run]                   # optional
    certificate = "contraction"   # or "semi"
    x0 = 1.0
    iterate = true
    max_steps = 200

Numbers in regions and ``x0`` may be constant expressions such as ``"3*pi"``.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import tomli

from .core import DEFAULT_TOL, GMetric, abs_metric, full_suite, g_from_metric_max, g_from_metric_sum
from .errors import (
    ConvergenceFailure,
    ExprSyntaxError,
    GMetricError,
    InputError,
    InverseSolveFailed,
    RegionViolation,
    ScenarioParseError,
    ScenarioValidationError,
)
from .expr import Var, eval_expr, labels_of, parse_expr
from .mappings import (
    LABELS,
    RlnTriple,
    SelfMap,
    certify_anti_lipschitz,
    certify_rln,
    certify_semi_contraction,
    certify_tripartite_contraction,
    check_commuting,
    check_inclusion_chain,
)
from .orbit import SolveConfig, find_coincidence_point
from .regions import Region, g_set_distance

TOP_KEYS = {"name", "description", "space", "regions", "maps", "expected", "run"}
SPACE_KEYS = {"metric", "g", "scale"}
EXPECTED_KEYS = {"r", "c", "gabc", "p", "p_tol", "claims"}
RUN_KEYS = {"certificate", "x0", "iterate", "max_steps"}
LATTICE_KEYS = {"step", "offset", "n_min", "n_max"}
MAP_NAMES = ("T", "S", "K")
CERTIFICATES = {"contraction": "contraction", "semi": "semi_contraction"}
CLAIMABLE = ("role", "contraction", "semi_contraction", "anti_lipschitz", "commuting", "inclusion_chain")
EXPECTED_TOL = 1e-9
STAGES = ("axioms", "distance", "certificates", "orbit")


def _reject_unknown(section: str, got, allowed):
    extra = sorted(set(got) - set(allowed))
    if extra:
        raise ScenarioValidationError(f"unknown key(s) in {section}: {', '.join(extra)}")


def constant(value, where: str) -> float:
    """A finite number, or a string holding an expression without ``x``."""
    if isinstance(value, bool):
        raise ScenarioValidationError(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        v = float(value)
    elif isinstance(value, str):
        try:
            e = parse_expr(value)
        except ExprSyntaxError as err:
            raise ScenarioValidationError(f"{where}: {err}") from err
        if _uses_x(e) or labels_of(e):
            raise ScenarioValidationError(f"{where}: a constant may not depend on x or a region")
        v = eval_expr(e, 0.0)
    else:
        raise ScenarioValidationError(f"{where}: expected a number or expression string")
    if not math.isfinite(v):
        raise ScenarioValidationError(f"{where}: value is not finite")
    return v


def _uses_x(e) -> bool:
    if isinstance(e, Var):
        return True
    return any(_uses_x(c) for c in _children(e))


def _children(e):
    for name in ("arg", "left", "right", "default"):
        if hasattr(e, name):
            yield getattr(e, name)
    for a in getattr(e, "args", ()):
        yield a
    for _, body in getattr(e, "branches", ()):
        yield body


# ---------------------------------------------------------------------------
# scenario


@dataclass(frozen=True)
class RunSettings:
    certificate: str = "contraction"
    x0: object = None
    iterate: bool = True
    max_steps: int = 200


@dataclass
class Scenario:
    """A validated scenario. ``data`` is the canonical document it came from."""

    name: str
    data: dict
    regions: dict
    maps: dict
    g: GMetric
    expected: dict
    run: RunSettings
    description: str = ""

    def triple(self, gabc: float = 0.0) -> RlnTriple:
        return RlnTriple(self.maps["T"], self.maps["S"], self.maps["K"], self.regions, self.g, float(gabc))

    def x0(self) -> float:
        if self.run.x0 is None:
            return float(self.regions["A"].sample(1, 0)[0, 0])
        return constant(self.run.x0, "run.x0")

    @property
    def claims(self) -> tuple:
        default = ("role", CERTIFICATES[self.run.certificate])
        return tuple(self.expected.get("claims", default))

    def to_toml(self) -> str:
        return dumps_toml(self.data)


def _build_region(label: str, form) -> Region:
    where = f"regions.{label}"
    if isinstance(form, list):
        if not form:
            raise ScenarioValidationError(f"{where}: empty interval list")
        pairs = []
        for item in form:
            if not (isinstance(item, list) and len(item) == 2):
                raise ScenarioValidationError(f"{where}: intervals are [lo, hi] pairs")
            lo, hi = constant(item[0], where), constant(item[1], where)
            if lo > hi:
                raise ScenarioValidationError(f"{where}: interval [{lo}, {hi}] is reversed")
            pairs.append((lo, hi))
        return Region.union(label, pairs)
    if isinstance(form, dict) and set(form) == {"points"}:
        pts = form["points"]
        if not isinstance(pts, list) or not pts:
            raise ScenarioValidationError(f"{where}: points must be a nonempty list")
        return Region.points(label, np.array([constant(p, where) for p in pts])[:, None])
    if isinstance(form, dict) and set(form) == {"lattice"}:
        lat = form["lattice"]
        if not isinstance(lat, dict):
            raise ScenarioValidationError(f"{where}: lattice must be a table")
        _reject_unknown(f"{where}.lattice", lat, LATTICE_KEYS)
        missing = LATTICE_KEYS - set(lat) - {"offset"}
        if missing:
            raise ScenarioValidationError(f"{where}.lattice: missing {', '.join(sorted(missing))}")
        n_min, n_max = lat["n_min"], lat["n_max"]
        if not (isinstance(n_min, int) and isinstance(n_max, int)) or isinstance(n_min, bool):
            raise ScenarioValidationError(f"{where}.lattice: n_min and n_max must be integers")
        step = constant(lat["step"], where)
        offset = constant(lat.get("offset", 0), where)
        try:
            return Region.lattice(label, step, offset, n_min, n_max)
        except InputError as err:
            raise ScenarioValidationError(f"{where}: {err}") from err
    raise ScenarioValidationError(f"{where}: expected an interval list, {{points = ...}} or {{lattice = ...}}")


def _build_map(name: str, text) -> SelfMap:
    if not isinstance(text, str):
        raise ScenarioValidationError(f"maps.{name}: expected an expression string")
    try:
        e = parse_expr(text)
    except ExprSyntaxError as err:
        raise ScenarioValidationError(f"maps.{name}: {err}") from err
    unknown = labels_of(e) - set(LABELS)
    if unknown:
        raise ScenarioValidationError(f"maps.{name}: guard uses undefined region {sorted(unknown)[0]}")

    def forward(x, label):
        return eval_expr(e, x[:, 0], label, LABELS)[:, None]

    return SelfMap(forward, name)


def _build_g(space: dict) -> GMetric:
    _reject_unknown("space", space, SPACE_KEYS)
    if space.get("metric", "abs") != "abs":
        raise ScenarioValidationError(f"space.metric: only 'abs' is built in, got {space['metric']!r}")
    kind = space.get("g", "sum")
    if kind == "max":
        if "scale" in space:
            raise ScenarioValidationError("space.scale applies to g = 'sum' only")
        return g_from_metric_max(abs_metric)
    if kind != "sum":
        raise ScenarioValidationError(f"space.g must be 'sum' or 'max', got {kind!r}")
    scale = constant(space.get("scale", 1.0), "space.scale")
    if scale <= 0:
        raise ScenarioValidationError("space.scale must be positive")
    return g_from_metric_sum(abs_metric, scale)


def _validate_expected(exp: dict) -> dict:
    _reject_unknown("expected", exp, EXPECTED_KEYS)
    out = {}
    for key in ("r", "c", "gabc", "p", "p_tol"):
        if key in exp:
            out[key] = constant(exp[key], f"expected.{key}")
    if "claims" in exp:
        claims = exp["claims"]
        if not isinstance(claims, list) or any(c not in CLAIMABLE for c in claims):
            raise ScenarioValidationError(f"expected.claims: each entry must be one of {', '.join(CLAIMABLE)}")
        out["claims"] = tuple(claims)
    return out


def _validate_run(run: dict) -> RunSettings:
    _reject_unknown("run", run, RUN_KEYS)
    cert = run.get("certificate", "contraction")
    if cert not in CERTIFICATES:
        raise ScenarioValidationError(f"run.certificate must be one of {', '.join(CERTIFICATES)}")
    iterate = run.get("iterate", True)
    if not isinstance(iterate, bool):
        raise ScenarioValidationError("run.iterate must be a boolean")
    steps = run.get("max_steps", 200)
    if not isinstance(steps, int) or isinstance(steps, bool) or steps < 3:
        raise ScenarioValidationError("run.max_steps must be an integer >= 3")
    x0 = run.get("x0")
    if x0 is not None:
        constant(x0, "run.x0")
    return RunSettings(cert, x0, iterate, steps)


def scenario_from_dict(data: dict, source: str = "<dict>") -> Scenario:
    """Validate a parsed document and build the regions, maps and G."""
    if not isinstance(data, dict):
        raise ScenarioValidationError(f"{source}: top level must be a table")
    _reject_unknown("top level", data, TOP_KEYS)
    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise ScenarioValidationError(f"{source}: missing scenario name")
    for section in ("regions", "maps"):
        if not isinstance(data.get(section), dict):
            raise ScenarioValidationError(f"{source}: missing [{section}] section")
    for section in ("space", "expected", "run"):
        if section in data and not isinstance(data[section], dict):
            raise ScenarioValidationError(f"{source}: [{section}] must be a table")

    _reject_unknown("regions", data["regions"], LABELS)
    missing = [lb for lb in LABELS if lb not in data["regions"]]
    if missing:
        raise ScenarioValidationError(f"{source}: region {missing[0]} is not defined")
    regions = {lb: _build_region(lb, data["regions"][lb]) for lb in LABELS}

    _reject_unknown("maps", data["maps"], MAP_NAMES)
    missing = [m for m in MAP_NAMES if m not in data["maps"]]
    if missing:
        raise ScenarioValidationError(f"{source}: map {missing[0]} is not defined")
    maps = {m: _build_map(m, data["maps"][m]) for m in MAP_NAMES}

    g = _build_g(data.get("space", {}))
    expected = _validate_expected(data.get("expected", {}))
    run = _validate_run(data.get("run", {}))
    scenario = Scenario(name, data, regions, maps, g, expected, run, str(data.get("description", "")))
    if run.x0 is not None and not regions["A"].member(np.array([[scenario.x0()]]))[0]:
        raise ScenarioValidationError(f"{source}: run.x0 is not in region A")
    return scenario


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ScenarioParseError(f"cannot read {path}: {err.strerror or err}") from err
    return loads_scenario(text, str(path))


def loads_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as err:
        raise ScenarioParseError(f"{source}: {err}") from err
    return scenario_from_dict(data, source)


# ---------------------------------------------------------------------------
# TOML writer for the schema above


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{ " + ", ".join(f"{k} = {_toml_value(x)}" for k, x in v.items()) + " }"
    raise TypeError(f"cannot write {type(v).__name__} as TOML")


def dumps_toml(data: dict) -> str:
    lines = []
    for k, v in data.items():
        if not isinstance(v, dict):
            lines.append(f"{k} = {_toml_value(v)}")
    for k, v in data.items():
        if isinstance(v, dict):
            lines.append(f"\n[{k}]")
            lines.extend(f"{kk} = {_toml_value(vv)}" for kk, vv in v.items())
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# built-in catalog

_INTERVALS_123 = {"A": [[0, 1]], "B": [[0, 2]], "C": [[0, 3]]}
_MAX_REGIONS = {"A": [[0, 1]], "B": [[-1, 0]], "C": [[0, 1]]}
_ALL_CLAIMS = ["role", "inclusion_chain", "commuting", "anti_lipschitz"]

BUILTIN_DATA = {
    "sine_34": {
        "name": "sine_34",
        "description": "T = sin/4, S = sin/2, K = id on [0,1], [0,2], [0,3] with the perimeter G",
        "space": {"metric": "abs", "g": "sum", "scale": 1.0},
        "regions": _INTERVALS_123,
        "maps": {"T": "0.25*sin(x)", "S": "0.5*sin(x)", "K": "x"},
        "expected": {"r": 0.75, "c": 2.0, "gabc": 0.0, "p": 0.0, "claims": ["contraction", *_ALL_CLAIMS]},
        "run": {"certificate": "contraction", "x0": 1.0, "iterate": True, "max_steps": 200},
    },
    "sine_56": {
        "name": "sine_56",
        "description": "T = sin/3, S = x/2, K = id on [0,1], [0,2], [0,3] with the perimeter G",
        "space": {"metric": "abs", "g": "sum", "scale": 1.0},
        "regions": _INTERVALS_123,
        "maps": {"T": "sin(x)/3", "S": "0.5*x", "K": "x"},
        "expected": {"r": "5/6", "c": 2.0, "gabc": 0.0, "p": 0.0, "claims": ["contraction", *_ALL_CLAIMS]},
        "run": {"certificate": "contraction", "x0": 1.0, "iterate": True, "max_steps": 200},
    },
    "affine_13": {
        "name": "affine_13",
        "description": "T = x+pi, S = 4x+2pi, K = 12x+3pi on the lattices 3n*pi, 3n*pi+pi, 3n*pi+2pi (n = 1..10)",
        "space": {"metric": "abs", "g": "sum", "scale": 1.0},
        "regions": {
            "A": {"lattice": {"step": "3*pi", "offset": 0, "n_min": 1, "n_max": 10}},
            "B": {"lattice": {"step": "3*pi", "offset": "pi", "n_min": 1, "n_max": 10}},
            "C": {"lattice": {"step": "3*pi", "offset": "2*pi", "n_min": 1, "n_max": 10}},
        },
        "maps": {"T": "x + pi", "S": "4*x + 2*pi", "K": "12*x + 3*pi"},
        "expected": {"r": "1/3", "gabc": "4*pi", "claims": ["role", "contraction"]},
        "run": {"certificate": "contraction", "iterate": False},
    },
    "semi_trivial": {
        "name": "semi_trivial",
        "description": "T = S = 0, K = id on A and B and 0 on C, perimeter G",
        "space": {"metric": "abs", "g": "sum", "scale": 1.0},
        "regions": _INTERVALS_123,
        "maps": {"T": "0", "S": "0", "K": "on C: 0; else: x"},
        "expected": {"r": 0.5, "gabc": 0.0, "claims": ["semi_contraction"]},
        "run": {"certificate": "semi", "x0": 0.0, "iterate": True, "max_steps": 200},
    },
    "semi_max_half": {
        "name": "semi_max_half",
        "description": "T = 0, S = x/4 on C and 0 elsewhere, K = x/2, max G, A = C = [0,1], B = [-1,0]",
        "space": {"metric": "abs", "g": "max"},
        "regions": _MAX_REGIONS,
        "maps": {"T": "0", "S": "on C: 0.25*x; else: 0", "K": "0.5*x"},
        "expected": {"r": 0.5, "c": 3.0, "gabc": 0.0, "p": 0.0, "claims": ["semi_contraction", *_ALL_CLAIMS]},
        "run": {"certificate": "semi", "x0": 1.0, "iterate": True, "max_steps": 200},
    },
    "semi_max_sine": {
        "name": "semi_max_sine",
        "description": "T = 0, S = sin(x)/2 on C and 0 elsewhere, K = id, max G, A = C = [0,1], B = [-1,0]",
        "space": {"metric": "abs", "g": "max"},
        "regions": _MAX_REGIONS,
        "maps": {"T": "0", "S": "on C: 0.5*sin(x); else: 0", "K": "x"},
        "expected": {"r": 0.5, "c": 3.0, "gabc": 0.0, "p": 0.0, "claims": ["semi_contraction", *_ALL_CLAIMS]},
        "run": {"certificate": "semi", "x0": 1.0, "iterate": True, "max_steps": 200},
    },
}


def builtin(name: str) -> Scenario:
    if name not in BUILTIN_DATA:
        raise ScenarioValidationError(f"no built-in scenario {name!r}; try one of {', '.join(BUILTIN_DATA)}")
    return scenario_from_dict(json.loads(json.dumps(BUILTIN_DATA[name])), f"builtin:{name}")


def builtin_file(name: str) -> Path:
    """Path of the shipped TOML copy of a built-in scenario."""
    return Path(str(resources.files("gmetric") / "scenarios" / f"{name}.toml"))


def resolve_scenario(ref: str) -> Scenario:
    """A built-in name or a path to a scenario file."""
    if ref in BUILTIN_DATA:
        return builtin(ref)
    return load_scenario(ref)


# ---------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True)
class Budgets:
    axiom_samples: int = 10_000
    certificate_samples: int = 10_000
    role_samples: int = 200
    inclusion_samples: int = 200
    commuting_samples: int = 1_000
    distance: int = 100_000


def jsonable(v):
    """Plain JSON data; non-finite floats become the strings 'inf', '-inf', 'nan'."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return v


def exit_code_for(err: BaseException) -> int:
    if isinstance(err, InputError):
        return 2
    return 3


@dataclass
class RunReport:
    scenario: str
    axioms: dict | None = None
    distance: dict | None = None
    certificates: dict = field(default_factory=dict)
    orbit: dict | None = None
    convergence: dict | None = None
    expected_check: dict = field(default_factory=dict)
    status: str = "ok"
    error: dict | None = None
    timing: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return int(self.error["exit_code"])
        return 0 if self.status == "ok" else 1

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "scenario": self.scenario,
            "axioms": self.axioms,
            "distance": self.distance,
            "certificates": self.certificates,
            "orbit": self.orbit,
            "convergence": self.convergence,
            "expected_check": self.expected_check,
            "status": self.status,
            "error": self.error,
        }
        if timing:
            out["timing"] = self.timing
        return jsonable(out)

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True, indent=2, allow_nan=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(**{k: d[k] for k in d})


def _axiom_samples(s: Scenario, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pool = np.concatenate([s.regions[lb].sample(n, rng) for lb in LABELS])
    idx = rng.integers(0, pool.shape[0], size=(n, 4))
    return pool[idx]


def _check(expected, observed, passed):
    return {"expected": expected, "observed": observed, "passed": bool(passed)}


def _expected_check(s: Scenario, rep: RunReport, main: str, ran: set) -> dict:
    exp = s.expected
    items = {}
    certs = rep.certificates
    if rep.axioms is not None:
        items["axioms"] = _check(True, rep.axioms["passed"], rep.axioms["passed"])
    if "r" in exp and main in certs:
        r_hat = certs[main]["constant"]
        items["r"] = _check(exp["r"], r_hat, r_hat <= exp["r"] + EXPECTED_TOL)
    if "c" in exp and "anti_lipschitz" in certs:
        c_hat = certs["anti_lipschitz"]["constant"]
        items["c"] = _check(exp["c"], c_hat, c_hat <= exp["c"] + EXPECTED_TOL)
    if "gabc" in exp and rep.distance is not None:
        v = rep.distance["value"]
        items["gabc"] = _check(exp["gabc"], v, abs(v - exp["gabc"]) <= EXPECTED_TOL * (1.0 + abs(exp["gabc"])))
    if "p" in exp and "orbit" in ran:
        limit = None if rep.convergence is None else rep.convergence["limit"]
        p_tol = exp.get("p_tol", 1e-6)
        ok = limit is not None and abs(limit[0] - exp["p"]) <= p_tol
        items["p"] = _check(exp["p"], None if limit is None else limit[0], ok)
    if certs:
        for claim in s.claims:
            if claim in certs:
                items[f"claim:{claim}"] = _check(True, certs[claim]["passed"], certs[claim]["passed"])
    return {"items": items, "passed": all(v["passed"] for v in items.values())}


def run_scenario(
    s: Scenario,
    seed: int = 0,
    budgets: Budgets | None = None,
    tol: float = DEFAULT_TOL,
    stages=STAGES,
    x0=None,
    max_steps: int | None = None,
    iterate: bool | None = None,
) -> RunReport:
    """Run the requested stages in order and collect one report.

    A library error stops the run; the report keeps everything computed so
    far, records the error and its exit code, and carries any partial orbit.
    ``iterate`` overrides the scenario's own setting for the orbit stage.
    """
    budgets = budgets or Budgets()
    rep = RunReport(s.name)
    main = CERTIFICATES[s.run.certificate]
    gabc, r_hat = 0.0, None
    stage, ran = None, set()
    try:
        if "axioms" in stages:
            stage, t0 = "axioms", time.perf_counter()
            rep.axioms = full_suite(s.g, _axiom_samples(s, budgets.axiom_samples, seed), tol).to_dict()
            rep.timing[stage] = time.perf_counter() - t0
            ran.add(stage)
        if "distance" in stages or "orbit" in stages or "certificates" in stages:
            stage, t0 = "distance", time.perf_counter()
            est = g_set_distance(s.g, s.regions["A"], s.regions["B"], s.regions["C"], budgets.distance, tol, seed)
            rep.distance = est.to_dict()
            gabc = est.value
            rep.timing[stage] = time.perf_counter() - t0
            ran.add(stage)
        triple = s.triple(gabc)
        if "certificates" in stages:
            stage, t0 = "certificates", time.perf_counter()
            certs = {"role": certify_rln(triple, budgets.role_samples, seed)}
            certify = certify_tripartite_contraction if main == "contraction" else certify_semi_contraction
            certs[main] = certify(triple, budgets.certificate_samples, tol, None, seed)
            r_hat = certs[main].constant
            certs["anti_lipschitz"] = certify_anti_lipschitz(
                triple.k, s.regions, s.g, budgets.certificate_samples, tol, s.expected.get("c"), seed
            )
            certs["inclusion_chain"] = check_inclusion_chain(triple, budgets.inclusion_samples, seed=seed)
            certs["commuting"] = check_commuting(triple.s, triple.k, s.regions, s.g, budgets.commuting_samples, tol, seed)
            rep.certificates = {k: v.to_dict() for k, v in certs.items()}
            rep.timing[stage] = time.perf_counter() - t0
            ran.add(stage)
        if "orbit" in stages and (s.run.iterate if iterate is None else iterate):
            stage, t0 = "orbit", time.perf_counter()
            cfg = SolveConfig(max_steps=max_steps or s.run.max_steps)
            start = s.x0() if x0 is None else float(x0)
            r_use = r_hat if r_hat is not None and 0.0 < r_hat < 1.0 else None
            conv = find_coincidence_point(triple, start, cfg, r=r_use, r_reference=s.expected.get("r"))
            rep.orbit = conv.orbit.to_dict()
            rep.convergence = conv.to_dict()
            rep.timing[stage] = time.perf_counter() - t0
            ran.add(stage)
    except GMetricError as err:
        rep.status = "error"
        rep.error = {
            "stage": stage,
            "type": type(err).__name__,
            "message": str(err),
            "exit_code": exit_code_for(err),
        }
        if isinstance(err, (ConvergenceFailure, InverseSolveFailed, RegionViolation)) and err.orbit is not None:
            rep.orbit = err.orbit.to_dict()
        if isinstance(err, ConvergenceFailure):
            rep.error["best"] = err.best
            rep.error["final_gap"] = err.final_gap
        rep.timing[stage] = time.perf_counter() - t0
        ran.add(stage)
    rep.expected_check = _expected_check(s, rep, main, ran)
    if rep.status != "error" and not rep.expected_check["passed"]:
        rep.status = "failed"
    return rep
