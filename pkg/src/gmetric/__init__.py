"""Sampled checks and orbit solvers for G-metric spaces and tripartite mappings."""

from .convexity import CENTROID, ConvexStructure, check_convex_structure, estimate_uniform_convexity
from .core import (
    GMetric,
    Metric,
    abs_metric,
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
from .expr import eval_expr, parse_expr, to_source
from .mappings import (
    RlnTriple,
    SelfMap,
    certify_anti_lipschitz,
    certify_rln,
    certify_semi_contraction,
    certify_tripartite_contraction,
    check_commuting,
    check_inclusion_chain,
    classify_role,
)
from .orbit import SolveConfig, check_cauchy, check_g_bounded, check_rate_bounds, find_coincidence_point, generate_orbit
from .regions import Region, g_set_distance, proximal_triple
from .scenario import builtin, load_scenario, run_scenario

__version__ = "0.1.0"
