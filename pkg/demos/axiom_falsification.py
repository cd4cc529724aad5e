"""Show how the checkers falsify candidate G-metrics and replay witnesses.

Run with ``python demos/axiom_falsification.py``.
"""

import numpy as np

from gmetric.core import GMetric, abs_metric, full_suite, g_from_metric_sum, replay_witness, sample_tuples


def first_only(x, y, z):
    """|x - y| with z ignored."""
    return np.abs(x[:, 0] - y[:, 0])


def squared_perimeter(x, y, z):
    """Squares break the rectangle inequality far from the diagonal."""
    g = g_from_metric_sum(abs_metric, 1.0)
    return g.fn(x, y, z) ** 2


def main():
    samples = sample_tuples(20_000, -10, 10, seed=1)
    for fn in (first_only, squared_perimeter):
        G = GMetric(fn, fn.__name__)
        rep = full_suite(G, samples)
        print(f"{fn.__name__}: {'passes' if rep.passed else 'fails'} {sorted(rep.failed())}")
        for w in rep.witnesses[:3]:
            print(f"  {w.check}: lhs={w.lhs:.4g} rhs={w.rhs:.4g} points={w.points} replays={replay_witness(G, w)}")
    good = g_from_metric_sum(abs_metric, 1.0)
    print("perimeter G passes everything:", full_suite(good, samples).passed)


if __name__ == "__main__":
    main()
