"""The two max-metric semi-contraction scenarios.

Both orbits land on p = 0, yet the sampled semi-contraction constant is 1:
at x = 0, y = 0, z = 1 the mixed value G(Tx,Sy,Kz) equals G(Kx,Ky,Kz),
so no r < 1 satisfies the first inequality there. The inclusion chain and
the left-cyclic role of S also fail, because S sends C into [0, 1/4] or
[0, sin(1)/2], which is not inside B = [-1, 0].

Run with ``python demos/max_examples.py``.
"""

from gmetric.mappings import certify_semi_contraction, check_inclusion_chain, classify_role, replay_contraction_witness
from gmetric.orbit import find_coincidence_point
from gmetric.scenario import builtin


def main():
    for name in ("semi_max_half", "semi_max_sine"):
        s = builtin(name)
        triple = s.triple(0.0)
        print(f"{name}: {s.description}")
        cert = certify_semi_contraction(triple, 10_000)
        w = cert.witness
        print(f"  sampled r = {cert.constant:g}; witness {w['points']} needs r >= {w['required_r']:g}")
        print(f"  witness replays: {replay_contraction_witness(triple, cert)}")
        role = classify_role(triple.s, s.regions)
        print(f"  S roles: {role.roles or 'none'}; left-cyclic counterexample: {role.witnesses.get('left_cyclic')}")
        incl = check_inclusion_chain(triple)
        print(f"  inclusion chain: {incl.passed}, first failure {incl.witness['inclusion'] if incl.witness else None}")
        rep = find_coincidence_point(triple, s.x0())
        print(f"  orbit still reaches p = {rep.limit[0]:g} in {rep.steps} steps\n")


if __name__ == "__main__":
    main()
