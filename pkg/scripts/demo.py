"""Walk through one instance: Bethe roots, oracle polynomial, hierarchy,
joint kernel and (for n = 2) the constraint polynomial of the aggregate."""
import argparse

import numpy as np

from sixvertex_pde import closed_form as cf
from sixvertex_pde.bethe_solver import solve
from sixvertex_pde.cli import random_generic
from sixvertex_pde.hierarchy import (align, extract_hierarchy, kernel, leading_closed_form, overlap,
                                     perturb_aggregate)
from sixvertex_pde.lattice_oracle import TWISTED, OPEN, eigencheck, oracle_polynomial


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--boundary", choices=(TWISTED, OPEN), default=TWISTED)
    ap.add_argument("--L", type=int, default=3)
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--seed", type=int, default=3000)
    a = ap.parse_args()
    p = random_generic(a.boundary, a.L, a.seed)
    print(f"{a.boundary} L={a.L} n={a.n}  q={p.q:.4f}")
    br = solve(p, a.n)
    print(f"{len(br)} Bethe branch(es)")
    for r in br:
        S = oracle_polynomial(p, r)
        H = extract_hierarchy(p, r)
        K = kernel(H.ops)
        lc = leading_closed_form(p, r, H.samples)
        Kp = kernel(extract_hierarchy(p, perturb_aggregate(p, r, 1e-2), n=a.n).ops)
        print(f"  aggregate {r.aggregate:.6f}  eigencheck {eigencheck(p, r):.1e}")
        print(f"    {len(H.ops)} operators, saturation {H.saturation:.1e}, "
              f"max annihilation {max(o.residual(S) for o in H.ops):.1e}, "
              f"leading closed form {align(H.ops[-1].matrix, lc.matrix)[1]:.1e}")
        ov = overlap(K.basis[0], S) if len(K.basis) == 1 else float("nan")
        print(f"    kernel dim {len(K.basis)} (overlap {ov:.15f}); perturbed dim {len(Kp.basis)}, "
              f"σ_min/σ_max {Kp.spectrum[-1]:.1e}")
    if a.n == 2:
        cr = cf.s2_constraint(p) if a.boundary == TWISTED else cf.t2_constraint(p)
        print(f"constraint polynomial degree {len(cr.coeffs) - 1}: "
              f"{len(cr.solutions)} nontrivial root(s), {len(cr.trivial)} trivial")
        for s in cr.solutions:
            d = min(abs(s.aggregate - r.aggregate) for r in br)
            print(f"  root {s.aggregate:.10f}  distance to nearest branch {d:.1e}")


if __name__ == "__main__":
    np.set_printoptions(precision=4)
    main()
