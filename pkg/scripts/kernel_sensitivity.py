"""σ_min/σ_max of the joint kernel after shifting the aggregate by delta,
in the full monomial basis and in the symmetric basis, over parameter draws."""
import argparse

from sixvertex_pde.bethe_solver import solve
from sixvertex_pde.cli import random_generic
from sixvertex_pde.hierarchy import extract_hierarchy, kernel, perturb_aggregate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--boundary", default="open")
    ap.add_argument("--L", type=int, default=2)
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--draws", type=int, default=8)
    ap.add_argument("--delta", type=float, default=1e-2)
    a = ap.parse_args()
    print("seed  full-basis  symmetric-basis")
    for d in range(a.draws):
        seed = 1000 * a.L + d
        p = random_generic(a.boundary, a.L, seed)
        for r in solve(p, a.n):
            ops = extract_hierarchy(p, perturb_aggregate(p, r, a.delta), n=a.n).ops
            full, sym = kernel(ops).spectrum[-1], kernel(ops, symmetric=True).spectrum[-1]
            print(f"{seed:5d}  {full:.2e}    {sym:.2e}")


if __name__ == "__main__":
    main()
