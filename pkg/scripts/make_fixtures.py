"""Write tests/fixtures/constraint_references.json: reference constraint
polynomials (reference closed forms, plus corrected open ones) evaluated at
the parameter draws used by the tests."""
import json
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import numpy as np  # noqa: E402

from cases import params, homogeneous_open  # noqa: E402
from sixvertex_pde import closed_form as cf  # noqa: E402
from sixvertex_pde.lattice_oracle import TWISTED, OPEN  # noqa: E402


def c(z):
    return [float(np.real(z)), float(np.imag(z))]


def entry(name, p, fn):
    return {"name": name, "params": p.to_json(), "coeffs": [c(z) for z in fn(p)]}


def main(out=ROOT / "tests" / "fixtures" / "constraint_references.json"):
    recs = [
        entry("twisted_L2", params(TWISTED, 2), cf.twisted_two_site_reference),
        entry("twisted_L3", params(TWISTED, 3), cf.twisted_three_site_reference),
        entry("open_L2_reference", params(OPEN, 2), cf.open_two_site_reference),
        entry("open_L2_corrected", params(OPEN, 2), cf.open_two_site_reference_corrected),
        entry("open_L3_homogeneous_reference", homogeneous_open(3), cf.open_three_site_reference),
        entry("open_L3_homogeneous_corrected", homogeneous_open(3), cf.open_three_site_reference_corrected),
    ]
    out.write_text(json.dumps(recs, indent=1, sort_keys=True))
    print(f"wrote {len(recs)} references to {out}")


if __name__ == "__main__":
    main()
