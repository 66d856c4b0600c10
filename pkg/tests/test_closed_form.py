import json
import pathlib

import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from cases import branches, homogeneous_open, params
from sixvertex_pde import closed_form as cf
from sixvertex_pde.bethe_solver import reflect, solve
from sixvertex_pde.cli import random_generic
from sixvertex_pde.funeq import functional_residual, functional_scale
from sixvertex_pde.hierarchy import overlap
from sixvertex_pde.lattice_oracle import OPEN, TWISTED, ModelParams, oracle_polynomial

FIXTURES = pathlib.Path(__file__).resolve().parent / "fixtures" / "constraint_references.json"


# ---------------------------------------------------------------- n = 1

@pytest.mark.parametrize("boundary,L", [(TWISTED, 2), (TWISTED, 3), (OPEN, 2), (OPEN, 3)])
def test_n1_closed_form_is_oracle(boundary, L):
    p = params(boundary, L)
    for r in branches(boundary, L, 1):
        S = (cf.s1_poly if boundary == TWISTED else cf.t1_poly)(p, r.roots[0])
        assert overlap(S, oracle_polynomial(p, r)) > 1 - 1e-10


def test_n1_twisted_off_shell_raises():
    p = params(TWISTED, 3)
    with pytest.raises(cf.OffShellError) as e:
        cf.s1_poly(p, 0.4 + 0.7j)
    assert e.value.residue > 1e-8
    assert abs(cf.s1_residue(p, branches(TWISTED, 3, 1)[0].roots[0])) < 1e-12


def test_n1_open_residues():
    p = params(OPEN, 3)
    r = branches(OPEN, 3, 1)[0].roots[0]
    res = cf.t1_residues(p, r)
    assert max(abs(v) for v in res.values()) < 1e-10
    off = cf.t1_residues(p, r + 0.05)
    assert abs(off["plus"]) < 1e-10 and abs(off["minus"]) < 1e-10
    assert abs(off["root"]) > 1e-6
    with pytest.raises(cf.OffShellError):
        cf.t1_poly(p, r + 0.05)


@pytest.mark.parametrize("boundary", [TWISTED, OPEN])
def test_quotient_roots_match_solver(boundary):
    for d in range(6):
        p = random_generic(boundary, 2 + d % 3, 7000 + d)
        qr = cf.quotient_roots(p)
        sr = np.array([r.roots[0] for r in solve(p, 1)])
        assert len(qr) == len(sr)
        for x in qr:
            dist = np.abs(sr - x)
            if boundary == OPEN:
                dist = np.minimum(dist, np.abs(reflect(sr, p.q) - x))
            assert dist.min() < 1e-8 * max(1, abs(x))


# ---------------------------------------------------------------- L = 2, n = 1 ordinary differential equation

def test_L2_kappa_defect_vanishes_exactly_on_shell():
    p = params(TWISTED, 2)
    for r in branches(TWISTED, 2, 1):
        assert abs(cf.kappa_defect(p, r.roots[0])) < 1e-10
    for xb in np.exp(1j * np.linspace(0.1, 6, 7)) * 0.8:
        assert abs(cf.kappa_defect(p, xb)) > 1e-3


def test_L2_transcendental_collapses_on_shell():
    p = params(TWISTED, 2)
    xs = np.array([0.3 + 0.2j, -0.5 + 0.7j, 1.1 - 0.4j])
    for r in branches(TWISTED, 2, 1):
        S = cf.s1_poly(p, r.roots[0])
        ratio = cf.s1_L2_transcendental(p, xs, 1.0, r.roots[0]) / np.array([S(x) for x in xs])
        assert np.ptp(np.abs(ratio)) < 1e-10 * np.abs(ratio).max()
        assert np.abs(ratio - ratio[0]).max() < 1e-10 * abs(ratio[0])


@pytest.mark.parametrize("xb", [0.4 + 0.9j, -1.2 + 0.3j, 0.7 - 0.6j])
def test_L2_transcendental_solves_ode(xb):
    p = params(TWISTED, 2)
    f = lambda x: cf.s1_L2_transcendental(p, x, 2.0 - 1j, xb)
    h = 1e-5
    for x in (0.3 + 0.2j, -0.6 + 0.1j):
        v, sc = cf.n1L2_residual(p, f(x), (f(x + h) - f(x - h)) / (2 * h), x, xb)
        assert abs(v) < 1e-8 * sc
    with pytest.raises(ValueError):
        cf.s1_L2_transcendental(params(TWISTED, 3), 0.1, 1.0, xb)


# ---------------------------------------------------------------- n = 2

@pytest.mark.parametrize("L,count", [(2, 1), (3, 3)])
def test_twisted_constraint_roots_are_bethe(L, count):
    p = params(TWISTED, L)
    cr = cf.s2_constraint(p)
    br = branches(TWISTED, L, 2)
    assert len(cr.solutions) == len(br) == count
    for s in cr.solutions:
        assert min(abs(s.aggregate - r.aggregate) for r in br) < 1e-8 * abs(s.aggregate)
    assert len(cr.trivial) == L
    assert np.allclose(np.sort_complex(cr.trivial), np.sort_complex(p.y * (1 + p.q**2) / p.q**2))


@pytest.mark.parametrize("L", [2, 3])
def test_open_constraint_roots_are_bethe(L):
    p = params(OPEN, L)
    cr = cf.t2_constraint(p)
    br = branches(OPEN, L, 2)
    assert len(cr.solutions) == len(br)
    for s in cr.solutions:
        assert min(abs(s.aggregate - r.aggregate) for r in br) < 1e-8 * abs(s.aggregate)


@pytest.mark.parametrize("boundary,L", [(TWISTED, 2), (TWISTED, 3), (OPEN, 2)])
def test_separated_solution_is_oracle(boundary, L):
    p = params(boundary, L)
    cr = cf.s2_constraint(p) if boundary == TWISTED else cf.t2_constraint(p)
    sol = cf.s2_solution if boundary == TWISTED else cf.t2_solution
    br = branches(boundary, L, 2)
    for s in cr.solutions:
        S = sol(p, s)
        c = S.coeffs
        assert np.abs(c - c.T).max() < 1e-8 * np.abs(c).max()
        r = min(br, key=lambda r: abs(r.aggregate - s.aggregate))
        assert overlap(S, oracle_polynomial(p, r)) > 1 - 1e-8
        x0, X = 0.8 + 0.5j, np.array([-0.7 + 0.6j, 1.1 - 0.2j])
        assert abs(functional_residual(p, r, S, x0, X)) < 1e-8 * functional_scale(p, r, S, x0, X)


def test_separated_solution_off_shell_raises():
    p = params(TWISTED, 3)
    s = cf.s2_constraint(p).solutions[0]
    bad = cf.SeparatedSolution(s.boundary, s.H_coeffs, s.aggregate + 0.1, s.prefactor)
    with pytest.raises(cf.NonRemovablePoleError):
        cf.s2_solution(p, bad)


def test_kernel_vectorised():
    p = params(OPEN, 2)
    x1, x2 = np.array([0.5 + 0.2j, 1.1j]), np.array([-0.3 + 0.9j, 0.7])
    v = cf.K_open(p, x1, x2)
    assert np.allclose(v, [cf.K_open(p, a, b) for a, b in zip(x1, x2)])
    w = cf.K_twisted(params(TWISTED, 3), x1, x2)
    assert np.allclose(w, [cf.K_twisted(params(TWISTED, 3), a, b) for a, b in zip(x1, x2)])


# ---------------------------------------------------------------- reference constraint polynomials

def _refs():
    return {e["name"]: e for e in json.loads(FIXTURES.read_text())}


def _coeffs(e):
    return np.array([complex(*c) for c in e["coeffs"]])


def test_fixtures_reproduce():
    refs = _refs()
    p = ModelParams.from_json(refs["twisted_L3"]["params"])
    assert cf.compare_monic(cf.twisted_three_site_reference(p), _coeffs(refs["twisted_L3"])) < 1e-14


@pytest.mark.parametrize("draw", [0, 1, 2])
def test_two_site_twisted_reference(draw):
    p = params(TWISTED, 2, draw)
    assert cf.compare_monic(cf.s2_constraint(p).coeffs, cf.twisted_two_site_reference(p)) < 1e-8


@pytest.mark.parametrize("draw", [0, 1, 2])
def test_three_site_twisted_reference(draw):
    p = params(TWISTED, 3, draw)
    assert cf.compare_monic(cf.s2_constraint(p).coeffs, cf.twisted_three_site_reference(p)) < 1e-8


@pytest.mark.parametrize("draw", [0, 1, 2])
def test_two_site_open_corrected_reference(draw):
    p = params(OPEN, 2, draw)
    assert cf.compare_monic(cf.t2_constraint(p).coeffs, cf.open_two_site_reference_corrected(p)) < 1e-8
    # the corrected nontrivial root is the Bethe aggregate
    nontriv = -cf.open_two_site_reference_corrected(p)[0] / np.prod(-(p.q + 1 / p.q) * (p.y + 1 / p.y))
    assert min(abs(nontriv - r.aggregate) for r in branches(OPEN, 2, 2, draw)) < 1e-8 * abs(nontriv)


@pytest.mark.parametrize("draw", [0, 1, 2])
def test_three_site_open_homogeneous_corrected_reference(draw):
    p = homogeneous_open(3, draw)
    assert cf.compare_monic(cf.t2_constraint(p).coeffs, cf.open_three_site_reference_corrected(p)) < 1e-8
    roots = P.polyroots(cf.open_three_site_reference_corrected(p))
    for r in solve(p, 2):
        assert np.abs(roots - r.aggregate).min() < 1e-7 * abs(r.aggregate)


def test_reference_symmetry():
    """The corrected three-site coefficients have definite parity under q -> 1/q, t <-> t̄."""
    q, t, tb = 1.3 * np.exp(0.4j), 0.9 * np.exp(0.2j), 1.2 * np.exp(-0.7j)
    W = cf._open_three_site_W(q, t, tb, True)
    Wr = cf._open_three_site_W(1 / q, tb, t, True)
    assert np.isclose(Wr[2], -W[2]) and np.isclose(Wr[1], W[1]) and np.isclose(Wr[0], -W[0])
    P_ = cf._open_three_site_W(q, t, tb, False)
    Pr = cf._open_three_site_W(1 / q, tb, t, False)
    assert not (np.isclose(Pr[1], P_[1]) and np.isclose(Pr[0], -P_[0]))


def test_homogeneous_reference_requires_homogeneous():
    with pytest.raises(ValueError):
        cf.open_three_site_reference_corrected(params(OPEN, 3))


def test_compare_monic():
    assert cf.compare_monic([1, 2, 3], [2, 4, 6]) == 0
    assert cf.compare_monic([1, 2], [1, 2, 3]) == np.inf
