import numpy as np
import pytest

from cases import branches, params
from sixvertex_pde.funeq import (BETHE, FREE, REFLECTED, PoleProximityError, coeffs,
                                 coeffs_open_lambda, coeffs_twisted_lambda, functional_pieces,
                                 functional_residual, functional_scale, pole_location, pole_residue)
from sixvertex_pde.lattice_oracle import OPEN, TWISTED, oracle_polynomial, polynomial_value

CASES = [(TWISTED, 2, 1), (TWISTED, 3, 2), (OPEN, 2, 1), (OPEN, 2, 2), (OPEN, 3, 2)]


def _pt(rng, n):
    return (np.exp(0.4 * rng.normal() + 2j * np.pi * rng.uniform()),
            np.exp(0.4 * rng.normal(size=n) + 2j * np.pi * rng.uniform(size=n)))


@pytest.mark.parametrize("boundary,L,n", CASES)
def test_annihilation_on_shell(boundary, L, n):
    p, r = params(boundary, L), branches(boundary, L, n)[0]
    S = oracle_polynomial(p, r)
    rng = np.random.default_rng(0)
    for _ in range(10):
        x0, X = _pt(rng, n)
        assert abs(functional_residual(p, r, S, x0, X)) < 1e-9 * functional_scale(p, r, S, x0, X)


@pytest.mark.parametrize("boundary,L,n", CASES)
def test_off_shell_not_annihilated(boundary, L, n):
    p, r = params(boundary, L), branches(boundary, L, n)[0]
    xp = r.roots + 0.02
    S = oracle_polynomial(p, xp)
    rng = np.random.default_rng(1)
    worst = max(abs(functional_residual(p, xp, S, *_pt(rng, n))) / functional_scale(p, xp, S, *_pt(rng, n))
                for _ in range(5))
    assert worst > 1e-5


@pytest.mark.parametrize("boundary,L,n", CASES)
def test_pieces_sum_to_residual(boundary, L, n):
    p, r = params(boundary, L), branches(boundary, L, n)[0]
    S = oracle_polynomial(p, r)
    x0, X = _pt(np.random.default_rng(2), n)
    pcs = functional_pieces(p, r, S, x0, X)
    assert abs(pcs.sum() - functional_residual(p, r, S, x0, X)) < 1e-12 * np.abs(pcs).max()


def test_lambda_and_x_forms_agree():
    """x-form coefficients are the λ-form ones times one common factor."""
    rng = np.random.default_rng(3)
    for boundary in (TWISTED, OPEN):
        p, r = params(boundary, 3), branches(boundary, 3, 2)[0]
        rl = np.log(r.roots) / 2
        lam0 = 0.2 * rng.normal() + 1j * rng.uniform(-1, 1)
        lams = 0.2 * rng.normal(size=2) + 1j * rng.uniform(-1, 1, size=2)
        cb = coeffs(p, r, np.exp(2 * lam0), np.exp(2 * lams))
        if boundary == TWISTED:
            k0, kl = coeffs_twisted_lambda(p, rl, lam0, lams)
            F = 2**p.L * np.exp(p.L * lam0) * np.prod(np.exp(p.mu))
            assert np.isclose(cb.k0, F * k0, rtol=1e-10)
            assert np.allclose(cb.kx, F * kl * np.exp((p.L - 1) * (lams - lam0)), rtol=1e-10)
        else:
            k0, kl = coeffs_open_lambda(p, rl, lam0, lams)
            x0, x = np.exp(2 * lam0), np.exp(2 * lams)
            assert np.isclose(cb.k0, 4 * (4 * x0) ** p.L * k0, rtol=1e-10)
            assert np.allclose(cb.kx, 4 * 4**p.L * x**p.L * kl, rtol=1e-10)


def test_lambda_form_annihilates_scalar_product():
    p, r = params(TWISTED, 3), branches(TWISTED, 3, 2)[0]
    rl = np.log(r.roots) / 2
    lam0, lams = 0.1 + 0.3j, np.array([-0.2 + 0.7j, 0.15 - 0.5j])
    k0, kl = coeffs_twisted_lambda(p, rl, lam0, lams)
    terms = [k0 * polynomial_value(p, r, lams) * np.exp(-(p.L - 1) * lams.sum())]
    for i in range(2):
        li = lams.copy()
        li[i] = lam0
        terms.append(kl[i] * polynomial_value(p, r, li) * np.exp(-(p.L - 1) * li.sum()))
    terms = np.array(terms)
    assert abs(terms.sum()) < 1e-10 * np.abs(terms).max()


def test_pole_guard():
    p, r = params(TWISTED, 2), branches(TWISTED, 2, 1)[0]
    with pytest.raises(PoleProximityError):
        coeffs(p, r, r.roots[0], np.array([0.5 + 0.5j]))
    with pytest.raises(PoleProximityError):
        coeffs(p, r, 0.7 + 0.1j, np.array([0.7 + 0.1j]))


@pytest.mark.parametrize("boundary,L,n", CASES)
def test_residues(boundary, L, n):
    p, r = params(boundary, L), branches(boundary, L, n)[0]
    S = oracle_polynomial(p, r)
    _, X = _pt(np.random.default_rng(4), n)
    for i in range(n):
        res = pole_residue(p, r, S, None, X, which=FREE, index=i)
        assert abs(res.value) < 1e-9 * res.scale
        kinds = [BETHE] + ([REFLECTED] if boundary == OPEN else [])
        for k in kinds:
            res = pole_residue(p, r, S, None, X, which=k, index=i)
            assert abs(res.value) < 1e-8 * res.scale


def test_open_fixed_points_removable():
    p, r = params(OPEN, 2), branches(OPEN, 2, 2)[0]
    S = oracle_polynomial(p, r)
    X = np.array([0.9 + 0.4j, -0.6 + 0.8j])
    for pole in (1 / p.q, -1 / p.q):
        res = pole_residue(p, r, S, pole, X)
        assert abs(res.value) < 1e-8 * res.scale


def test_bethe_residue_off_shell():
    p, r = params(TWISTED, 3), branches(TWISTED, 3, 2)[0]
    xp = r.roots + np.array([1e-2, -1e-2j])
    S = oracle_polynomial(p, xp)
    res = pole_residue(p, xp, S, None, np.array([0.8 + 0.5j, -0.9 + 0.2j]), which=BETHE)
    assert abs(res.value) > 1e-4 * res.scale


def test_pole_location_errors():
    p, r = params(TWISTED, 2), branches(TWISTED, 2, 1)[0]
    with pytest.raises(ValueError):
        pole_location(p, r, np.array([1j]), REFLECTED)
    with pytest.raises(ValueError):
        pole_location(p, r, np.array([1j]), "elsewhere")
    assert pole_location(p, r, np.array([1j]), FREE) == 1j
