import numpy as np
import pytest

from cases import branches, params
from sixvertex_pde.bethe_solver import (SolverConfig, aggregate, expected_count, reflect, residual_open,
                                        residual_twisted, solve)
from sixvertex_pde.lattice_oracle import OPEN, TWISTED, ModelParams, eigencheck


def test_twisted_L1_closed_form():
    q, y, p2 = 0.8 * np.exp(0.6j), 1.3 * np.exp(0.2j), 0.9 * np.exp(1.1j)
    p = ModelParams.from_polynomial(TWISTED, q, [y], phi2=p2)
    x = y * (p2 - 1 / q) / (p2 - q)
    assert residual_twisted(p, [x]).max() < 1e-12
    (r,) = solve(p, 1)
    assert abs(r.roots[0] - x) < 1e-10


def test_off_shell_residual_large_and_permutation_covariant():
    p = params(TWISTED, 3)
    x = np.array([0.7 + 0.3j, -0.4 + 1.1j])
    r = residual_twisted(p, x)
    assert r.max() > 1e-2
    assert np.allclose(residual_twisted(p, x[::-1]), r[::-1])
    po = params(OPEN, 3)
    ro = residual_open(po, x)
    assert ro.max() > 1e-2 and np.allclose(residual_open(po, x[::-1]), ro[::-1])


@pytest.mark.parametrize("L,n,count", [(2, 2, 1), (3, 2, 3), (2, 1, 2), (3, 1, 3)])
def test_twisted_branch_counts(L, n, count):
    br = branches(TWISTED, L, n)
    assert len(br) == count == expected_count(L, n)


@pytest.mark.parametrize("boundary,L,n", [(TWISTED, 2, 1), (TWISTED, 3, 2), (TWISTED, 4, 2),
                                          (OPEN, 2, 1), (OPEN, 2, 2), (OPEN, 3, 2)])
def test_solutions_sound(boundary, L, n):
    p = params(boundary, L)
    for r in branches(boundary, L, n):
        assert r.residual < 1e-10
        assert eigencheck(p, r) < 1e-8
        assert abs(aggregate(r.roots, boundary, p.q) - r.aggregate) < 1e-12 * max(1, abs(r.aggregate))
        if n > 1:
            d = np.abs(r.roots[:, None] - r.roots[None, :]) + np.eye(n)
            assert d.min() > 1e-8
        if boundary == TWISTED:
            assert np.abs(r.roots[:, None] - p.y[None, :]).min() > 1e-8


def test_open_L1_homogeneous_by_scan():
    p = ModelParams.from_polynomial(OPEN, 0.75 * np.exp(0.7j), [1.0], t=1.1 * np.exp(0.3j), tbar=0.9 * np.exp(-0.4j))
    br = solve(p, 1)
    assert br and all(residual_open(p, r.roots).max() < 1e-10 for r in br)
    # brute-force scan: local minima of the residual on a log-polar grid, away from
    # the (inadmissible) reflection fixed points ±1/q, match the solver roots both ways
    R, A = np.meshgrid(np.linspace(-1.5, 1.5, 61), np.linspace(-np.pi, np.pi, 121) + 0.013, indexing="ij")
    grid = np.exp(R + 1j * A)
    vals = np.array([[residual_open(p, [z]).max() for z in row] for row in grid])
    pad = np.pad(vals, 1, mode="wrap")
    nb = [pad[1 + i:pad.shape[0] - 1 + i, 1 + j:pad.shape[1] - 1 + j]
          for i in (-1, 0, 1) for j in (-1, 0, 1) if i or j]
    is_min = np.all([vals < v for v in nb], axis=0)
    is_min[[0, -1], :] = False
    fixed = np.minimum(np.abs(grid - 1 / p.q), np.abs(grid + 1 / p.q))
    low = grid[is_min & (vals < 0.5) & (fixed > 0.3)]
    found = np.array([r.roots[0] for r in br])
    near = lambda z, f: min(abs(z - f), abs(z - reflect(f, p.q)))
    assert len(low) > 0
    assert all(min(near(z, f) for f in found) < 0.2 for z in low)
    assert all(min(near(z, f) for z in low) < 0.2 for f in found)


def test_open_aggregate_reflection_invariant():
    q = 0.7 * np.exp(0.4j)
    x = np.array([1.2 + 0.3j, -0.5 + 0.9j])
    xr = x.copy()
    xr[0] = reflect(x[0], q)
    assert np.isclose(aggregate(x, OPEN, q), aggregate(xr, OPEN, q))
    assert aggregate([2, 3], TWISTED) == 5
    with pytest.raises(ValueError):
        aggregate(x, OPEN)


def _same(a, b, boundary, q):
    if len(a) != len(b):
        return False
    return all(min(abs(r.aggregate - s.aggregate) for s in b) < 1e-8 * max(1, abs(r.aggregate)) for r in a)


@pytest.mark.parametrize("boundary,L", [(TWISTED, 2), (TWISTED, 3), (OPEN, 2)])
def test_homotopy_and_multistart_agree(boundary, L):
    p = params(boundary, L)
    h = solve(p, 2, SolverConfig(multistart=False))
    m = solve(p, 2, SolverConfig(homotopy=False, n_random=800))
    assert len(h) == expected_count(L, 2) if boundary == TWISTED else True
    assert _same(h, m, boundary, p.q) and _same(m, h, boundary, p.q)


@pytest.mark.parametrize("boundary", [TWISTED, OPEN])
def test_n1_direct_matches_generic_stages(boundary):
    p = params(boundary, 3)
    a = solve(p, 1)
    b = solve(p, 1, SolverConfig(direct_n1=False))
    assert _same(a, b, boundary, p.q) and _same(b, a, boundary, p.q)


def test_sector_bounds():
    p = params(TWISTED, 2)
    with pytest.raises(ValueError):
        solve(p, 3)
    (r,) = solve(p, 0)
    assert r.n == 0 and r.aggregate == 0


def test_root_set_json():
    r = branches(TWISTED, 3, 2)[0]
    d = r.to_json()
    assert d["n"] == 2 and len(d["roots"]) == 2
