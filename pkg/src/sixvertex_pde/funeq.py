"""Functional-equation coefficients in polynomial variables, the functional
residual and numerical residues at its poles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_algebra import poly_eval
from .lattice_oracle import TWISTED, OPEN

POLE_TOL = 1e-9


class PoleProximityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CoeffBundle:
    k0: complex
    kx: np.ndarray
    x0: complex
    X: np.ndarray


@dataclass(frozen=True)
class Residue:
    value: complex
    scale: float
    radius: float


def _roots(roots):
    return np.atleast_1d(np.asarray(getattr(roots, "roots", roots), complex))


def _guard(x0, X, extra=()):
    pts = np.concatenate([X, np.asarray(extra, complex)])
    if len(pts) and np.min(np.abs(x0 - pts)) < POLE_TOL:
        raise PoleProximityError(f"x0={x0} within {POLE_TOL} of a pole")
    if len(X) > 1:
        d = np.abs(X[:, None] - X[None, :]) + np.eye(len(X))
        if d.min() < POLE_TOL:
            raise PoleProximityError("free variables not pairwise distinct")


def coeffs_twisted(params, roots, x0, X):
    q, y, p1, p2 = params.q, params.y, params.phi1, params.phi2
    XB = _roots(roots)
    X = np.atleast_1d(np.asarray(X, complex))
    x0 = complex(x0)
    _guard(x0, X, XB)
    br1 = lambda S: np.prod((S * q - x0 / q) / (S - x0))
    br2 = lambda S: np.prod((x0 * q - S / q) / (x0 - S))
    k0 = (p1 * np.prod(x0 * q - y / q) * (br1(X) - br1(XB))
          + p2 * np.prod(x0 - y) * (br2(X) - br2(XB)))
    kx = np.empty(len(X), complex)
    for i, x in enumerate(X):
        o = np.delete(X, i)
        kx[i] = (q - 1 / q) * x0 / (x0 - x) * (
            p1 * np.prod(x * q - y / q) * np.prod((o * q - x / q) / (o - x))
            - p2 * np.prod(x - y) * np.prod((x * q - o / q) / (x - o)))
    return CoeffBundle(k0, kx, x0, X)


def boundary_pair_plus(x, t, tb):
    """(x^½t - x^-½t⁻¹)(x^½t̄⁻¹ - x^-½t̄) expanded into integer powers."""
    return x * t / tb - t * tb - 1 / (t * tb) + tb / (t * x)


def boundary_pair_minus(x, q, t, tb):
    """(x^½qt⁻¹ - x^-½q⁻¹t)(x^½qt̄ - x^-½q⁻¹t̄⁻¹) expanded into integer powers."""
    return x * q**2 * tb / t - 1 / (t * tb) - t * tb + t / (tb * q**2 * x)


def coeffs_open(params, roots, x0, X):
    q, y, t, tb = params.q, params.y, params.t, params.tbar
    E = _roots(roots)
    X = np.atleast_1d(np.asarray(X, complex))
    x0 = complex(x0)
    _guard(x0, X, np.concatenate([E, 1 / (q**2 * E), 1 / (q**2 * X), [1 / q, -1 / q]]))
    br1 = lambda S: np.prod((S * q - x0 / q) / (S - x0) * (S - 1 / x0) / (S * q - 1 / (x0 * q)))
    br2 = lambda S: np.prod((x0 * q - S / q) / (x0 - S) * (x0 * q**2 - 1 / (S * q**2)) / (x0 * q - 1 / (S * q)))
    f1 = (boundary_pair_plus(x0, t, tb) * (x0 * q**2 - 1 / (x0 * q**2)) / (x0 * q - 1 / (x0 * q))
          * np.prod((x0 * q - y / q) * (x0 * q - 1 / (y * q))))
    f2 = (boundary_pair_minus(x0, q, t, tb) * (x0 - 1 / x0) / (x0 * q - 1 / (x0 * q))
          * np.prod((x0 - y) * (x0 - 1 / y)))
    k0 = f1 * (br1(X) - br1(E)) + f2 * (br2(X) - br2(E))
    kx = np.empty(len(X), complex)
    for i, x in enumerate(X):
        o = np.delete(X, i)
        pre = (x0 * (q - 1 / q) / (x0 - x) * (x0 * q**2 - 1 / (x0 * q**2)) / (x0 * q - 1 / (x * q))
               * (x - 1 / x) / (x * q - 1 / (x * q)))
        kx[i] = pre * zfun(params, x, o)
    return CoeffBundle(k0, kx, x0, X)


def zfun(params, x, others):
    """The bracket 𝒵_x of the open coefficients (others = remaining free variables)."""
    q, y, t, tb = params.q, params.y, params.t, params.tbar
    o = np.asarray(others, complex)
    t1 = (boundary_pair_plus(x, t, tb) * np.prod((x * q - y / q) * (x * q - 1 / (y * q)))
          * np.prod((o * q - x / q) / (o - x) * (o - 1 / x) / (o * q - 1 / (x * q))))
    t2 = (boundary_pair_minus(x, q, t, tb) * np.prod((x - y) * (x - 1 / y))
          * np.prod((x * q - o / q) / (x - o) * (x * q**2 - 1 / (o * q**2)) / (x * q - 1 / (o * q))))
    return t1 - t2


def yfun(params, x, others):
    """The bracket 𝒴_x of the twisted coefficients."""
    q, y = params.q, params.y
    o = np.asarray(others, complex)
    return (params.phi1 * np.prod(x * q - y / q) * np.prod((o * q - x / q) / (o - x))
            - params.phi2 * np.prod(x - y) * np.prod((x * q - o / q) / (x - o)))


def coeffs(params, roots, x0, X):
    return (coeffs_twisted if params.boundary == TWISTED else coeffs_open)(params, roots, x0, X)


# ------------------------------------------------------------ λ-plane transcription

def coeffs_twisted_lambda(params, roots_lam, lam0, lams):
    """K₀, K_λ written directly with the trigonometric weights."""
    g = params.gamma
    a = lambda z: np.sinh(z + g)
    b = np.sinh
    c = np.sinh(g)
    mu, B = params.mu, np.asarray(roots_lam, complex)
    lams = np.asarray(lams, complex)
    k0 = (params.phi1 * np.prod(a(lam0 - mu)) * (np.prod(a(lams - lam0) / b(lams - lam0)) - np.prod(a(B - lam0) / b(B - lam0)))
          + params.phi2 * np.prod(b(lam0 - mu)) * (np.prod(a(lam0 - lams) / b(lam0 - lams)) - np.prod(a(lam0 - B) / b(lam0 - B))))
    kl = np.empty(len(lams), complex)
    for i, l in enumerate(lams):
        o = np.delete(lams, i)
        kl[i] = (params.phi1 * c / b(lam0 - l) * np.prod(a(l - mu)) * np.prod(a(o - l) / b(o - l))
                 + params.phi2 * c / b(l - lam0) * np.prod(b(l - mu)) * np.prod(a(l - o) / b(l - o)))
    return k0, kl


def coeffs_open_lambda(params, roots_lam, lam0, lams):
    """L₀, L_λ written directly with the trigonometric weights."""
    g, h, hb = params.gamma, params.h, params.hbar
    a = lambda z: np.sinh(z + g)
    b = np.sinh
    c = np.sinh(g)
    mu, E = params.mu, np.asarray(roots_lam, complex)
    lams = np.asarray(lams, complex)
    l0 = lam0
    br1 = lambda S: np.prod(a(S - l0) / b(S - l0) * b(S + l0) / a(S + l0))
    br2 = lambda S: np.prod(a(l0 - S) / b(l0 - S) * a(l0 + S + g) / b(l0 + S + g))
    k0 = (b(l0 + h) * b(l0 - hb) * a(2 * l0 + g) / b(2 * l0 + g) * np.prod(a(l0 - mu) * a(l0 + mu)) * (br1(lams) - br1(E))
          + a(l0 - h) * a(l0 + hb) * b(2 * l0) / a(2 * l0) * np.prod(b(l0 - mu) * b(l0 + mu)) * (br2(lams) - br2(E)))
    kl = np.empty(len(lams), complex)
    for i, l in enumerate(lams):
        o = np.delete(lams, i)
        pre = a(2 * l0 + g) / a(l0 + l) * c / b(l0 - l) * b(2 * l) / a(2 * l)
        kl[i] = pre * (b(l + h) * b(l - hb) * np.prod(a(l - mu) * a(l + mu)) * np.prod(a(o - l) / b(o - l) * b(o + l) / a(o + l))
                       - a(l - h) * a(l + hb) * np.prod(b(l - mu) * b(l + mu)) * np.prod(a(l - o) / b(l - o) * a(l + o + g) / b(l + o + g)))
    return k0, kl


# ------------------------------------------------------------ residual

def _as_callable(S):
    if callable(S) and not hasattr(S, "coeffs"):
        return S
    return lambda pt: poly_eval(S, pt)


def functional_terms(params, roots, S, x0, X):
    """Individual summands K̄₀S̄(X), K̄_x S̄(X|x->x0)."""
    f = _as_callable(S)
    cb = coeffs(params, roots, x0, X)
    X = cb.X
    terms = [cb.k0 * f(X)]
    for i in range(len(X)):
        Xi = X.copy()
        Xi[i] = x0
        terms.append(cb.kx[i] * f(Xi))
    return np.array(terms)


def functional_residual(params, roots, S, x0, X):
    return complex(functional_terms(params, roots, S, x0, X).sum())


def functional_scale(params, roots, S, x0, X):
    return float(np.abs(functional_terms(params, roots, S, x0, X)).max())


def _pieces_twisted(params, roots, x0, X):
    """Summands of K̄₀ (four bracket pieces) and of each K̄_x (two twist pieces)."""
    q, y, p1, p2 = params.q, params.y, params.phi1, params.phi2
    E = _roots(roots)
    coeffs_twisted(params, roots, x0, X)  # pole guard
    br1 = lambda S: np.prod((S * q - x0 / q) / (S - x0))
    br2 = lambda S: np.prod((x0 * q - S / q) / (x0 - S))
    f1, f2 = p1 * np.prod(x0 * q - y / q), p2 * np.prod(x0 - y)
    k0 = [f1 * br1(X), -f1 * br1(E), f2 * br2(X), -f2 * br2(E)]
    kx = []
    for i, x in enumerate(X):
        o = np.delete(X, i)
        pre = (q - 1 / q) * x0 / (x0 - x)
        kx.append([pre * p1 * np.prod(x * q - y / q) * np.prod((o * q - x / q) / (o - x)),
                   -pre * p2 * np.prod(x - y) * np.prod((x * q - o / q) / (x - o))])
    return k0, kx


def _pieces_open(params, roots, x0, X):
    q, y, t, tb = params.q, params.y, params.t, params.tbar
    E = _roots(roots)
    coeffs_open(params, roots, x0, X)  # pole guard
    br1 = lambda S: np.prod((S * q - x0 / q) / (S - x0) * (S - 1 / x0) / (S * q - 1 / (x0 * q)))
    br2 = lambda S: np.prod((x0 * q - S / q) / (x0 - S) * (x0 * q**2 - 1 / (S * q**2)) / (x0 * q - 1 / (S * q)))
    f1 = (boundary_pair_plus(x0, t, tb) * (x0 * q**2 - 1 / (x0 * q**2)) / (x0 * q - 1 / (x0 * q))
          * np.prod((x0 * q - y / q) * (x0 * q - 1 / (y * q))))
    f2 = (boundary_pair_minus(x0, q, t, tb) * (x0 - 1 / x0) / (x0 * q - 1 / (x0 * q))
          * np.prod((x0 - y) * (x0 - 1 / y)))
    k0 = [f1 * br1(X), -f1 * br1(E), f2 * br2(X), -f2 * br2(E)]
    kx = []
    for i, x in enumerate(X):
        o = np.delete(X, i)
        pre = (x0 * (q - 1 / q) / (x0 - x) * (x0 * q**2 - 1 / (x0 * q**2)) / (x0 * q - 1 / (x * q))
               * (x - 1 / x) / (x * q - 1 / (x * q)))
        t1 = (boundary_pair_plus(x, t, tb) * np.prod((x * q - y / q) * (x * q - 1 / (y * q)))
              * np.prod((o * q - x / q) / (o - x) * (o - 1 / x) / (o * q - 1 / (x * q))))
        t2 = (boundary_pair_minus(x, q, t, tb) * np.prod((x - y) * (x - 1 / y))
              * np.prod((x * q - o / q) / (x - o) * (x * q**2 - 1 / (o * q**2)) / (x * q - 1 / (o * q))))
        kx.append([pre * t1, -pre * t2])
    return k0, kx


def functional_pieces(params, roots, S, x0, X):
    """Finer split of the functional residual: every bracket piece of the
    coefficients times the matching polynomial value. Sums to the residual."""
    f = _as_callable(S)
    X = np.atleast_1d(np.asarray(X, complex))
    x0 = complex(x0)
    k0, kx = (_pieces_twisted if params.boundary == TWISTED else _pieces_open)(params, roots, x0, X)
    sx = f(X)
    out = [c * sx for c in k0]
    for i, parts in enumerate(kx):
        Xi = X.copy()
        Xi[i] = x0
        si = f(Xi)
        out.extend(c * si for c in parts)
    return np.array(out)


FREE, BETHE, REFLECTED = "FreeVariable", "BetheRoot", "ReflectedBetheRoot"


def pole_location(params, roots, X, which, index=0):
    """x0 position of a declared pole locus."""
    if which == FREE:
        return complex(np.atleast_1d(X)[index])
    E = _roots(roots)
    if which == BETHE:
        return complex(E[index])
    if which == REFLECTED:
        if params.boundary != OPEN:
            raise ValueError("reflected poles exist for open boundaries only")
        return complex(1 / (params.q**2 * E[index]))
    raise ValueError(f"unknown pole kind {which!r}")


def pole_residue(params, roots, S, pole, X, which=None, index=0, radius=1e-3, nodes=16, rtol=1e-3):
    """Residue of x0 -> functional residual at `pole` by circle averaging.

    With pole=None the location is taken from the locus kind `which`
    (FREE, BETHE, REFLECTED) and `index`.

    scale = max over circle nodes of |(x0 - pole)·piece| over the individual
    bracket pieces, so that cancellation between pieces is measured against
    their own residues. The estimate is accepted when halving the radius
    changes it by less than rtol·scale (or both estimates are already below
    1e-13·scale); up to three halvings.
    """
    if pole is None:
        pole = pole_location(params, roots, X, which, index)
    pole = complex(pole)
    ang = 2 * np.pi * (np.arange(nodes) + 0.3183) / nodes

    def estimate(r):
        z = pole + r * np.exp(1j * ang)
        pcs = np.array([functional_pieces(params, roots, S, x0, X) for x0 in z]) * (z - pole)[:, None]
        return pcs.sum(axis=1).mean(), np.abs(pcs).max()

    r = radius
    v, sc = estimate(r)
    for _ in range(3):
        v2, sc2 = estimate(r / 2)
        s = max(sc, sc2)
        if abs(v2 - v) <= rtol * s or max(abs(v), abs(v2)) < 1e-13 * s:
            return Residue(complex(v2), float(s), r / 2)
        v, sc, r = v2, sc2, r / 2
    raise RuntimeError("residue estimate did not converge under radius halving")
