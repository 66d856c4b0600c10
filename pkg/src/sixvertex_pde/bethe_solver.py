"""Polynomial Bethe equations (twisted and double-row) and their numerical solution.

Roots are found on the cleared, denominator-free form of the equations:
ratio forms have spurious zeros at their poles, the cleared form does not
hide them but makes them explicit so they can be excluded as inadmissible.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lattice_oracle import TWISTED, OPEN


class PoleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BetheRootSet:
    boundary: str
    n: int
    roots: np.ndarray
    residual: float
    aggregate: complex

    def to_json(self):
        c = lambda z: [float(np.real(z)), float(np.imag(z))]
        return {"boundary": self.boundary, "n": self.n, "roots": [c(r) for r in self.roots],
                "residual": float(self.residual), "aggregate": c(self.aggregate)}


@dataclass
class SolverConfig:
    n_random: int = 400
    max_iter: int = 80
    tol: float = 1e-10
    seed: int = 0
    homotopy: bool = True
    multistart: bool = True
    dedup_tol: float = 1e-7
    detours: tuple = (0.7, -0.7, 2.0, -2.0)
    stop_at_expected: bool = True
    direct_n1: bool = True  # n=1 via polynomial roots; False routes through the generic stages


def aggregate(roots, boundary, q=None):
    x = np.atleast_1d(np.asarray(roots, complex))
    if boundary == TWISTED:
        return complex(x.sum())
    if q is None:
        raise ValueError("open aggregate needs q")
    return complex(np.sum(x * q + 1 / (x * q)))


# ---------------------------------------------------------------- twisted

def _offdiag_prod(M):
    M = M.copy()
    np.fill_diagonal(M, 1)
    return M.prod(axis=1)


def _twisted_sides(params, x):
    q, y = params.q, params.y
    lhs = params.phi1 * np.prod(x[:, None] * q - y[None, :] / q, axis=1) \
        * _offdiag_prod(x[:, None] / q - x[None, :] * q)
    rhs = params.phi2 * np.prod(x[:, None] - y[None, :], axis=1) \
        * _offdiag_prod(x[:, None] * q - x[None, :] / q)
    return lhs, rhs


def residual_twisted(params, roots):
    """|LHS/RHS - 1| per root, LHS and RHS as in the ratio form."""
    x = np.atleast_1d(np.asarray(getattr(roots, "roots", roots), complex))
    q, y = params.q, params.y
    out = np.empty(len(x))
    for i in range(len(x)):
        others = np.delete(x, i)
        den1 = x[i] - y
        den2 = x[i] / q - others * q
        if np.min(np.abs(np.concatenate([den1, den2, [1.0]]))) < 1e-12:
            raise PoleError(f"root {x[i]} sits on a pole of the Bethe equations")
        lhs = np.prod((x[i] * q - y / q) / den1)
        rhs = params.phi2 / params.phi1 * np.prod((x[i] * q - others / q) / den2)
        out[i] = abs(lhs / rhs - 1)
    return out


def _twisted_cleared(params, s=1.0):
    """Holomorphic residual lhs - s·rhs and its termwise scale."""
    def F(x):
        lhs, rhs = _twisted_sides(params, x)
        return lhs - s * rhs, np.abs(lhs) + np.abs(s * rhs) + 1e-300
    return F


def _twisted_admissible(params, x, tol=1e-7):
    q, y = params.q, params.y
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) < tol):
        return False
    if np.min(np.abs(x[:, None] - y[None, :])) < tol:
        return False
    n = len(x)
    for i in range(n):
        for j in range(n):
            if i != j and (abs(x[i] - x[j]) < tol or abs(x[i] - x[j] * q**2) < tol * (1 + abs(x[i]))):
                return False
    return True


# ---------------------------------------------------------------- open

def _open_factors(params, x):
    """Cleared double-row Bethe equation sides for each root."""
    q, y, t, tb = params.q, params.y, params.t, params.tbar
    X, O = x[:, None], x[None, :]
    lhs = ((x * t - 1 / t) * (x / tb - tb)
           * np.prod((X * q - y / q) * (X * q - 1 / (y * q)), axis=1)
           * _offdiag_prod((X / q - O * q) * (X - 1 / O)))
    rhs = ((x * q / t - t / q) * (x * tb * q - 1 / (tb * q))
           * np.prod((X - y) * (X - 1 / y), axis=1)
           * _offdiag_prod((X * q - O / q) * (X * q**2 - 1 / (O * q**2))))
    return lhs, rhs


def residual_open(params, roots):
    x = np.atleast_1d(np.asarray(getattr(roots, "roots", roots), complex))
    q, y, t, tb = params.q, params.y, params.t, params.tbar
    out = np.empty(len(x))
    for k in range(len(x)):
        xk, o = x[k], np.delete(x, k)
        dens = np.concatenate([[xk * q / t - t / q, xk * tb * q - 1 / (tb * q)],
                               xk - y, xk - 1 / y, xk / q - o * q, xk - 1 / o])
        if np.min(np.abs(dens)) < 1e-12:
            raise PoleError(f"root {xk} sits on a pole of the double-row Bethe equations")
        lhs = ((xk * t - 1 / t) / (xk * q / t - t / q) * (xk / tb - tb) / (xk * tb * q - 1 / (tb * q))
               * np.prod((xk * q - y / q) / (xk - y) * (xk * q - 1 / (y * q)) / (xk - 1 / y)))
        rhs = np.prod((xk * q - o / q) / (xk / q - o * q) * (xk * q**2 - 1 / (o * q**2)) / (xk - 1 / o))
        out[k] = abs(lhs / rhs - 1)
    return out


def _open_cleared(params, s=1.0):
    def F(x):
        lhs, rhs = _open_factors(params, x)
        return lhs - s * rhs, np.abs(lhs) + np.abs(s * rhs) + 1e-300
    return F


def _open_admissible(params, x, tol=1e-7):
    q, y = params.q, params.y
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) < tol) or np.any(np.abs(x) > 1 / tol):
        return False
    t, tb = params.t, params.tbar
    bad = np.concatenate([[1, -1, 1 / q, -1 / q, t**2 / q**2, 1 / (tb * q) ** 2], y, 1 / y])
    if np.min(np.abs(x[:, None] - bad[None, :])) < tol:
        return False
    n = len(x)
    for i in range(n):
        for j in range(i):
            if abs(x[i] - x[j]) < tol or abs(x[i] * x[j] * q**2 - 1) < tol or abs(x[i] * x[j] - 1) < tol:
                return False
            if abs(x[i] - x[j] * q**2) < tol or abs(x[j] - x[i] * q**2) < tol:
                return False
    return True


def reflect(x, q):
    return 1 / (x * q**2)


def _canonical(x, boundary, q):
    x = np.array(x, complex)
    if boundary == OPEN:
        # representative of {x, 1/(x q^2)}: the one with |x q| >= 1
        x = np.where(np.abs(x * q) >= 1, x, reflect(x, q))
    return x[np.lexsort((np.round(x.imag, 9), np.round(x.real, 9)))]


# ---------------------------------------------------------------- Newton / homotopy

def _jacobian(F, x):
    n = len(x)
    J = np.empty((n, n), complex)
    for k in range(n):
        hk = 1e-7 * (1 + abs(x[k]))
        e = np.zeros(n, complex)
        e[k] = hk
        J[:, k] = (F(x + e)[0] - F(x - e)[0]) / (2 * hk)
    return J


def newton(F, x0, max_iter=80, tol=1e-13):
    """Damped Newton on a holomorphic system.  F(x) -> (f, scale); the returned
    residual is max|f|/scale, scale frozen at each iterate for the line search."""
    x = np.array(x0, complex)
    f, sc = F(x)
    for _ in range(max_iter):
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(sc))):
            return x, np.inf
        nf = np.max(np.abs(f) / sc)
        if nf < tol:
            break
        try:
            dx = np.linalg.solve(_jacobian(F, x), -f)
        except np.linalg.LinAlgError:
            return x, np.inf
        if not np.all(np.isfinite(dx)):
            return x, np.inf
        step = 1.0
        while True:
            xn = x + step * dx
            fn, scn = F(xn)
            if np.all(np.isfinite(fn)) and np.linalg.norm(fn / scn) < np.linalg.norm(f / sc):
                break
            step /= 2
            if step < 1e-4:
                return x, float(nf)
        x, f, sc = xn, fn, scn
    return x, float(np.max(np.abs(f) / sc))


def track(Fs, x0, detour=0.7, h0=1 / 40, hmin=1e-5):
    """Follow a root of Fs(s) from s=0 to s=1 along the complex detour
    s(τ) = τ(1 + i·detour·(1-τ)), with step halving on corrector failure."""
    x = np.array(x0, complex)
    prev, tau_prev = None, None
    tau, h = 0.0, h0
    while tau < 1:
        tn = min(1.0, tau + h)
        s = tn * (1 + 1j * detour * (1 - tn))
        guess = x if prev is None else x + (x - prev) * (tn - tau) / (tau - tau_prev)
        xn, res = newton(Fs(s), guess, max_iter=12, tol=1e-12)
        ok = np.isfinite(res) and res < 1e-9 and np.max(np.abs(xn - x)) < 0.3 * (1 + np.max(np.abs(x)))
        if ok:
            prev, tau_prev = x, tau
            x, tau = xn, tn
            h = min(2 * h, 0.1)
        else:
            h /= 2
            if h < hmin:
                return None
    return x


def _dedup(cands, boundary, q, tol):
    out = []
    for x in cands:
        xc = _canonical(x, boundary, q)
        if not any(np.max(np.abs(xc - o)) < tol * (1 + np.max(np.abs(o))) for o in out):
            out.append(xc)
    return out


def _finish(params, sols, boundary, resid_fn, tol):
    res = []
    for x in sols:
        try:
            r = float(np.max(resid_fn(params, x))) if len(x) else 0.0
        except PoleError:
            continue
        if r < tol:
            res.append(BetheRootSet(boundary, len(x), x, r, aggregate(x, boundary, params.q)))
    return res


def _polish(params, F, x, tol, admissible):
    x, _ = newton(F, x, max_iter=40, tol=1e-15)
    return x if admissible(params, x) else None


def expected_count(L, n):
    """Number of Bethe states in the n-magnon sector for generic diagonal boundaries."""
    return math.comb(L, n)


def _run_stages(params, n, cfg, F, Fs_fwd, Fs_rev, pool_fwd, pool_rev, admissible, boundary, seed_draw):
    cands = []
    target = expected_count(params.L, n)

    def count():
        return len(_dedup(cands, boundary, params.q, cfg.dedup_tol))

    stages = []
    if cfg.homotopy:
        for det in cfg.detours:
            stages.append(("hom", Fs_fwd, pool_fwd, det))
            stages.append(("hom", Fs_rev, pool_rev, det))
    for kind, Fs, pool, det in stages:
        for comb in itertools.combinations(range(len(pool)), n):
            x = track(Fs, pool[list(comb)], detour=det)
            if x is not None:
                x = _polish(params, F, x, cfg.tol, admissible)
                if x is not None:
                    cands.append(x)
        if cfg.stop_at_expected and count() >= target:
            return cands
    if cfg.multistart:
        rng = np.random.default_rng(cfg.seed)
        for k in range(cfg.n_random):
            x, r = newton(F, seed_draw(rng), cfg.max_iter)
            if np.isfinite(r) and r < 1e-8 and admissible(params, x):
                cands.append(x)
            if cfg.stop_at_expected and k % 20 == 19 and count() >= target:
                break
    return cands


def _reverse(sides, params, s):
    def F(x):
        lhs, rhs = sides(params, x)
        return s * lhs - rhs, np.abs(s * lhs) + np.abs(rhs) + 1e-300
    return F


def solve_twisted(params, n, config=None):
    cfg = config or SolverConfig()
    if not 0 <= n <= params.L:
        raise ValueError("need 0 <= n <= L")
    q, y = params.q, params.y
    if n == 0:
        return [BetheRootSet(TWISTED, 0, np.zeros(0, complex), 0.0, 0j)]
    F = _twisted_cleared(params)
    cands = []
    if n == 1 and cfg.direct_n1:
        num = params.phi1 * np.poly(y / q**2) * q**params.L - params.phi2 * np.poly(y)
        for r in np.roots(num):
            x = _polish(params, F, np.array([r]), cfg.tol, _twisted_admissible)
            if x is not None:
                cands.append(x)
    else:
        # forward: phi2 -> 0 limit has x_i = y_j/q^2; reverse: phi1 -> 0 has x_i = y_j
        cands = _run_stages(
            params, n, cfg, F,
            lambda s: _twisted_cleared(params, s), lambda s: _reverse(_twisted_sides, params, s),
            y / q**2, y, _twisted_admissible, TWISTED,
            lambda rng: np.exp(1.5 * rng.normal(size=n) + 3j * rng.normal(size=n)))
    sols = _dedup(cands, TWISTED, q, cfg.dedup_tol)
    return _finish(params, sols, TWISTED, residual_twisted, cfg.tol)


def solve_open(params, n, config=None):
    cfg = config or SolverConfig()
    if not 0 <= n <= params.L:
        raise ValueError("need 0 <= n <= L")
    q, y, t, tb = params.q, params.y, params.t, params.tbar
    if n == 0:
        return [BetheRootSet(OPEN, 0, np.zeros(0, complex), 0.0, 0j)]
    F = _open_cleared(params)
    cands = []
    if n == 1 and cfg.direct_n1:
        for r in np.roots(_open_n1_poly(params)):
            x = _polish(params, F, np.array([r]), cfg.tol, _open_admissible)
            if x is not None:
                cands.append(x)
    else:
        pool_fwd = np.concatenate([[t**-2, tb**2], y / q**2, 1 / (y * q**2)])
        pool_rev = np.concatenate([[t**2 / q**2, 1 / (tb * q) ** 2], y, 1 / y])
        cands = _run_stages(
            params, n, cfg, F,
            lambda s: _open_cleared(params, s), lambda s: _reverse(_open_factors, params, s),
            pool_fwd, pool_rev, _open_admissible, OPEN,
            lambda rng: np.exp(0.7 * rng.normal(size=n) + 1.5j * rng.normal(size=n)))
    sols = _dedup(cands, OPEN, q, cfg.dedup_tol)
    return _finish(params, sols, OPEN, residual_open, cfg.tol)


def _open_n1_poly(params):
    """Coefficients (highest first) of the cleared n=1 double-row equation times x^{L+1}."""
    q, y, t, tb = params.q, params.y, params.t, params.tbar
    P = np.polynomial.polynomial
    lhs = P.polymul([-1 / t, t], [-tb, 1 / tb])
    rhs = P.polymul([-t / q, q / t], [-1 / (tb * q), tb * q])
    for yy in y:
        lhs = P.polymul(lhs, P.polymul([-yy / q, q], [-1 / (yy * q), q]))
        rhs = P.polymul(rhs, P.polymul([-yy, 1], [-1 / yy, 1]))
    return P.polysub(lhs, rhs)[::-1]


def solve(params, n, config=None):
    return solve_twisted(params, n, config) if params.boundary == TWISTED else solve_open(params, n, config)


def residual(params, roots):
    return residual_twisted(params, roots) if params.boundary == TWISTED else residual_open(params, roots)
