"""Brute-force six-vertex lattice: monodromy, transfer matrices, Bethe vectors
and on-shell scalar products on the full 2^L space.

Conventions
-----------
R(λ) = [[a,0,0,0],[0,b,c,0],[0,c,b,0],[0,0,0,a]] with a=sinh(λ+γ), b=sinh λ,
c=sinh γ.  Monodromy T(λ) = R_{0L}(λ-μ_L)...R_{01}(λ-μ_1), auxiliary space
first, blocks [[A,B],[C,D]].  The pseudovacuum is basis state 0 and B lowers
the magnon number by flipping one site 0 -> 1.

Open chain: U(λ) = T(λ) K⁻(λ) T̂(λ) with T̂(λ) = R_{01}(λ+μ_1)...R_{0L}(λ+μ_L),
K⁻(λ) = diag(sinh(h+λ), sinh(h-λ)) and τ(λ) = K⁺₁ 𝒜 + K⁺₂ 𝒟 with
K⁺(λ) = diag(sinh(h̄-λ-γ), sinh(h̄+λ+γ)).  These were fixed by calibration
against the polynomial open Bethe equations (see calibrate_open).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .core_algebra import SymPoly, GridSample, interp_grid, circle_nodes

TWISTED = "twisted"
OPEN = "open"
MAX_L = 14


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Model instance in the λ-plane; polynomial variables are derived."""
    boundary: str
    gamma: complex
    mu: np.ndarray
    phi1: complex = 1.0
    phi2: complex = 1.0
    h: complex = 0.0
    hbar: complex = 0.0

    def __post_init__(self):
        if self.boundary not in (TWISTED, OPEN):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        mu = np.atleast_1d(np.asarray(self.mu, complex))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma", complex(self.gamma))
        for k in ("phi1", "phi2", "h", "hbar"):
            object.__setattr__(self, k, complex(getattr(self, k)))
        if self.L < 1 or self.L > MAX_L:
            raise ValueError(f"L={self.L} outside 1..{MAX_L}")
        q = self.q
        if abs(q) < 1e-12 or abs(q - 1) < 1e-8 or abs(q + 1) < 1e-8:
            raise ValueError("q must avoid 0 and ±1")
        y = self.y
        for i in range(self.L):
            for j in range(i):
                r = y[i] / y[j]
                if any(abs(r - z) < 1e-8 for z in (q**2, q**-2, q**4, q**-4)):
                    raise ValueError("inhomogeneities not generic")
        if self.boundary == TWISTED and (self.phi1 == 0 or self.phi2 == 0):
            raise ValueError("twist phases must be nonzero")

    @classmethod
    def from_polynomial(cls, boundary, q, y, phi1=1.0, phi2=1.0, t=1.0, tbar=1.0):
        y = np.atleast_1d(np.asarray(y, complex))
        return cls(boundary, np.log(complex(q)), np.log(y) / 2, phi1, phi2,
                   np.log(complex(t)), np.log(complex(tbar)))

    @property
    def L(self):
        return len(self.mu)

    @property
    def q(self):
        return np.exp(self.gamma)

    @property
    def y(self):
        return np.exp(2 * self.mu)

    @property
    def t(self):
        return np.exp(self.h)

    @property
    def tbar(self):
        return np.exp(self.hbar)

    def to_json(self):
        c = lambda z: [float(np.real(z)), float(np.imag(z))]
        d = {"boundary": self.boundary, "L": self.L, "gamma": c(self.gamma),
             "mu": [c(m) for m in self.mu]}
        if self.boundary == TWISTED:
            d.update(phi1=c(self.phi1), phi2=c(self.phi2))
        else:
            d.update(h=c(self.h), hbar=c(self.hbar))
        return d

    @classmethod
    def from_json(cls, d):
        z = lambda v: complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)
        kw = dict(boundary=d["boundary"], gamma=z(d["gamma"]),
                  mu=np.array([z(m) for m in d["mu"]]))
        if d["boundary"] == TWISTED:
            kw.update(phi1=z(d.get("phi1", 1)), phi2=z(d.get("phi2", 1)))
        else:
            kw.update(h=z(d.get("h", 0)), hbar=z(d.get("hbar", 0)))
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    n: int

    def sector_support_ok(self, atol=0.0):
        L = int(np.log2(len(self.amplitudes)))
        pop = np.array([bin(i).count("1") for i in range(2**L)])
        return bool(np.all(np.abs(self.amplitudes[pop != self.n]) <= atol))


def weights(params, lam):
    g = params.gamma
    return np.sinh(lam + g), np.sinh(lam), np.sinh(g)


def r_matrix(lam, gamma):
    a, b, c = np.sinh(lam + gamma), np.sinh(lam), np.sinh(gamma)
    return np.array([[a, 0, 0, 0], [0, b, c, 0], [0, c, b, 0], [0, 0, 0, a]], complex)


def _site_embed(lam, gamma, site, L):
    """R_{0,site} as a 2·2^L matrix with the auxiliary space as the leading factor."""
    r = r_matrix(lam, gamma).reshape(2, 2, 2, 2)
    d = 2**L
    left, right = np.eye(2**site), np.eye(2 ** (L - site - 1))
    M = np.zeros((2 * d, 2 * d), complex)
    for ao in range(2):
        for ai in range(2):
            M[ao * d:(ao + 1) * d, ai * d:(ai + 1) * d] = reduce(
                np.kron, [left, r[ao, :, ai, :], right])
    return M


def _check_size(params):
    if params.L > MAX_L:
        raise MemoryError(f"L={params.L} exceeds dense guard {MAX_L}")


def monodromy(params, lam):
    _check_size(params)
    L = params.L
    for m in params.mu:
        if abs(np.sinh(lam - m)) < 1e-12:
            warnings.warn("spectral parameter hits an inhomogeneity (degenerate weight)")
    M = np.eye(2 * 2**L, dtype=complex)
    for i, m in enumerate(params.mu):
        M = _site_embed(lam - m, params.gamma, i, L) @ M
    return M


def _blocks(M):
    d = M.shape[0] // 2
    return {"A": M[:d, :d], "B": M[:d, d:], "C": M[d:, :d], "D": M[d:, d:]}


def monodromy_entry(params, lam, which):
    return _blocks(monodromy(params, lam))[which]


def twisted_transfer(params, lam):
    if params.boundary != TWISTED:
        raise ValueError("twisted transfer needs a twisted model")
    b = _blocks(monodromy(params, lam))
    return params.phi1 * b["A"] + params.phi2 * b["D"]


def k_minus(params, lam):
    return np.array([np.sinh(params.h + lam), np.sinh(params.h - lam)])


def k_plus(params, lam):
    g = params.gamma
    return np.array([np.sinh(params.hbar - lam - g), np.sinh(params.hbar + lam + g)])


def double_row(params, lam, km=None):
    _check_size(params)
    L = params.L
    T = monodromy(params, lam)
    That = np.eye(2 * 2**L, dtype=complex)
    for i, m in enumerate(params.mu):
        That = That @ _site_embed(lam + m, params.gamma, i, L)
    km = k_minus(params, lam) if km is None else km
    K = np.kron(np.diag(km), np.eye(2**L))
    return T @ K @ That


def double_row_entries(params, lam):
    if params.boundary != OPEN:
        raise ValueError("double-row monodromy needs an open model")
    b = _blocks(double_row(params, lam))
    return b["A"], b["B"], b["C"], b["D"]


def open_transfer(params, lam, kp=None):
    A, _, _, D = double_row_entries(params, lam)
    kp = k_plus(params, lam) if kp is None else kp
    return kp[0] * A + kp[1] * D


def transfer(params, lam):
    return twisted_transfer(params, lam) if params.boundary == TWISTED else open_transfer(params, lam)


def vacuum_eigenvalue_open(params, lam):
    """Pseudovacuum eigenvalue of τ(λ), factorised form in the calibrated convention.

    Equals minus the vacuum (empty-product) form of the open functional-equation
    coefficients: b(λ+h)b(λ-h̄) a(2λ+γ)/b(2λ+γ) ∏a(λ-μ)a(λ+μ)
    + a(λ-h)a(λ+h̄) b(2λ)/a(2λ) ∏b(λ-μ)b(λ+μ), times -1.
    """
    g, h, hb = params.gamma, params.h, params.hbar
    a = lambda z: np.sinh(z + g)
    b = np.sinh
    m = params.mu
    t1 = b(lam + h) * b(lam - hb) * a(2 * lam + g) / b(2 * lam + g) * np.prod(a(lam - m) * a(lam + m))
    t2 = a(lam - h) * a(lam + hb) * b(2 * lam) / a(2 * lam) * np.prod(b(lam - m) * b(lam + m))
    return -(t1 + t2)


def calibrate_open(params, lam=0.31 + 0.17j, tol=1e-10):
    """Check the reflection-matrix convention: pseudovacuum eigenvalue of τ must
    match the factorised form.  Raises on mismatch (wrong K± convention)."""
    tau = open_transfer(params, lam)
    vac = np.zeros(2**params.L, complex)
    vac[0] = 1
    w = tau @ vac
    lam_num = w[0]
    err = np.linalg.norm(w - lam_num * vac) / max(abs(lam_num), 1e-300)
    ref = vacuum_eigenvalue_open(params, lam)
    rel = abs(lam_num - ref) / max(abs(ref), 1e-300)
    if err > tol or rel > tol:
        raise RuntimeError(f"double-row calibration failed: eigvec err {err:.2e}, eigval mismatch {rel:.2e}")
    return rel


def _creation(params, lam):
    if params.boundary == TWISTED:
        return monodromy_entry(params, lam, "B")
    return double_row_entries(params, lam)[1]


def _annihilation(params, lam):
    if params.boundary == TWISTED:
        return monodromy_entry(params, lam, "C")
    return double_row_entries(params, lam)[2]


def _vacuum(L):
    v = np.zeros(2**L, complex)
    v[0] = 1
    return v


def bethe_vector(params, lams):
    lams = np.atleast_1d(np.asarray(lams, complex))
    n = len(lams)
    if n > params.L:
        raise ValueError(f"n={n} exceeds L={params.L}")
    v = _vacuum(params.L)
    for lam in lams:
        v = _creation(params, lam) @ v
    return StateVector(v, n)


def dual_bethe_vector(params, lams):
    w = _vacuum(params.L)
    for lam in np.atleast_1d(np.asarray(lams, complex)):
        w = w @ _annihilation(params, lam)
    return w


def roots_to_lambda(x):
    return np.log(np.asarray(x, complex)) / 2


def _root_lams(roots):
    """Accept a BetheRootSet-like object (x-form roots) or an array of x values."""
    x = getattr(roots, "roots", roots)
    return roots_to_lambda(np.atleast_1d(np.asarray(x, complex)))


def eigencheck(params, roots, lam=0.37 + 0.21j):
    lams = _root_lams(roots)
    v = bethe_vector(params, lams).amplitudes
    if len(lams) == 0:
        return 0.0
    u = transfer(params, lam) @ v
    ev = np.vdot(v, u) / np.vdot(v, v)
    return float(np.linalg.norm(u - ev * v) / np.linalg.norm(u))


def oracle_scalar(params, roots, free):
    lb = _root_lams(roots)
    free = np.atleast_1d(np.asarray(free, complex))
    if len(lb) != len(free):
        raise ValueError("sector mismatch between roots and free variables")
    w = dual_bethe_vector(params, lb)
    return complex(w @ bethe_vector(params, free).amplitudes)


def prefactor_exponent(params):
    """S̄ = S·e^{(L-1)Σλ} (twisted), T̄ = T·e^{2LΣλ} (open)."""
    return params.L - 1 if params.boundary == TWISTED else 2 * params.L


def natural_cap(params):
    return params.L - 1 if params.boundary == TWISTED else 2 * params.L


def oracle_polynomial(params, roots, cap=None, radius=0.83 * np.exp(1j * np.pi / 7)):
    """Interpolate the polynomial scalar product on a λ-grid.

    Nodes are x_k = radius·e^{2πik/N}; each is reached through λ_k so the
    half-integer prefactor is evaluated as e^{pλ_k} without branch cuts.
    """
    lb = _root_lams(roots)
    n = len(lb)
    cap = natural_cap(params) if cap is None else cap
    if n == 0:
        return SymPoly.constant(oracle_scalar(params, lb, []), 1, cap)
    N = cap + 1
    lam = (np.log(abs(radius)) + 1j * (np.angle(radius) + 2 * np.pi * np.arange(N) / N)) / 2
    x = np.exp(2 * lam)
    p = prefactor_exponent(params)
    Bs = [_creation(params, l) for l in lam]
    w = dual_bethe_vector(params, lb)
    # contract from the left: u_{i_n...} = w B(λ_{i_n}) ... ; last applied operator first
    cur = w[None, :]
    for _ in range(n):
        cur = np.stack([cur @ B for B in Bs], axis=1)  # new leading index is later variable
        cur = cur.reshape(-1, cur.shape[-1])
    vals = cur[:, 0].reshape((N,) * n)
    # indices come out ordered (λ_1,...,λ_n) reversed; symmetric anyway, but keep exact
    vals = np.transpose(vals, axes=range(n)[::-1]) if n > 1 else vals
    pref = np.exp(p * lam)
    for ax in range(n):
        shape = [1] * n
        shape[ax] = N
        vals = vals * pref.reshape(shape)
    return interp_grid(GridSample(tuple([x] * n), vals))


def polynomial_value(params, roots, free):
    """prefactor·oracle_scalar at λ-points (the direct, interpolation-free value)."""
    free = np.atleast_1d(np.asarray(free, complex))
    return oracle_scalar(params, roots, free) * np.exp(prefactor_exponent(params) * free.sum())
