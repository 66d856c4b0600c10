"""Substitution operator as a truncated Taylor series, x0-expansion of the
pole-cleared functional operator into a hierarchy of x0-independent
operators, closed-form leading operators and joint kernels.

Operators are stored as evaluation matrices: rows are sample points X^(s),
columns the monomial basis of the polynomials with per-variable cap m, so a
coefficient tensor c (flattened C-order) is mapped to the sample values
M @ c.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core_algebra import SymPoly, univariate_interp, monomial_basis
from .funeq import coeffs, yfun, zfun, _roots
from .lattice_oracle import TWISTED, OPEN, natural_cap

OMEGA, PHI = "Omega", "Phi"


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    k: int
    family: str
    cap: int
    n_vars: int
    matrix: np.ndarray
    sample_points: np.ndarray = field(repr=False)

    def apply(self, p):
        return self.matrix @ p.recap(self.cap).coeffs.ravel()

    def residual(self, p):
        """max |M c| relative to max over rows of |M||c|."""
        c = p.recap(self.cap).coeffs.ravel()
        num = np.abs(self.matrix @ c).max()
        den = (np.abs(self.matrix) @ np.abs(c)).max()
        return float(num / den) if den > 0 else 0.0

    def to_json(self):
        m = self.matrix
        return {"k": self.k, "family": self.family, "cap": self.cap, "n_vars": self.n_vars,
                "shape": list(m.shape),
                "sample_points": [[[float(z.real), float(z.imag)] for z in row] for row in self.sample_points],
                "entries": [[float(z.real), float(z.imag)] for z in m.ravel()]}

    @classmethod
    def from_json(cls, d):
        e = np.array(d["entries"], float)
        sp = np.array(d["sample_points"], float)
        return cls(d["k"], d["family"], d["cap"], d["n_vars"],
                   (e[:, 0] + 1j * e[:, 1]).reshape(d["shape"]), sp[..., 0] + 1j * sp[..., 1])

    def equals(self, other):
        return (self.k == other.k and self.family == other.family and self.cap == other.cap
                and self.n_vars == other.n_vars and np.array_equal(self.matrix, other.matrix)
                and np.array_equal(self.sample_points, other.sample_points))


# ------------------------------------------------------------ substitution operator

def apply_D(f, var, x0):
    """Σ_k (x0-x_var)^k/k! ∂^k f: the Taylor realisation of x_var -> x0.

    Each term has degree ≤ m in x_var, so no truncation is involved; the
    x_var dependence cancels between terms."""
    if not 0 <= var < f.n_vars:
        raise ValueError("variable index out of range")
    m = f.cap
    c = np.moveaxis(f.coeffs, var, 0)
    out = np.zeros_like(c)
    shift = np.array([1.0 + 0j])  # coefficients of (x0 - x)^k in x
    for k in range(m + 1):
        if k:
            shift = np.convolve(shift, [x0, -1.0])
        j = np.arange(k, m + 1)
        fac = np.array([math.perm(int(i), k) for i in j], float) / math.factorial(k)
        dk = c[k:] * fac.reshape((-1,) + (1,) * (c.ndim - 1))
        for a, s in enumerate(shift):
            out[a:a + len(dk)] += s * dk
    return SymPoly(np.moveaxis(out, 0, var))


def substitute(f, var, x0):
    """Direct substitution x_var -> x0 (constant along var)."""
    c = np.moveaxis(f.coeffs, var, 0)
    val = np.tensordot(x0 ** np.arange(f.cap + 1), c, axes=(0, 0))
    out = np.zeros_like(c)
    out[0] = val
    return SymPoly(np.moveaxis(out, 0, var))


# ------------------------------------------------------------ evaluation matrices

def monomial_vectors(points, cap):
    """Rows = kron of power vectors, ordered like coeffs.ravel()."""
    pts = np.atleast_2d(np.asarray(points, complex))
    pw = pts[:, :, None] ** np.arange(cap + 1)
    out = pw[:, 0, :]
    for v in range(1, pts.shape[1]):
        out = (out[:, :, None] * pw[:, v, None, :]).reshape(len(pts), -1)
    return out


def _forbidden(params, roots):
    E = _roots(roots)
    q = params.q
    if params.boundary == TWISTED:
        return np.concatenate([E, [0.0]])
    return np.concatenate([E, 1 / (q**2 * E), [1 / q, -1 / q, 0.0]])


def sample_points(params, roots, n, count, rng, min_dist=1e-1):
    """Generic points: coordinates on a rough annulus, pairwise separated and away
    from the coefficient pole loci (including the reflected loci x_i x_j q² = 1)."""
    bad = _forbidden(params, roots)
    q = params.q
    pts = []
    while len(pts) < count:
        z = np.exp(rng.uniform(-0.4, 0.4, n) + 2j * np.pi * rng.uniform(size=n))
        if n > 1:
            d = np.abs(z[:, None] - z[None, :]) + np.eye(n) * 10
            if d.min() < min_dist:
                continue
            if params.boundary == OPEN:
                pr = np.abs(z[:, None] * z[None, :] * q**2 - 1) + np.eye(n) * 10
                if pr.min() < min_dist:
                    continue
        if np.min(np.abs(z[:, None] - bad[None, :])) < min_dist:
            continue
        pts.append(z)
    return np.array(pts)


def operator_matrix(params, roots, x0, samples, cap):
    """[𝔏̄(x0) e_α](X^(s)) (or the open analogue) for every basis element α."""
    samples = np.atleast_2d(samples)
    n = samples.shape[1]
    out = np.empty((len(samples), (cap + 1) ** n), complex)
    for s, X in enumerate(samples):
        cb = coeffs(params, roots, x0, X)
        Ys = np.repeat(X[None, :], n, axis=0)
        Ys[np.arange(n), np.arange(n)] = x0
        mv = monomial_vectors(np.vstack([X[None, :], Ys]), cap)
        out[s] = cb.k0 * mv[0] + cb.kx @ mv[1:]
    return out


def operator_at_x0(params, roots, x0, alpha, samples, cap=None):
    cap = natural_cap(params) if cap is None else cap
    return operator_matrix(params, roots, x0, samples, cap)[:, alpha]


def clearing_factor(params, roots, x0, X):
    E = _roots(roots)
    q = params.q
    if params.boundary == TWISTED:
        return np.prod(x0 - E) / ((q - 1 / q) * x0)
    X = np.asarray(X, complex)
    return np.prod(x0 * q - 1 / (X * q)) * np.prod((x0 * q - 1 / (E * q)) * (x0 - E)) / (q - 1 / q)


def hierarchy_size(params, n):
    L = params.L
    return L + n - 1 if params.boundary == TWISTED else 2 * L + 3 * n + 1


def _x0_nodes(params, roots, samples, count, rng, min_dist=1e-2):
    bad = np.concatenate([_forbidden(params, roots), samples.ravel()])
    if params.boundary == OPEN:
        bad = np.concatenate([bad, 1 / (params.q**2 * samples.ravel())])
    best, best_d = None, -1.0
    for r in (1.0, 1.13, 0.89, 1.27, 0.79, 1.45, 0.7):
        for _ in range(20):
            nodes = r * np.exp(2j * np.pi * (np.arange(count) + rng.uniform()) / count)
            d = np.abs(nodes[:, None] - bad[None, :]).min()
            if d > best_d:
                best, best_d = nodes, d
        if best_d > min_dist:
            return best
    warnings.warn(f"x0 nodes only {best_d:.2e} away from pole loci")
    return best


@dataclass(frozen=True, eq=False)
class Hierarchy:
    ops: list
    saturation: float  # relative norm of the first coefficient beyond the expected degree
    nodes: np.ndarray
    samples: np.ndarray


def extract_hierarchy(params, roots, n=None, cap=None, oversample=2, seed=0, extra_nodes=1):
    """Interpolate the cleared operator in x0 and return its coefficient operators.

    `extra_nodes` additional nodes are used so the top recovered coefficients,
    which must vanish, measure degree saturation."""
    rng = np.random.default_rng(seed)
    E = _roots(roots)
    n = len(E) if n is None else n
    cap = natural_cap(params) if cap is None else cap
    family = OMEGA if params.boundary == TWISTED else PHI
    count = hierarchy_size(params, n)
    ncols = (cap + 1) ** n
    samples = sample_points(params, roots, n, oversample * ncols, rng)
    N = count + extra_nodes
    for attempt in range(4):
        nodes = _x0_nodes(params, roots, samples, N, rng)
        V = np.vander(nodes, N, increasing=True)
        if np.linalg.cond(V) < 1e8:
            break
        warnings.warn("ill-conditioned x0 interpolation, resampling nodes")
    mats = []
    for x0 in nodes:
        cl = np.array([clearing_factor(params, roots, x0, X) for X in samples])
        mats.append(cl[:, None] * operator_matrix(params, roots, x0, samples, cap))
    co = univariate_interp(nodes, mats)
    scale = max(np.abs(c).max() for c in co[:count])
    sat = max((np.abs(c).max() for c in co[count:]), default=0.0) / scale
    ops = [OperatorMatrix(k, family, cap, n, co[k], samples) for k in range(count)]
    return Hierarchy(ops, float(sat), nodes, samples)


# ------------------------------------------------------------ closed-form leading operators

def _deriv_rows(samples, cap, order):
    """Rows of ∂^order_{x_i} e_α at the samples, one block per variable i."""
    n = samples.shape[1]
    pw = np.arange(cap + 1)
    fac = np.array([math.perm(int(k), order) for k in pw], float)
    out = []
    for i in range(n):
        cols = []
        vals = np.ones((len(samples), 1), complex)
        for v in range(n):
            if v == i:
                e = np.where(pw >= order, pw - order, 0)
                pv = fac * samples[:, v, None] ** e
            else:
                pv = samples[:, v, None] ** pw
            vals = (vals[:, :, None] * pv[:, None, :]).reshape(len(samples), -1)
        out.append(vals)
    return out


def leading_closed_form(params, roots, samples, cap=None):
    E = _roots(roots)
    n = len(E)
    L = params.L
    q = params.q
    samples = np.atleast_2d(samples)
    cap = natural_cap(params) if cap is None else cap
    mv = monomial_vectors(samples, cap)
    if params.boundary == TWISTED:
        b = E.sum()
        pre = params.phi1 * q ** (L + 1 - n) - params.phi2 * q ** (n - 1)
        M = pre * (b - samples.sum(axis=1))[:, None] * mv
        D = _deriv_rows(samples, cap, L - 1)
        for i in range(n):
            coef = np.array([yfun(params, X[i], np.delete(X, i)) for X in samples]) / math.factorial(L - 1)
            M = M + coef[:, None] * D[i]
        return OperatorMatrix(L + n - 2, OMEGA, cap, n, M, samples)
    t, tb = params.t, params.tbar
    c = np.sum(E * q + 1 / (E * q))
    pre = t / tb * q ** (2 * L + 1) - tb / t * q ** (4 * n - 1)
    M = pre * (c - np.sum(samples * q + 1 / (samples * q), axis=1))[:, None] * mv
    D = _deriv_rows(samples, cap, 2 * L)
    for i in range(n):
        coef = np.array([(X[i] - 1 / X[i]) / (X[i] * q - 1 / (X[i] * q)) * zfun(params, X[i], np.delete(X, i))
                         for X in samples]) * q ** (2 * n + 1) / math.factorial(2 * L)
        M = M + coef[:, None] * D[i]
    return OperatorMatrix(2 * L + 3 * n, PHI, cap, n, M, samples)


def align(a, b):
    """Least-squares scalar s with s·b ≈ a; returns (s, max|a - s b| / max|a|)."""
    s = np.vdot(b.ravel(), a.ravel()) / np.vdot(b.ravel(), b.ravel())
    return s, float(np.abs(a - s * b).max() / np.abs(a).max())


# ------------------------------------------------------------ kernels

def perturb_aggregate(params, roots, delta):
    """Shift the first root so that 𝔟 (twisted) or 𝔠 (open) changes by delta."""
    x = _roots(roots).copy()
    if params.boundary == TWISTED:
        x[0] += delta
    else:
        q = params.q
        # solve x q + 1/(x q) = s exactly, keeping the branch next to the old root
        s = x[0] * q + 1 / (x[0] * q) + delta
        cand = np.roots([q, -s, 1 / q])
        x[0] = cand[np.argmin(np.abs(cand - x[0]))]
    return x


@dataclass(frozen=True, eq=False)
class KernelResult:
    basis: list
    spectrum: np.ndarray  # singular values divided by the largest


def symmetric_basis(n, cap):
    """Columns: symmetrised monomials (orbit sums), as flattened coefficient tensors."""
    seen, cols = set(), []
    for a in monomial_basis(n, cap):
        key = tuple(sorted(a))
        if key in seen:
            continue
        seen.add(key)
        e = np.zeros((cap + 1,) * n)
        for perm in set(itertools.permutations(a)):
            e[perm] = 1.0
        cols.append(e.ravel())
    return np.array(cols).T


def kernel(ops, tol=1e-6, symmetric=False):
    """Joint numerical nullspace of the stacked evaluation matrices.

    Each operator is scaled to unit max entry, then rows and columns of the
    stack are equilibrated to unit norm before the SVD (kernel dimension is
    unaffected; the reported σ ratios are then basis-scale independent).
    `symmetric` restricts the domain to symmetric polynomials."""
    caps = {(o.cap, o.n_vars) for o in ops}
    if len(caps) != 1:
        raise ValueError("operators do not share a basis")
    cap, n = caps.pop()
    A = np.vstack([o.matrix / np.abs(o.matrix).max() for o in ops])
    A = A / np.linalg.norm(A, axis=1, keepdims=True)
    P = symmetric_basis(n, cap) if symmetric else np.eye(A.shape[1])
    A = A @ P
    cn = np.linalg.norm(A, axis=0)
    A = A / cn
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    sv = np.concatenate([s, np.zeros(A.shape[1] - len(s))])
    rel = sv / sv[0]
    basis = []
    for j in np.nonzero(rel < tol)[0]:
        v = P @ (vh[j].conj() / cn)
        v = v / v[np.argmax(np.abs(v))]
        basis.append(SymPoly(v.reshape((cap + 1,) * n)))
    return KernelResult(basis, rel)


def overlap(p, r):
    """|⟨p, r⟩| / (‖p‖‖r‖) on coefficient vectors."""
    m = max(p.cap, r.cap)
    a, b = p.recap(m).coeffs.ravel(), r.recap(m).coeffs.ravel()
    return float(abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))


def commutator_with_residual(op_i, op_j):
    """(normalised commutator, worst least-squares projection residual)."""
    if op_i.cap != op_j.cap or op_i.n_vars != op_j.n_vars:
        raise ValueError("operators do not share a basis")
    squares, worst = [], 0.0
    for op in (op_i, op_j):
        V = monomial_vectors(op.sample_points, op.cap)
        Pm, *_ = np.linalg.lstsq(V, op.matrix, rcond=None)
        worst = max(worst, np.linalg.norm(V @ Pm - op.matrix) / np.linalg.norm(op.matrix))
        squares.append(Pm)
    A, B = squares
    return float(np.linalg.norm(A @ B - B @ A) / (np.linalg.norm(A) * np.linalg.norm(B))), float(worst)


def commutator_norm(op_i, op_j, resid_warn=1e-6):
    """Normalised commutator of the least-squares square restrictions."""
    val, res = commutator_with_residual(op_i, op_j)
    if res > resid_warn:
        warnings.warn(f"projection residual {res:.2e}: operator leaves the capped space")
    return val
