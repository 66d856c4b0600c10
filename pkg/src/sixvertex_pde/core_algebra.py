"""Dense multivariate polynomials over C with a per-variable degree cap.

Coefficients live in a complex tensor of shape (m+1,)*n where entry
[k1,...,kn] multiplies x1^k1 ... xn^kn.  Interpolation helpers work on
tensor grids and on matrix-valued univariate samples.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class SymPoly:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim == 0:
            raise ValueError("SymPoly needs at least one variable")
        if len(set(c.shape)) != 1:
            raise ValueError(f"non-uniform degree cap in shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_vars(self):
        return self.coeffs.ndim

    @property
    def cap(self):
        return self.coeffs.shape[0] - 1

    @classmethod
    def zeros(cls, n_vars, cap):
        return cls(np.zeros((cap + 1,) * n_vars, complex))

    @classmethod
    def constant(cls, value, n_vars, cap=0):
        c = np.zeros((cap + 1,) * n_vars, complex)
        c[(0,) * n_vars] = value
        return cls(c)

    @classmethod
    def monomial(cls, exponent, cap, value=1.0):
        exponent = tuple(int(e) for e in exponent)
        if any(e > cap or e < 0 for e in exponent):
            raise ValueError("exponent outside degree cap")
        c = np.zeros((cap + 1,) * len(exponent), complex)
        c[exponent] = value
        return cls(c)

    @classmethod
    def random(cls, n_vars, cap, rng):
        shape = (cap + 1,) * n_vars
        return cls(rng.normal(size=shape) + 1j * rng.normal(size=shape))

    def __call__(self, *point):
        return poly_eval(self, point)

    def recap(self, cap):
        """Zero-pad to a larger cap or truncate to a smaller one (explicit)."""
        out = np.zeros((cap + 1,) * self.n_vars, complex)
        k = min(cap, self.cap) + 1
        out[(slice(0, k),) * self.n_vars] = self.coeffs[(slice(0, k),) * self.n_vars]
        return SymPoly(out)

    def __add__(self, other):
        if isinstance(other, SymPoly):
            if other.n_vars != self.n_vars:
                raise ValueError("variable count mismatch")
            m = max(self.cap, other.cap)
            return SymPoly(self.recap(m).coeffs + other.recap(m).coeffs)
        return self + SymPoly.constant(other, self.n_vars)

    __radd__ = __add__

    def __neg__(self):
        return SymPoly(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, SymPoly):
            return SymPoly(self.coeffs * other)
        if other.n_vars != self.n_vars:
            raise ValueError("variable count mismatch")
        # cap grows to the sum; truncation is always explicit via recap
        m = self.cap + other.cap
        out = np.zeros((m + 1,) * self.n_vars, complex)
        for idx in zip(*np.nonzero(other.coeffs)):
            sl = tuple(slice(i, i + self.cap + 1) for i in idx)
            out[sl] += other.coeffs[idx] * self.coeffs
        return SymPoly(out)

    __rmul__ = __mul__

    def allclose(self, other, rtol=1e-10):
        m = max(self.cap, other.cap)
        a, b = self.recap(m).coeffs, other.recap(m).coeffs
        scale = max(np.abs(a).max(), np.abs(b).max(), 1e-300)
        return np.abs(a - b).max() <= rtol * scale

    def to_json(self):
        recs = [[list(map(int, idx)), [float(v.real), float(v.imag)]]
                for idx, v in np.ndenumerate(self.coeffs) if v != 0]
        return {"n_vars": self.n_vars, "cap": self.cap, "terms": recs}

    @classmethod
    def from_json(cls, d):
        p = np.zeros((d["cap"] + 1,) * d["n_vars"], complex)
        for idx, (re, im) in d["terms"]:
            p[tuple(idx)] = re + 1j * im
        return cls(p)


@dataclass(frozen=True, eq=False)
class GridSample:
    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        axes = tuple(np.asarray(a, complex) for a in self.axes)
        vals = np.asarray(self.values, complex)
        for a in axes:
            if a.ndim != 1:
                raise ValueError("each axis must be a 1-d node list")
            if len(a) > 1 and np.min(np.abs(a[:, None] - a[None, :])
                                     + np.eye(len(a))) < 1e-14:
                raise ValueError("duplicate interpolation nodes on an axis")
        if vals.shape != tuple(len(a) for a in axes):
            raise ValueError(f"value tensor shape {vals.shape} does not match axes")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)


def circle_nodes(count, radius=0.83 * np.exp(1j * np.pi / 7)):
    """Scaled roots of unity; the complex radius rotates them off symmetric loci."""
    return radius * np.exp(2j * np.pi * np.arange(count) / count)


def poly_eval(p, point):
    point = np.asarray(point, complex).ravel()
    if point.size != p.n_vars:
        raise ValueError(f"point has {point.size} coordinates, polynomial has {p.n_vars}")
    c = p.coeffs
    # Horner along the last axis, repeatedly
    for x in point[::-1]:
        acc = c[..., -1]
        for k in range(c.shape[-1] - 2, -1, -1):
            acc = acc * x + c[..., k]
        c = acc
    return complex(c)


def poly_eval_many(p, points):
    """Vectorised evaluation at rows of `points` (shape (N, n_vars))."""
    pts = np.asarray(points, complex).reshape(-1, p.n_vars)
    powers = pts[:, :, None] ** np.arange(p.cap + 1)[None, None, :]
    out = p.coeffs
    out = np.broadcast_to(out, (len(pts),) + out.shape)
    for v in range(p.n_vars - 1, -1, -1):
        out = np.einsum("s...k,sk->s...", out, powers[:, v, :])
    return out


def poly_partial(p, var, order):
    """∂^order/∂x_var^order; the uniform cap is kept (other variables are untouched)."""
    if var >= p.n_vars or var < 0:
        raise ValueError("variable index out of range")
    m = p.cap
    out = np.zeros_like(p.coeffs)
    if order > m:
        return SymPoly(out)
    k = np.arange(order, m + 1)
    fac = np.array([math.perm(int(j), order) for j in k], dtype=float)
    src = np.moveaxis(p.coeffs, var, 0)[order:]
    np.moveaxis(out, var, 0)[: m - order + 1] = src * fac.reshape((-1,) + (1,) * (p.n_vars - 1))
    return SymPoly(out)


def _vandermonde_solve(nodes, vals, axis=0):
    V = np.vander(nodes, len(nodes), increasing=True)
    moved = np.moveaxis(vals, axis, 0)
    sol = np.linalg.solve(V, moved.reshape(len(nodes), -1)).reshape(moved.shape)
    return np.moveaxis(sol, 0, axis)


def interp_grid(sample):
    vals = sample.values
    sizes = {len(a) for a in sample.axes}
    if len(sizes) != 1:
        raise ValueError("all axes need the same node count (uniform degree cap)")
    for ax, nodes in enumerate(sample.axes):
        vals = _vandermonde_solve(nodes, vals, axis=ax)
    return SymPoly(vals)


def sample_grid(fun, axes):
    """Evaluate fun(*point) on the tensor grid spanned by axes."""
    axes = [np.asarray(a, complex) for a in axes]
    vals = np.empty(tuple(len(a) for a in axes), complex)
    for idx in itertools.product(*(range(len(a)) for a in axes)):
        vals[idx] = fun(*(a[i] for a, i in zip(axes, idx)))
    return GridSample(tuple(axes), vals)


def univariate_interp(nodes, values):
    nodes = np.asarray(nodes, complex)
    values = [np.asarray(v, complex) for v in values]
    if len(nodes) != len(values):
        raise ValueError("one value matrix per node required")
    if len({v.shape for v in values}) != 1:
        raise ValueError("value matrices differ in shape")
    d = np.abs(nodes[:, None] - nodes[None, :]) + np.eye(len(nodes))
    if len(nodes) > 1 and d.min() < 1e-14:
        raise ValueError("duplicate interpolation nodes")
    co = _vandermonde_solve(nodes, np.stack(values), axis=0)
    return [c for c in co]


def monomial_basis(n_vars, cap):
    return list(itertools.product(range(cap + 1), repeat=n_vars))
