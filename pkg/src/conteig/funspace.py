"""Function-space substrate: adaptive Chebyshev functions on an interval,
quasi-matrices (ordered columns of functions), continuous L2 inner products,
and quasi-matrix QR / truncated SVD.

All solver algebra downstream is expressed over these objects instead of
vectors, so nothing here ever fixes a global discretization: each Fun carries
exactly as many Chebyshev coefficients as it needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _cheb
from .errors import DomainMismatch, NonConvergent, ZeroMatrix

#: Relative floor used when trimming machine-noise tails from arithmetic.
SIMPLIFY_TOL = 5e-16

#: Adaptive construction gives up beyond this many sample points.
MAX_POINTS = 2**16 + 1

_DOMAIN_RTOL = 1e-12


def _same_domain(d1, d2):
    scale = max(abs(d1[0]), abs(d1[1]), 1.0)
    return abs(d1[0] - d2[0]) <= _DOMAIN_RTOL * scale and abs(d1[1] - d2[1]) <= _DOMAIN_RTOL * scale


class Fun:
    """A function on [a, b] stored as a finite Chebyshev series.

    Parameters
    ----------
    coeffs : array_like
        Chebyshev coefficients c_0..c_n; real dtype marks a provably
        real-valued function.
    domain : (float, float)
        Interval endpoints a < b.

    Funs are immutable: all arithmetic returns new instances.
    """

    __slots__ = ("coeffs", "domain")

    def __init__(self, coeffs, domain):
        a, b = float(domain[0]), float(domain[1])
        if not a < b:
            raise ValueError("domain must satisfy a < b")
        c = np.atleast_1d(np.asarray(coeffs))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a nonempty 1-d array")
        if not np.iscomplexobj(c):
            c = c.astype(float)
        self.coeffs = c
        self.domain = (a, b)

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------
    @classmethod
    def from_values(cls, values, domain, simplify=False, tol=SIMPLIFY_TOL):
        """Interpolant through values at second-kind Chebyshev points."""
        c = _cheb.vals2coeffs(np.asarray(values))
        if simplify:
            c = _cheb.chop_coeffs(c, tol)
        return cls(c, domain)

    @classmethod
    def constant(cls, value, domain):
        arr = np.array([value])
        return cls(arr, domain)

    @classmethod
    def identity(cls, domain):
        a, b = domain
        return cls(np.array([0.5 * (a + b), 0.5 * (b - a)]), domain)

    # ------------------------------------------------------------------
    # basic queries
    # ------------------------------------------------------------------
    @property
    def size(self):
        return self.coeffs.size

    @property
    def is_real(self):
        return not np.iscomplexobj(self.coeffs)

    def __len__(self):
        return self.coeffs.size

    def __repr__(self):
        a, b = self.domain
        kind = "real" if self.is_real else "complex"
        return f"<Fun {kind}, {self.size} coeffs on [{a:.6g}, {b:.6g}]>"

    def _to_unit(self, x):
        a, b = self.domain
        return (2.0 * np.asarray(x, dtype=float) - (a + b)) / (b - a)

    def __call__(self, x):
        scalar = np.isscalar(x)
        out = _cheb.clenshaw(self._to_unit(np.atleast_1d(x)), self.coeffs)
        return out[0] if scalar else out

    def values(self, n):
        """Values at n second-kind points of this Fun's interval."""
        c = self.coeffs
        if n < c.size:
            raise ValueError("grid too small to represent this Fun")
        padded = np.zeros(n, dtype=c.dtype)
        padded[: c.size] = c
        return _cheb.coeffs2vals(padded)

    # ------------------------------------------------------------------
    # arithmetic
    # ------------------------------------------------------------------
    def _check(self, other):
        if not _same_domain(self.domain, other.domain):
            raise DomainMismatch(f"{self.domain} vs {other.domain}")

    def __add__(self, other):
        if np.isscalar(other):
            c = self.coeffs.astype(np.result_type(self.coeffs, other)).copy()
            c[0] += other
            return Fun(c, self.domain)
        self._check(other)
        n = max(self.size, other.size)
        c = np.zeros(n, dtype=np.result_type(self.coeffs, other.coeffs))
        c[: self.size] += self.coeffs
        c[: other.size] += other.coeffs
        return Fun(c, self.domain)

    __radd__ = __add__

    def __neg__(self):
        return Fun(-self.coeffs, self.domain)

    def __sub__(self, other):
        return self + (-other if not np.isscalar(other) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return Fun(self.coeffs * other, self.domain)
        self._check(other)
        n = self.size + other.size - 1
        vals = self.values(n) * other.values(n)
        return Fun.from_values(vals, self.domain, simplify=True)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return Fun(self.coeffs / other, self.domain)
        raise TypeError("division by a Fun is not supported")

    def conj(self):
        return Fun(np.conj(self.coeffs), self.domain)

    def real(self):
        return Fun(self.coeffs.real.copy(), self.domain)

    def imag(self):
        if self.is_real:
            return Fun(np.zeros(1), self.domain)
        return Fun(self.coeffs.imag.copy(), self.domain)

    def diff(self, order=1):
        """Derivative of the given order, via the coefficient recurrence."""
        a, b = self.domain
        c = self.coeffs
        for _ in range(order):
            c = _cheb.diff_coeffs(c, scale=2.0 / (b - a))
        return Fun(c, self.domain)

    def sum(self):
        """Definite integral over the domain."""
        a, b = self.domain
        return _cheb.definite_integral(self.coeffs, a, b)

    def norm(self):
        """L2 norm on the domain."""
        return float(np.sqrt(abs(inner_product(self, self))))

    def simplify(self, tol=SIMPLIFY_TOL):
        return Fun(_cheb.chop_coeffs(self.coeffs, tol), self.domain)

    def endpoint_derivatives(self, max_order):
        """Values of u, u', .., u^(max_order) at both endpoints.

        Returns (at_a, at_b) arrays of length max_order+1.
        """
        a, b = self.domain
        at_a = np.zeros(max_order + 1, dtype=complex)
        at_b = np.zeros(max_order + 1, dtype=complex)
        f = self
        for d in range(max_order + 1):
            at_a[d] = f(a)
            at_b[d] = f(b)
            if d < max_order:
                f = f.diff()
        return at_a, at_b

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------
    def to_dict(self):
        c = np.asarray(self.coeffs, dtype=complex)
        return {
            "domain": [self.domain[0], self.domain[1]],
            "coeffs_re": c.real.tolist(),
            "coeffs_im": c.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, record):
        re = np.asarray(record["coeffs_re"], dtype=float)
        im = np.asarray(record["coeffs_im"], dtype=float)
        coeffs = re + 1j * im if np.any(im) else re
        return cls(coeffs, tuple(record["domain"]))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def fun_from_samples(f, domain, tol=1e-14):
    """Adaptively sample a scalar function into a Fun.

    The grid doubles (17, 33, 65, ...) until the last two Chebyshev
    coefficients fall below `tol` times the largest, then the trailing noise
    plateau is trimmed.

    Raises
    ------
    NonConvergent
        If the cap of 2**16+1 points is reached without tail decay.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a, b = domain
    n = 17
    while n <= MAX_POINTS:
        x = _cheb.chebpts(n, a, b)
        vals = np.asarray(f(x))
        if vals.shape != x.shape:
            vals = np.array([f(xi) for xi in x])
        if not np.all(np.isfinite(vals)):
            raise ValueError("function returned non-finite samples")
        c = _cheb.vals2coeffs(vals)
        if _cheb.tail_is_resolved(c, tol):
            # acceptance is against tol; the trim only removes the rounding
            # plateau so downstream differentiation stays accurate
            return Fun(_cheb.chop_coeffs(c, SIMPLIFY_TOL), domain)
        n = 2 * (n - 1) + 1
    raise NonConvergent(f"no coefficient decay below tol={tol} at {MAX_POINTS} points")


def inner_product(u, v):
    """L2 inner product (u, v) = integral of conj(u) * v over the domain.

    Conjugate-linear in the first argument. Computed by Clenshaw-Curtis
    quadrature at the union degree, hence exact for polynomial integrands.
    """
    if not _same_domain(u.domain, v.domain):
        raise DomainMismatch(f"{u.domain} vs {v.domain}")
    return (u.conj() * v).sum()


class InnerProductSpace:
    """The Hilbert space carrying all function algebra: L2 on an interval."""

    kind = "L2"

    def __init__(self, domain):
        self.domain = (float(domain[0]), float(domain[1]))

    def inner(self, u, v):
        return inner_product(u, v)

    def norm(self, u):
        return u.norm()

    def __repr__(self):
        return f"InnerProductSpace(L2, {self.domain})"


class QuasiMatrix:
    """An ordered list of Funs sharing one interval, treated as the columns
    of a matrix whose "rows" are indexed by the interval."""

    __slots__ = ("columns", "domain")

    def __init__(self, columns):
        columns = list(columns)
        if not columns:
            raise ValueError("a quasi-matrix needs at least one column")
        dom = columns[0].domain
        for c in columns[1:]:
            if not _same_domain(dom, c.domain):
                raise DomainMismatch("columns live on different intervals")
        self.columns = columns
        self.domain = dom

    @property
    def ncols(self):
        return len(self.columns)

    def __len__(self):
        return len(self.columns)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return QuasiMatrix(self.columns[idx])
        return self.columns[idx]

    def __iter__(self):
        return iter(self.columns)

    def __repr__(self):
        return f"<QuasiMatrix {self.ncols} cols on {self.domain}>"

    def max_size(self):
        return max(c.size for c in self.columns)

    def coeff_matrix(self):
        """Zero-padded (max_size x ncols) coefficient matrix."""
        n = self.max_size()
        dtype = complex if any(not c.is_real for c in self.columns) else float
        out = np.zeros((n, self.ncols), dtype=dtype)
        for j, c in enumerate(self.columns):
            out[: c.size, j] = c.coeffs
        return out

    def values(self, n):
        """(n x ncols) values at n shared second-kind points."""
        return np.column_stack([c.values(n) for c in self.columns])

    def hcat(self, other):
        return QuasiMatrix(self.columns + list(other.columns))

    def matmul(self, mat):
        """Right-multiply by an (ncols x k) matrix of combination weights."""
        mat = np.atleast_2d(np.asarray(mat))
        if mat.shape[0] != self.ncols:
            raise ValueError("shape mismatch")
        combo = self.coeff_matrix() @ mat
        return QuasiMatrix(
            [Fun(_cheb.chop_coeffs(combo[:, j], SIMPLIFY_TOL), self.domain) for j in range(mat.shape[1])]
        )

    def apply_vector(self, vec):
        """Single linear combination of the columns, as a Fun."""
        vec = np.asarray(vec)
        combo = self.coeff_matrix() @ vec
        return Fun(_cheb.chop_coeffs(combo, SIMPLIFY_TOL), self.domain)

    def hprod(self, other):
        """Conjugate-transpose product: the (ncols x other.ncols) matrix of
        inner products (self_i, other_j)."""
        if not _same_domain(self.domain, other.domain):
            raise DomainMismatch("quasi-matrices on different intervals")
        n = 2 * max(self.max_size(), other.max_size()) + 1
        a, b = self.domain
        w = _cheb.cc_weights(n, a, b)
        va = self.values(n)
        vb = other.values(n)
        return va.conj().T @ (w[:, None] * vb)

    def gram(self):
        return self.hprod(self)


def _weighted_sample(V, pad=1):
    """Shared-grid sqrt-weighted sample of a quasi-matrix.

    The grid is large enough that discrete weighted inner products equal the
    continuous L2 ones for polynomial columns.
    """
    n = 2 * V.max_size() + pad
    a, b = V.domain
    w = _cheb.cc_weights(n, a, b)
    sq = np.sqrt(w)
    return sq[:, None] * V.values(n), sq, n


def _funs_from_weighted(cols, sq, domain):
    vals = cols / sq[:, None]
    return QuasiMatrix(
        [
            Fun(_cheb.chop_coeffs(_cheb.vals2coeffs(vals[:, j]), 1e-14), domain)
            for j in range(cols.shape[1])
        ]
    )


def qm_qr(V):
    """Continuous QR factorization V = Q R with L2-orthonormal Q columns.

    Computed by dense tall QR of the square-root-weighted shared-grid sample;
    R gets a nonnegative real diagonal. Rank deficiency shows up as small
    diagonal entries of R rather than as a failure.
    """
    Aw, sq, _ = _weighted_sample(V)
    Q, R = np.linalg.qr(Aw, mode="reduced")
    # rotate column phases so diag(R) >= 0
    d = np.diag(R).copy()
    phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    Q = Q * phase[None, :]
    R = phase.conj()[:, None] * R
    return _funs_from_weighted(Q, sq, V.domain), R


def qm_tsvd(V, delta):
    """Truncated SVD of a quasi-matrix: V ~ U1 diag(Sigma1) W1^H.

    The rank d keeps singular values with sigma_d / sigma_1 >= delta. U1 has
    L2-orthonormal Fun columns; Sigma1 is descending positive; W1 has
    orthonormal columns.

    Raises
    ------
    ZeroMatrix
        If the largest singular value is exactly zero.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    Aw, sq, _ = _weighted_sample(V)
    Qw, R = np.linalg.qr(Aw, mode="reduced")
    Ur, s, Wh = np.linalg.svd(R)
    if s[0] == 0.0:
        raise ZeroMatrix("quasi-matrix is identically zero")
    d = int(np.sum(s / s[0] >= delta))
    Uw = Qw @ Ur[:, :d]
    U1 = _funs_from_weighted(Uw, sq, V.domain)
    return U1, s[:d].copy(), Wh.conj().T[:, :d].copy()


def qm_singular_values(V):
    """Singular values of a quasi-matrix (no truncation, descending)."""
    Aw, _, _ = _weighted_sample(V)
    return np.linalg.svd(Aw, compute_uv=False)


def random_quasimatrix(L, domain, seed=0):
    """L columns, each interpolating 32 independent standard-normal values at
    32 Chebyshev points; deterministic for a given seed."""
    if L < 1:
        raise ValueError("need at least one column")
    rng = np.random.default_rng(seed)
    cols = [Fun.from_values(rng.standard_normal(32), domain) for _ in range(L)]
    return QuasiMatrix(cols)
