"""Linear ordinary differential operators with boundary conditions, operator
application, and the shifted boundary-value solve (z*B - A) y = B v that
dominates solver runtime.

The operator itself is never discretized into a fixed eigenproblem: each
solve builds a square Chebyshev collocation system at an adaptively chosen
degree, with the rows nearest the endpoints replaced by the boundary
functionals ("boundary bordering"), and accepts only once the coefficient
tail has decayed and the residual of the returned function verifies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.linalg import get_lapack_funcs

from . import _cheb
from .errors import DomainMismatch, IllConditioned, NonConvergent, ZeroFunction
from .funspace import Fun, _same_domain

_EPS = np.finfo(float).eps

#: rcond below this (after row equilibration) flags a shift sitting too close
#: to the spectrum.
_RCOND_FLOOR = 100.0 * _EPS


class DiffOp:
    """Operator sum_d c_d(x) * d^d/dx^d on an interval.

    Parameters
    ----------
    coeffs : sequence of Fun | scalar | None
        c_0 .. c_order; None entries are zero coefficients.
    domain : (float, float)
    """

    __slots__ = ("coeffs", "domain")

    def __init__(self, coeffs, domain):
        a, b = float(domain[0]), float(domain[1])
        coeffs = list(coeffs)
        if not coeffs:
            raise ValueError("need at least the order-0 coefficient")
        norm = []
        for c in coeffs:
            if c is None:
                norm.append(0.0)
            elif isinstance(c, Fun):
                if not _same_domain(c.domain, (a, b)):
                    raise DomainMismatch("coefficient on a different interval")
                norm.append(c)
            else:
                norm.append(complex(c) if isinstance(c, complex) or np.iscomplexobj(np.asarray(c)) else float(c))
        # trailing zero scalar coefficients would misreport the order
        while len(norm) > 1 and not isinstance(norm[-1], Fun) and norm[-1] == 0:
            norm.pop()
        self.coeffs = tuple(norm)
        self.domain = (a, b)

    @property
    def order(self):
        return len(self.coeffs) - 1

    @property
    def is_real(self):
        for c in self.coeffs:
            if isinstance(c, Fun):
                if not c.is_real:
                    return False
            elif isinstance(c, complex) and c.imag != 0:
                return False
        return True

    def __repr__(self):
        return f"<DiffOp order {self.order} on {self.domain}>"

    def coeff_values(self, x):
        """(order+1, len(x)) array of coefficient values on a grid."""
        x = np.asarray(x)
        any_complex = not self.is_real
        out = np.zeros((self.order + 1, x.size), dtype=complex if any_complex else float)
        for d, c in enumerate(self.coeffs):
            out[d] = c(x) if isinstance(c, Fun) else c
        return out

    @classmethod
    def identity(cls, domain):
        return cls([1.0], domain)


def combine_pencil(A, B, z):
    """The shifted operator z*B - A as a DiffOp."""
    if not _same_domain(A.domain, B.domain):
        raise DomainMismatch("pencil operators on different intervals")
    order = max(A.order, B.order)
    coeffs = []
    for d in range(order + 1):
        ca = A.coeffs[d] if d <= A.order else 0.0
        cb = B.coeffs[d] if d <= B.order else 0.0
        coeffs.append(z * cb - ca if (isinstance(ca, Fun) or isinstance(cb, Fun)) else z * cb - ca)
    return DiffOp(coeffs, A.domain)


def apply(op, u):
    """Apply a DiffOp to a Fun: sum_d c_d * u^(d)."""
    if not _same_domain(op.domain, u.domain):
        raise DomainMismatch("operator and function on different intervals")
    out = None
    du = u
    for d, c in enumerate(op.coeffs):
        if d > 0:
            du = du.diff()
        if isinstance(c, Fun):
            term = c * du
        elif c == 0:
            continue
        else:
            term = du * c
        out = term if out is None else out + term
    if out is None:
        out = Fun(np.zeros(1), u.domain)
    return out


@dataclass(frozen=True)
class BoundaryCondition:
    """Affine functional sum_d alpha_d u^(d)(a) + sum_d beta_d u^(d)(b) = 0."""

    at_left: tuple = ()
    at_right: tuple = ()

    @property
    def max_order(self):
        return max(len(self.at_left), len(self.at_right)) - 1

    @property
    def is_real(self):
        return all(np.isrealobj(np.asarray(v)) or np.imag(v) == 0 for v in (*self.at_left, *self.at_right))

    def evaluate(self, u):
        """Apply the functional to a Fun."""
        order = max(self.max_order, 0)
        at_a, at_b = u.endpoint_derivatives(order)
        val = 0.0 + 0.0j
        for d, alpha in enumerate(self.at_left):
            val += alpha * at_a[d]
        for d, beta in enumerate(self.at_right):
            val += beta * at_b[d]
        return val


class BoundaryConditions:
    """An ordered set of boundary functionals."""

    __slots__ = ("conditions",)

    def __init__(self, conditions):
        self.conditions = tuple(conditions)
        if not self.conditions:
            raise ValueError("need at least one boundary condition")

    @property
    def nbc(self):
        return len(self.conditions)

    @property
    def is_real(self):
        return all(c.is_real for c in self.conditions)

    def __iter__(self):
        return iter(self.conditions)

    def __len__(self):
        return len(self.conditions)

    @classmethod
    def dirichlet(cls):
        """u(a) = u(b) = 0."""
        return cls([BoundaryCondition(at_left=(1.0,)), BoundaryCondition(at_right=(1.0,))])

    @classmethod
    def clamped(cls):
        """u(a) = u'(a) = u(b) = u'(b) = 0."""
        return cls(
            [
                BoundaryCondition(at_left=(1.0,)),
                BoundaryCondition(at_right=(1.0,)),
                BoundaryCondition(at_left=(0.0, 1.0)),
                BoundaryCondition(at_right=(0.0, 1.0)),
            ]
        )


@dataclass
class DiffEigProblem:
    """Operator pencil A u = lambda B u with boundary conditions and a target
    region of the complex plane (the region's spectrum-avoidance assumption is
    recorded, not checked)."""

    A: DiffOp
    B: DiffOp
    bc: BoundaryConditions
    region: object = None  # a Contour, set for benchmark problems

    def __post_init__(self):
        if not _same_domain(self.A.domain, self.B.domain):
            raise DomainMismatch("pencil operators on different intervals")
        if self.bc.nbc != max(self.A.order, self.B.order):
            raise ValueError(
                f"{self.bc.nbc} boundary conditions for an order-"
                f"{max(self.A.order, self.B.order)} pencil"
            )

    @property
    def domain(self):
        return self.A.domain

    @property
    def is_real(self):
        return self.A.is_real and self.B.is_real and self.bc.is_real


# ----------------------------------------------------------------------
# collocation machinery
# ----------------------------------------------------------------------

_DIFFMAT_CACHE: dict = {}
_DIFFMAT_CACHE_BUDGET = 16


def _diffmat(x):
    """First-order spectral differentiation matrix on arbitrary points."""
    n = x.size
    if n == 1:
        return np.zeros((1, 1))
    c = np.ones(n)
    c[0] = 2.0
    c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    X = np.tile(x[:, None], (1, n))
    dX = X - X.T + np.eye(n)
    D = np.outer(c, 1.0 / c) / dX
    D -= np.diag(D.sum(axis=1))
    return D


def _diff_powers(npts, domain, max_order):
    """Cached [I, D, D^2, ..., D^max_order] on the npts-point grid."""
    key = (npts, domain)
    mats = _DIFFMAT_CACHE.get(key)
    if mats is None:
        x = _cheb.chebpts(npts, *domain)
        mats = [np.eye(npts), _diffmat(x)]
        if len(_DIFFMAT_CACHE) >= _DIFFMAT_CACHE_BUDGET:
            _DIFFMAT_CACHE.clear()
        _DIFFMAT_CACHE[key] = mats
    while len(mats) <= max_order:
        mats.append(mats[1] @ mats[-1])
    return mats[: max_order + 1]


def _boundary_rows(bc, D, npts):
    """Boundary functional rows for the bordered system, plus the indices of
    the collocation rows they replace (nearest each endpoint, balanced)."""
    rows = []
    for cond in bc:
        row = np.zeros(npts, dtype=complex)
        for d, alpha in enumerate(cond.at_left):
            if alpha != 0:
                row += alpha * (D[d][0, :] if d > 0 else np.eye(npts)[0])
        for d, beta in enumerate(cond.at_right):
            if beta != 0:
                row += beta * (D[d][-1, :] if d > 0 else np.eye(npts)[-1])
        rows.append(row)
    nbc = len(rows)
    n_left = (nbc + 1) // 2
    idx = list(range(n_left)) + list(range(npts - (nbc - n_left), npts))
    return rows, idx


def _collocation_matrix(op, bc, npts):
    """Bordered square collocation matrix for a DiffOp and its BCs."""
    x = _cheb.chebpts(npts, *op.domain)
    # matrices are built on the physical grid, so no chain-rule rescale
    Ds = _diff_powers(npts, op.domain, max(op.order, max(c.max_order for c in bc)))
    cvals = op.coeff_values(x)
    M = np.zeros((npts, npts), dtype=complex)
    for d in range(op.order + 1):
        col = cvals[d]
        if np.any(col != 0):
            M += col[:, None] * Ds[d]
    rows, idx = _boundary_rows(bc, Ds, npts)
    for row, i in zip(rows, idx):
        M[i, :] = row
    return M, idx, x


class _PointSolver:
    """LU-factored bordered collocation system at one (z, degree) pair,
    reusable across right-hand sides."""

    def __init__(self, A, B, bc, z, npts):
        self.op = combine_pencil(A, B, z)
        M, bidx, x = _collocation_matrix(self.op, bc, npts)
        self.bidx = bidx
        self.x = x
        self.npts = npts
        # row equilibration keeps the condition estimate about the solve
        # itself rather than about the raw derivative-matrix scaling
        rn = np.abs(M).max(axis=1)
        rn[rn == 0.0] = 1.0
        self.rownorm = rn
        Meq = M / rn[:, None]
        self.anorm = np.abs(Meq).sum(axis=0).max()
        self.lu, self.piv = scipy.linalg.lu_factor(Meq, check_finite=False)
        gecon = get_lapack_funcs("gecon", (self.lu,))
        self.rcond = gecon(self.lu, self.anorm)[0]

    def solve_values(self, rhs_vals):
        rhs = np.asarray(rhs_vals, dtype=complex).copy()
        rhs[self.bidx] = 0.0
        rhs /= self.rownorm
        return scipy.linalg.lu_solve((self.lu, self.piv), rhs, check_finite=False)


def _bvp_degrees(max_degree):
    n = 33
    while n <= max_degree + 1:
        yield n
        n = 2 * (n - 1) + 1


def bvp_solve_many(A, B, bc, z, rhs_list, tol=1e-12, max_degree=4096):
    """Solve (z*B - A) y_i = B rhs_i for several right-hand sides at one
    shift, sharing the factorization.

    Acceptance at a degree requires, for every right-hand side, a decayed
    coefficient tail, boundary functional values below tol * ||y||, and a
    verified residual ||(z*B - A) y - B rhs|| below tol times the term scale
    ||B rhs|| + |z| ||B y|| + ||A y|| (the scale the verification itself can
    resolve in floating point).

    Raises
    ------
    IllConditioned
        If the equilibrated collocation matrix has rcond below 100*eps,
        which signals a shift too close to the spectrum.
    NonConvergent
        If the degree cap is reached; the message names the first offending
        right-hand side index.
    """
    if not rhs_list:
        return []
    g_list = [apply(B, rhs) for rhs in rhs_list]
    g_norms = [g.norm() for g in g_list]
    if all(gn == 0.0 for gn in g_norms):
        return [Fun(np.zeros(1), A.domain) for _ in rhs_list]
    results = [None] * len(rhs_list)
    first_bad = 0
    for npts in _bvp_degrees(max_degree):
        ps = _PointSolver(A, B, bc, z, npts)
        if ps.rcond < _RCOND_FLOOR:
            raise IllConditioned(
                f"collocation rcond {ps.rcond:.2e} at degree {npts - 1}; shift {z} may sit near the spectrum"
            )
        all_ok = True
        for i, (rhs, g, gn) in enumerate(zip(rhs_list, g_list, g_norms)):
            if results[i] is not None:
                continue
            if gn == 0.0:
                results[i] = Fun(np.zeros(1), A.domain)
                continue
            yv = ps.solve_values(g(ps.x))
            c = _cheb.vals2coeffs(yv)
            if not _cheb.tail_is_resolved(c, tol):
                all_ok = False
                first_bad = i
                continue
            y = Fun(_cheb.chop_coeffs(c, 5e-16), A.domain)
            Ay = apply(A, y)
            By = apply(B, y)
            resid = (By * z - Ay - g).norm()
            # the z*By and Ay terms cancel down to g, so the attainable
            # residual floor scales with the terms, not with ||g|| alone
            scale = gn + abs(z) * By.norm() + Ay.norm()
            ynorm = y.norm()
            bc_ok = all(abs(cond.evaluate(y)) <= max(tol * ynorm, 1e-14 * ynorm) for cond in bc)
            if resid <= tol * scale and bc_ok:
                results[i] = y
            else:
                all_ok = False
                first_bad = i
        if all_ok and all(r is not None for r in results):
            return results
    raise NonConvergent(
        f"BVP solve at shift {z} still unresolved at degree {max_degree} (rhs index {first_bad}, tol={tol})"
    )


def bvp_solve(A, B, bc, z, rhs, tol=1e-12, max_degree=4096):
    """Solve the shifted boundary-value problem (z*B - A) y = B rhs."""
    return bvp_solve_many(A, B, bc, z, [rhs], tol=tol, max_degree=max_degree)[0]


def residual_norm(prob, lam, u):
    """||A u - lambda B u|| with u first normalized to unit L2 norm."""
    n = u.norm()
    if n == 0.0:
        raise ZeroFunction("residual of the zero function is undefined")
    un = u * (1.0 / n)
    r = apply(prob.A, un) - apply(prob.B, un) * lam
    return r.norm()
