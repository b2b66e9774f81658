"""Quadrature contours, complex-moment quasi-matrix assembly, and filter
diagnostics.

A contour packages quadrature nodes z_j and weights w_j. Applied to a source
quasi-matrix V through the shifted solves (z_j B - A) y = B v_i, the weighted
sums sum_j w_j z_j^k y_{i,j} assemble the moment quasi-matrices that span the
search space of every solver in this package. The induced scalar filter
f(lam) = sum_j w_j / (z_j - lam) measures how strongly an eigencomponent at
lam survives one pass through the quadrature.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diffop import bvp_solve_many
from .errors import ConteigError, NotEnoughEigenvalues, PoleHit
from .funspace import Fun, QuasiMatrix
from . import _cheb

ELLIPSE = "EllipseTrapezoid"
CHEBYSHEV = "ChebyshevRealFilter"


@dataclass(frozen=True)
class Contour:
    """Quadrature rule enclosing (ellipse) or covering (interval) the target
    region of the complex plane."""

    kind: str
    gamma: complex
    rho: float
    alpha: float
    n_points: int
    points: np.ndarray
    weights: np.ndarray
    exploit_symmetry: bool

    def in_region(self, lam):
        """Strictly-inside test for a (possibly complex) point."""
        lam = complex(lam)
        if not np.isfinite(lam.real) or not np.isfinite(lam.imag):
            return False
        if self.kind == ELLIPSE:
            u = (lam.real - self.gamma.real) / self.rho
            v = (lam.imag - self.gamma.imag) / (self.alpha * self.rho)
            return u * u + v * v < 1.0
        lo, hi = self.gamma.real - self.rho, self.gamma.real + self.rho
        return lo < lam.real < hi and abs(lam.imag) <= 1e-10 * max(1.0, self.rho)

    def to_dict(self):
        return {
            "kind": "ellipse" if self.kind == ELLIPSE else "chebyshev",
            "gamma_re": self.gamma.real,
            "gamma_im": self.gamma.imag,
            "rho": self.rho,
            "alpha": self.alpha,
            "N": self.n_points,
            "symmetry": self.exploit_symmetry,
        }

    @staticmethod
    def from_dict(d):
        if d.get("kind", "ellipse") == "ellipse":
            c = make_ellipse_contour(
                d["gamma_re"] + 1j * d.get("gamma_im", 0.0), d["rho"], d.get("alpha", 1.0), d["N"]
            )
            if not d.get("symmetry", True):
                c = _without_symmetry(c)
            return c
        return make_chebyshev_filter_contour(d["gamma_re"], d["rho"], d["N"])


def _without_symmetry(c):
    return Contour(c.kind, c.gamma, c.rho, c.alpha, c.n_points, c.points, c.weights, False)


def make_ellipse_contour(gamma, rho, alpha, n_points):
    """Trapezoidal rule on an ellipse with center gamma, semi-axis rho along
    the real direction and aspect ratio alpha.

    Nodes and weights:
        z_j = gamma + rho (cos t_j + i alpha sin t_j)
        w_j = (rho / N) (alpha cos t_j + i sin t_j),   t_j = 2 pi (j - 1/2) / N

    The half-step offset keeps nodes off the real axis, so for real pencils
    the conjugate pairing halves the number of shifted solves;
    exploit_symmetry is set accordingly when the center is real.
    """
    if rho <= 0 or alpha <= 0:
        raise ValueError("rho and alpha must be positive")
    if n_points < 2:
        raise ValueError("need at least two quadrature points")
    gamma = complex(gamma)
    j = np.arange(1, n_points + 1)
    theta = 2.0 * np.pi * (j - 0.5) / n_points
    z = gamma + rho * (np.cos(theta) + 1j * alpha * np.sin(theta))
    w = (rho / n_points) * (alpha * np.cos(theta) + 1j * np.sin(theta))
    sym = gamma.imag == 0.0 and n_points % 2 == 0
    return Contour(ELLIPSE, gamma, float(rho), float(alpha), int(n_points), z, w, sym)


def make_chebyshev_filter_contour(gamma, rho, n_points):
    """Real rational filter on the interval [gamma - rho, gamma + rho]:
    first-kind Chebyshev nodes with barycentric weights,
        z_j = gamma + rho cos((2j-1) pi / 2N),  w_j = (-1)^j sin((2j-1) pi / 2N).

    All nodes and weights are real, so real self-adjoint pencils stay in real
    arithmetic.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if n_points < 2:
        raise ValueError("need at least two quadrature points")
    gamma = float(gamma)
    j = np.arange(1, n_points + 1)
    t = (2.0 * j - 1.0) * np.pi / (2.0 * n_points)
    z = gamma + rho * np.cos(t)
    w = (-1.0) ** j * np.sin(t)
    return Contour(CHEBYSHEV, complex(gamma), float(rho), 0.0, int(n_points), z.astype(complex), w.astype(complex), False)


def filter_function(contour, lam):
    """The scalar filter f(lam) = sum_j w_j / (z_j - lam).

    Raises PoleHit when lam collides with a quadrature node.
    """
    lam = complex(lam)
    dz = contour.points - lam
    if np.abs(dz).min() < 1e-14 * contour.rho:
        raise PoleHit(f"{lam} coincides with a quadrature node")
    return complex(np.sum(contour.weights / dz))


def convergence_rate_estimate(contour, eigen_estimates, L, M):
    """Predicted per-iteration contraction |f(lam_{LM+1})| / min in-region |f|.

    `eigen_estimates` must list more than L*M eigenvalues (in-region ones plus
    enough neighbours); they are sorted here by descending filter magnitude.
    """
    lams = [complex(v) for v in eigen_estimates]
    if len(lams) <= L * M:
        raise NotEnoughEigenvalues(f"need more than L*M={L * M} eigenvalue estimates")
    mags = np.array([abs(filter_function(contour, v)) for v in lams])
    order = np.argsort(-mags)
    lams = [lams[i] for i in order]
    mags = mags[order]
    inside = [mags[i] for i in range(min(L * M, len(lams))) if contour.in_region(lams[i])]
    if not inside:
        raise NotEnoughEigenvalues("no in-region eigenvalue among the leading L*M estimates")
    return float(mags[L * M] / min(inside))


@dataclass
class MomentDiagnostics:
    """Per-assembly bookkeeping feeding the performance model."""

    point_times: list = field(default_factory=list)  # wall seconds per quadrature point
    points_used: list = field(default_factory=list)  # indices of solved points
    n_ode_solves: int = 0
    t_solve: float = 0.0
    t_assemble: float = 0.0

    def merge(self, other):
        self.point_times.extend(other.point_times)
        self.points_used.extend(other.points_used)
        self.n_ode_solves += other.n_ode_solves
        self.t_solve += other.t_solve
        self.t_assemble += other.t_assemble


@dataclass
class MomentSet:
    """Moment quasi-matrices S_0..S_{M-1} (optionally S_M) from one source V."""

    moments: list  # list of QuasiMatrix
    extra: QuasiMatrix | None
    L: int
    M: int
    N: int
    diagnostics: MomentDiagnostics

    def stacked(self):
        """All M moment blocks side by side (L*M columns)."""
        out = self.moments[0]
        for m in self.moments[1:]:
            out = out.hcat(m)
        return out

    def stacked_plus(self):
        """Moment blocks including the extra one (L*(M+1) columns)."""
        if self.extra is None:
            raise ValueError("moment set was assembled without the extra block")
        return self.stacked().hcat(self.extra)


def _combine(funs_by_point, weights, domain):
    """Deterministic weighted sum of Funs collected per quadrature point."""
    n = max(f.size for f in funs_by_point)
    acc = np.zeros(n, dtype=complex)
    for f, w in zip(funs_by_point, weights):
        acc[: f.size] += w * f.coeffs
    return Fun(_cheb.chop_coeffs(acc, 1e-300), domain)


def compute_moments(prob, V, contour, M, with_extra=False, tol=1e-12, threads=1, max_degree=4096):
    """Assemble the moment quasi-matrices S_k = sum_j w_j z_j^k y_{.,j} for
    k = 0..M-1 (plus S_M when with_extra), where (z_j B - A) y_{i,j} = B v_i.

    For a real pencil on a conjugate-symmetric contour only the upper-half
    nodes are solved and each S_k is 2 Re of the half sum. The reduction runs
    in a fixed node order, so results are identical for any thread count.

    Raises
    ------
    Propagates solve failures annotated with the (column, node) pair.
    """
    if M < 1:
        raise ValueError("need at least the zeroth moment")
    if V.ncols < 1:
        raise ValueError("empty source quasi-matrix")
    use_sym = (
        contour.exploit_symmetry
        and prob.is_real
        and contour.n_points % 2 == 0
        and all(c.is_real for c in V)
    )
    N = contour.n_points
    idx = list(range(N // 2)) if use_sym else list(range(N))
    diag = MomentDiagnostics()

    def solve_point(j):
        t0 = time.perf_counter()
        try:
            ys = bvp_solve_many(
                prob.A, prob.B, prob.bc, complex(contour.points[j]), list(V.columns),
                tol=tol, max_degree=max_degree,
            )
        except ConteigError as exc:
            raise type(exc)(f"quadrature node j={j + 1} (z={contour.points[j]:.6g}): {exc}") from exc
        return ys, time.perf_counter() - t0

    t_solve0 = time.perf_counter()
    if threads > 1 and len(idx) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            solved = list(pool.map(solve_point, idx))
    else:
        solved = [solve_point(j) for j in idx]
    diag.t_solve = time.perf_counter() - t_solve0
    for (ys, dt), j in zip(solved, idx):
        diag.point_times.append(dt)
        diag.points_used.append(j)
        diag.n_ode_solves += V.ncols

    t0 = time.perf_counter()
    orders = list(range(M + 1)) if with_extra else list(range(M))
    blocks = []
    for k in orders:
        wk = contour.weights[idx] * contour.points[idx] ** k
        cols = []
        for i in range(V.ncols):
            funs = [solved[pos][0][i] for pos in range(len(idx))]
            s = _combine(funs, wk, V.domain)
            if use_sym:
                s = s.real() * 2.0
            cols.append(s)
        blocks.append(QuasiMatrix(cols))
    diag.t_assemble = time.perf_counter() - t0

    extra = blocks[M] if with_extra else None
    return MomentSet(blocks[:M], extra, V.ncols, M, N, diag)
