"""The four contour-integral eigensolvers over the function-space substrate.

All of them push a random source quasi-matrix V through the quadrature
moments and extract approximate eigenpairs from a small projected problem:

* cont_feast       -- accelerated subspace iteration on the zeroth moment
                      (QR basis + Rayleigh-Ritz), one L-dim pencil per sweep.
* cont_ss_rr       -- Rayleigh-Ritz on the full moment space (L*M columns,
                      TSVD-compressed), the workhorse method.
* cont_ss_hankel   -- Petrov-Galerkin via block Hankel matrices of reduced
                      moments; no orthonormalization of function columns.
* cont_ss_caa      -- block-Arnoldi reconstruction from QR factors of the
                      extended moment space (communication-avoiding layout).

Residuals in results are always recomputed from the operators; nothing is
trusted from the projected algebra.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import densela
from .contour import MomentDiagnostics, compute_moments
from .diffop import apply, residual_norm
from .errors import RankCollapse, SingularPencil, ZeroMatrix
from .funspace import QuasiMatrix, qm_qr, qm_singular_values, qm_tsvd, random_quasimatrix


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by all solvers.

    L source columns, M moment orders, N quadrature points; delta is the
    relative TSVD truncation threshold; ell counts subspace-iteration sweeps.
    """

    L: int
    M: int = 1
    N: int = 16
    delta: float = 1e-14
    ell: int = 1
    seed: int = 0
    tol_ode: float = 1e-12
    orthonormalize_between_iterations: bool = True
    use_symmetry: bool = True
    threads: int = 1
    max_degree: int = 4096

    def __post_init__(self):
        if min(self.L, self.M, self.N) < 1:
            raise ValueError("L, M, N must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.ell < 1:
            raise ValueError("ell must be at least 1")


@dataclass(frozen=True)
class EigPair:
    value: complex
    fun: object  # Fun, unit L2 norm
    residual: float
    in_region: bool


@dataclass
class SolverDiagnostics:
    timings: dict = field(default_factory=lambda: {
        "solve_odes": 0.0, "orthonormalization": 0.0, "matrix_eig": 0.0, "misc": 0.0,
    })
    total_time: float = 0.0
    n_ode_solves: int = 0
    ode_point_times: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)  # per sweep: list of (value, residual, in_region)

    def close(self, t_total):
        self.total_time = t_total
        known = sum(v for k, v in self.timings.items() if k != "misc")
        self.timings["misc"] = max(t_total - known, 0.0)


@dataclass
class EigResult:
    """Approximate eigenpairs plus the evidence behind them."""

    pairs: list  # of EigPair, deterministically ordered
    d: int
    singular_values: np.ndarray
    diagnostics: SolverDiagnostics

    @property
    def values(self):
        return np.array([p.value for p in self.pairs])

    @property
    def in_region_pairs(self):
        return [p for p in self.pairs if p.in_region]

    @property
    def in_region_values(self):
        return np.array(sorted((p.value for p in self.in_region_pairs), key=lambda v: (v.real, v.imag)))


def select_in_region(result, contour):
    """Re-flag pairs by strict membership in the contour's region; pairs
    outside are kept (flagged false), never dropped."""
    pairs = [replace(p, in_region=contour.in_region(p.value)) for p in result.pairs]
    return EigResult(pairs, result.d, result.singular_values, result.diagnostics)


def _sort_key(value):
    v = complex(value)
    return (not np.isfinite(v.real) or not np.isfinite(v.imag), v.real, v.imag)


def _finalize_pairs(prob, contour, values, funs):
    pairs = []
    for lam, u in zip(values, funs):
        lam = complex(lam)
        n = u.norm()
        finite = np.isfinite(lam.real) and np.isfinite(lam.imag)
        if n == 0.0 or not finite:
            pairs.append(EigPair(lam, u, float("inf"), False))
            continue
        un = u * (1.0 / n)
        pairs.append(EigPair(lam, un, residual_norm(prob, lam, un), contour.in_region(lam)))
    pairs.sort(key=lambda p: _sort_key(p.value))
    return pairs


def _record_history(diag, pairs):
    diag.residual_history.append([(p.value, p.residual, p.in_region) for p in pairs])


def subspace_iterate(prob, contour, V0, ell, M, *, with_extra=False, tol=1e-12,
                     orthonormalize=True, threads=1, max_degree=4096, on_iterate=None):
    """Run ell-1 zeroth-moment filter sweeps on V0, then assemble the final
    M-order moment set from the last iterate.

    With `on_iterate` given, every sweep assembles all M orders (same shifted
    solves, extra weighted sums only) and hands the intermediate MomentSet to
    the callback, which is how solvers record per-sweep residual histories.
    """
    diag = MomentDiagnostics()
    V = V0
    t_orth = 0.0
    mset = None
    for sweep in range(1, ell + 1):
        last = sweep == ell
        want_M = M if (last or on_iterate is not None) else 1
        mset = compute_moments(
            prob, V, contour, want_M, with_extra=with_extra and last,
            tol=tol, threads=threads, max_degree=max_degree,
        )
        diag.merge(mset.diagnostics)
        if on_iterate is not None:
            on_iterate(sweep, mset)
        if not last:
            t0 = time.perf_counter()
            V = qm_qr(mset.moments[0])[0] if orthonormalize else mset.moments[0]
            t_orth += time.perf_counter() - t0
    mset.diagnostics = diag
    diag.t_assemble += t_orth
    return mset


def _rr_extract(prob, contour, mset, delta, diag):
    """TSVD + Rayleigh-Ritz extraction used by cont_ss_rr on one moment set."""
    S = mset.stacked()
    t0 = time.perf_counter()
    try:
        U1, sigma, _ = qm_tsvd(S, delta)
    except ZeroMatrix as exc:
        raise RankCollapse("moment space is numerically zero") from exc
    diag.timings["orthonormalization"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    AU = QuasiMatrix([apply(prob.A, u) for u in U1])
    BU = QuasiMatrix([apply(prob.B, u) for u in U1])
    Ap = U1.hprod(AU)
    Bp = U1.hprod(BU)
    try:
        theta, T = densela.eig_generalized(Ap, Bp)
    except SingularPencil as exc:
        raise RankCollapse("projected pencil is singular") from exc
    funs = [U1.apply_vector(T[:, i]) for i in range(T.shape[1])]
    diag.timings["matrix_eig"] += time.perf_counter() - t0
    pairs = _finalize_pairs(prob, contour, theta, funs)
    return pairs, len(sigma), sigma


def cont_ss_rr(prob, config):
    """Rayleigh-Ritz over the TSVD-compressed moment space."""
    contour = prob.region
    t_start = time.perf_counter()
    diag = SolverDiagnostics()
    V0 = random_quasimatrix(config.L, prob.domain, config.seed)
    state = {}

    def extract(sweep, mset):
        pairs, d, sigma = _rr_extract(prob, contour, mset, config.delta, diag)
        _record_history(diag, pairs)
        state["final"] = (pairs, d, sigma)

    cnt = contour if config.use_symmetry else _nosym(contour)
    mset = subspace_iterate(
        prob, cnt, V0, config.ell, config.M, tol=config.tol_ode,
        orthonormalize=config.orthonormalize_between_iterations,
        threads=config.threads, max_degree=config.max_degree, on_iterate=extract,
    )
    diag.timings["solve_odes"] = mset.diagnostics.t_solve
    diag.n_ode_solves = mset.diagnostics.n_ode_solves
    diag.ode_point_times = list(mset.diagnostics.point_times)
    pairs, d, sigma = state["final"]
    diag.close(time.perf_counter() - t_start)
    return EigResult(pairs, d, sigma, diag)


def _nosym(contour):
    from .contour import _without_symmetry

    return _without_symmetry(contour)


def cont_feast(prob, config):
    """Accelerated subspace iteration on the zeroth moment: filter V, take an
    orthonormal QR basis, solve the L-dim Rayleigh-Ritz pencil, and feed the
    Ritz functions back in. config.M is ignored (the method is the M=1 case)."""
    contour = prob.region
    cnt = contour if config.use_symmetry else _nosym(contour)
    t_start = time.perf_counter()
    diag = SolverDiagnostics()
    V = random_quasimatrix(config.L, prob.domain, config.seed)
    pairs, sigma = None, None
    for _ in range(config.ell):
        mset = compute_moments(prob, V, cnt, 1, tol=config.tol_ode,
                               threads=config.threads, max_degree=config.max_degree)
        diag.timings["solve_odes"] += mset.diagnostics.t_solve
        diag.n_ode_solves += mset.diagnostics.n_ode_solves
        diag.ode_point_times.extend(mset.diagnostics.point_times)

        t0 = time.perf_counter()
        Q, R = qm_qr(mset.moments[0])
        diag.timings["orthonormalization"] += time.perf_counter() - t0
        sigma = np.linalg.svd(R, compute_uv=False)

        t0 = time.perf_counter()
        AQ = QuasiMatrix([apply(prob.A, q) for q in Q])
        BQ = QuasiMatrix([apply(prob.B, q) for q in Q])
        Ap = Q.hprod(AQ)
        Bp = Q.hprod(BQ)
        try:
            theta, T = densela.eig_generalized(Ap, Bp)
        except SingularPencil as exc:
            raise RankCollapse("projected pencil Q^H B Q is numerically singular") from exc
        funs = [Q.apply_vector(T[:, i]) for i in range(T.shape[1])]
        diag.timings["matrix_eig"] += time.perf_counter() - t0

        pairs = _finalize_pairs(prob, contour, theta, funs)
        _record_history(diag, pairs)
        V = QuasiMatrix([p.fun for p in pairs])
    diag.close(time.perf_counter() - t_start)
    return EigResult(pairs, len(pairs), sigma, diag)


def build_hankel_matrices(mus, M):
    """Block Hankel matrices from reduced moments mu_0..mu_{2M-1}:
    H (blocks mu_{i+j}) and H_shift (blocks mu_{i+j+1}), 0-based blocks."""
    if len(mus) < 2 * M:
        raise ValueError("need reduced moments up to order 2M-1")
    L = mus[0].shape[0]
    H = np.zeros((L * M, L * M), dtype=complex)
    Hs = np.zeros((L * M, L * M), dtype=complex)
    for i in range(M):
        for j in range(M):
            H[i * L:(i + 1) * L, j * L:(j + 1) * L] = mus[i + j]
            Hs[i * L:(i + 1) * L, j * L:(j + 1) * L] = mus[i + j + 1]
    return H, Hs


def hankel_pencil_eig(mus, M, delta):
    """Eigenvalues/vectors of the truncated Hankel pencil plus the coordinate
    map back into the moment space.

    Returns (theta, coords) where column i of coords expresses eigenfunction i
    in the basis of the stacked moment columns.
    """
    H, Hs = build_hankel_matrices(mus, M)
    U, s, W = densela.svd(H)
    if s[0] == 0.0:
        raise RankCollapse("reduced moment matrix is zero")
    d = int(np.sum(s / s[0] >= delta))
    U1, s1, W1 = U[:, :d], s[:d], W[:, :d]
    small = U1.conj().T @ Hs @ W1 @ np.diag(1.0 / s1)
    theta, T = densela.eig_standard(small)
    coords = W1 @ np.diag(1.0 / s1) @ T
    return theta, coords, d, s


def cont_ss_hankel(prob, config, Vtilde=None):
    """Petrov-Galerkin extraction from block Hankel matrices of the reduced
    moments mu_k = Vtilde^H S_k (Vtilde defaults to the source V)."""
    contour = prob.region
    cnt = contour if config.use_symmetry else _nosym(contour)
    t_start = time.perf_counter()
    diag = SolverDiagnostics()
    V = random_quasimatrix(config.L, prob.domain, config.seed)
    if Vtilde is None:
        Vtilde = V
    mset = subspace_iterate(
        prob, cnt, V, config.ell, 2 * config.M, tol=config.tol_ode,
        orthonormalize=config.orthonormalize_between_iterations,
        threads=config.threads, max_degree=config.max_degree,
    )
    diag.timings["solve_odes"] = mset.diagnostics.t_solve
    diag.n_ode_solves = mset.diagnostics.n_ode_solves
    diag.ode_point_times = list(mset.diagnostics.point_times)

    t0 = time.perf_counter()
    mus = [Vtilde.hprod(Sk) for Sk in mset.moments]
    theta, coords, d, s = hankel_pencil_eig(mus, config.M, config.delta)
    S = mset.moments[0]
    for blk in mset.moments[1:config.M]:
        S = S.hcat(blk)
    funs = [S.apply_vector(coords[:, i]) for i in range(coords.shape[1])]
    diag.timings["matrix_eig"] += time.perf_counter() - t0

    pairs = _finalize_pairs(prob, contour, theta, funs)
    _record_history(diag, pairs)
    diag.close(time.perf_counter() - t_start)
    return EigResult(pairs, d, s, diag)


def cont_ss_caa(prob, config):
    """Block-Arnoldi extraction from QR factors of the extended moment space
    [S_0 .. S_M] without ever applying the spectral map explicitly."""
    contour = prob.region
    cnt = contour if config.use_symmetry else _nosym(contour)
    t_start = time.perf_counter()
    diag = SolverDiagnostics()
    V = random_quasimatrix(config.L, prob.domain, config.seed)
    mset = subspace_iterate(
        prob, cnt, V, config.ell, config.M, with_extra=True, tol=config.tol_ode,
        orthonormalize=config.orthonormalize_between_iterations,
        threads=config.threads, max_degree=config.max_degree,
    )
    diag.timings["solve_odes"] = mset.diagnostics.t_solve
    diag.n_ode_solves = mset.diagnostics.n_ode_solves
    diag.ode_point_times = list(mset.diagnostics.point_times)

    L, M = config.L, config.M
    t0 = time.perf_counter()
    Qp, Rp = qm_qr(mset.stacked_plus())
    diag.timings["orthonormalization"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    R = Rp[: L * M, : L * M]
    Qhat = Qp[: L * M]
    Ur, s, Wr = densela.svd(R)
    if s[0] == 0.0:
        raise RankCollapse("moment space is numerically zero")
    d = int(np.sum(s / s[0] >= config.delta))
    U1, s1, W1 = Ur[:, :d], s[:d], Wr[:, :d]
    small = U1.conj().T @ Rp[: L * M, L: L * M + L] @ W1 @ np.diag(1.0 / s1)
    theta, T = densela.eig_standard(small)
    funs = [Qhat.apply_vector(U1 @ T[:, i]) for i in range(T.shape[1])]
    diag.timings["matrix_eig"] += time.perf_counter() - t0

    pairs = _finalize_pairs(prob, contour, theta, funs)
    _record_history(diag, pairs)
    diag.close(time.perf_counter() - t_start)
    return EigResult(pairs, d, s, diag)


SOLVERS = {
    "feast": cont_feast,
    "ssrr": cont_ss_rr,
    "sshankel": cont_ss_hankel,
    "sscaa": cont_ss_caa,
}
