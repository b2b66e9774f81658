"""Small dense complex linear algebra used by the projected eigenproblems.

Everything is a thin, contract-checked wrapper over LAPACK via numpy/scipy;
the matrices involved are reduced problems of a few hundred rows at most.
Matrices are plain numpy arrays.
"""

import numpy as np
import scipy.linalg

from .errors import NoConvergence, SingularPencil


def _sort_eigpairs(values, vectors):
    """Deterministic ordering: ascending real part, ties by imaginary part;
    non-finite eigenvalues go last."""
    finite = np.isfinite(values)
    key = np.lexsort((values.imag, values.real, ~finite))
    return values[key], vectors[:, key]


def svd(A):
    """Full SVD A = U diag(Sigma) W^H with descending singular values.

    Returns (U, Sigma, W); W holds the right singular vectors as columns.
    """
    A = np.atleast_2d(np.asarray(A))
    try:
        U, s, Wh = np.linalg.svd(A)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return U, s, Wh.conj().T


def eig_standard(A):
    """Eigenpairs of a square matrix, deterministically ordered."""
    A = np.atleast_2d(np.asarray(A))
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    try:
        values, vectors = scipy.linalg.eig(A)
    except Exception as exc:  # LAPACK failure
        raise NoConvergence(str(exc)) from exc
    return _sort_eigpairs(values, vectors)


def eig_generalized(A, B):
    """Eigenpairs of the pencil (A, B): A t = theta B t.

    Well-conditioned B is folded into A and handled by the standard solver;
    otherwise the QZ path is used. Eigenvalues with a vanishing beta come
    back as inf.

    Raises
    ------
    SingularPencil
        If the pencil is singular to working tolerance (every alpha and beta
        pair numerically zero).
    """
    A = np.atleast_2d(np.asarray(A))
    B = np.atleast_2d(np.asarray(B))
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ValueError("matrices must be square and of equal size")
    if np.linalg.cond(B) < 1e12:
        return eig_standard(np.linalg.solve(B, A))
    # near-singular B: QZ, with alpha/beta inspected for a singular pencil
    try:
        ab, vectors = scipy.linalg.eig(A, B, homogeneous_eigvals=True)
    except Exception as exc:
        raise NoConvergence(str(exc)) from exc
    alpha, beta = ab
    scale = max(np.abs(A).max(), np.abs(B).max(), 1.0)
    degenerate = (np.abs(alpha) < 1e-13 * scale) & (np.abs(beta) < 1e-13)
    if np.all(degenerate):
        raise SingularPencil("pencil is identically singular")
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(np.abs(beta) > 0, alpha / np.where(np.abs(beta) > 0, beta, 1.0), np.inf + 0j)
    values = np.asarray(values, dtype=complex)
    return _sort_eigpairs(values, vectors)
