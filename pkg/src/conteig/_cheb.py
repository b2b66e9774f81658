"""Low-level Chebyshev kernels: points, transforms, Clenshaw evaluation,
coefficient differentiation/integration and Clenshaw-Curtis weights.

Everything here works on raw numpy arrays; the Fun class in funspace wraps
these into a function type on an interval.
"""

import numpy as np
from scipy.fft import dct


def chebpts(n, a=-1.0, b=1.0):
    """n Chebyshev points of the second kind on [a, b], ascending.

    Uses the sine form so the grid is exactly symmetric about the midpoint.
    """
    if n < 1:
        raise ValueError("need at least one point")
    if n == 1:
        return np.array([0.5 * (a + b)])
    k = np.arange(n)
    x = np.sin(np.pi * (2.0 * k - (n - 1)) / (2.0 * (n - 1)))
    return 0.5 * (a + b) + 0.5 * (b - a) * x


def vals2coeffs(vals):
    """Chebyshev coefficients of the interpolant through values at ascending
    second-kind points."""
    vals = np.asarray(vals)
    n = vals.shape[0]
    if n == 1:
        return vals.copy()
    # DCT-I expects x_j = cos(j*pi/N) ordering, i.e. descending in x.
    c = dct(vals[::-1], type=1, axis=0) / (n - 1)
    c[0] *= 0.5
    c[-1] *= 0.5
    return c


def coeffs2vals(coeffs):
    """Values at ascending second-kind points of a Chebyshev series."""
    coeffs = np.asarray(coeffs)
    n = coeffs.shape[0]
    if n == 1:
        return coeffs.copy()
    w = coeffs.copy()
    w[1:-1] *= 0.5
    return dct(w, type=1, axis=0)[::-1]


def clenshaw(x, coeffs):
    """Evaluate a Chebyshev series at points x in [-1, 1]."""
    x = np.asarray(x)
    if coeffs.shape[0] == 1:
        return np.full_like(x, coeffs[0], dtype=np.result_type(coeffs, x))
    b1 = np.zeros_like(x, dtype=np.result_type(coeffs, x))
    b2 = b1.copy()
    x2 = 2.0 * x
    for ck in coeffs[:0:-1]:
        b1, b2 = ck + x2 * b1 - b2, b1
    return coeffs[0] + x * b1 - b2


def diff_coeffs(coeffs, scale=1.0):
    """Coefficients of the derivative of a Chebyshev series.

    `scale` is the chain-rule factor 2/(b-a) for series living on [a, b].
    """
    c = np.asarray(coeffs)
    n = c.shape[0]
    if n == 1:
        return np.zeros(1, dtype=c.dtype)
    w = 2.0 * np.arange(n) * c
    d = np.zeros(n - 1, dtype=np.result_type(c, float))
    d[n - 2::-2] = np.cumsum(w[n - 1::-2])[: len(d[n - 2::-2])]
    if n >= 3:
        d[n - 3::-2] = np.cumsum(w[n - 2::-2])[: len(d[n - 3::-2])]
    d[0] *= 0.5
    return d * scale


def integral_coeffs_weights(n):
    """Integrals of T_0..T_{n-1} over [-1, 1]; zero for odd degrees."""
    out = np.zeros(n)
    k = np.arange(0, n, 2)
    out[::2] = 2.0 / (1.0 - k.astype(float) ** 2)
    return out


def definite_integral(coeffs, a, b):
    """Integral over [a, b] of the Chebyshev series with given coefficients."""
    moments = integral_coeffs_weights(len(coeffs))
    return 0.5 * (b - a) * np.dot(moments, coeffs)


def cc_weights(n, a=-1.0, b=1.0):
    """Clenshaw-Curtis quadrature weights at n second-kind points on [a, b],
    ascending order, exact for polynomials of degree <= n-1."""
    if n == 1:
        return np.array([b - a])
    moments = integral_coeffs_weights(n)
    w = dct(0.5 * moments, type=1)
    w[1:-1] *= 2.0
    w *= 0.5 * (b - a) / (n - 1)
    return w[::-1]


def tail_is_resolved(coeffs, tol):
    """True when the last two coefficients sit below tol times the largest."""
    c = np.abs(np.asarray(coeffs))
    m = c.max()
    if m == 0.0:
        return True
    if len(c) < 3:
        return False
    return c[-1] <= tol * m and c[-2] <= tol * m


def chop_coeffs(coeffs, tol):
    """Trim the trailing coefficients below tol times the largest magnitude.

    Keeps at least one coefficient; a numerically-zero series collapses to a
    single zero.
    """
    c = np.asarray(coeffs)
    mags = np.abs(c)
    m = mags.max()
    if m == 0.0:
        return c[:1].copy()
    keep = np.nonzero(mags > tol * m)[0]
    if keep.size == 0:
        return np.zeros(1, dtype=c.dtype)
    return c[: keep[-1] + 1].copy()
