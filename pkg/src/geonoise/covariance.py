"""Covariance matrices of noise models, Cholesky factors and Toeplitz solves."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import cho_solve, solve_triangular, toeplitz
from scipy.linalg.lapack import dpotrf

from .exceptions import ConditioningError, EmptyRequestError, FactorizationError
from .noise_kernel import NoiseKind, NoiseModelSpec, filter_coefficients

__all__ = [
    "CovarianceMatrix",
    "CholeskyFactor",
    "build_covariance",
    "unit_covariance",
    "filtered_covariance",
    "stationary_first_row",
    "toeplitz_covariance",
    "cholesky",
    "ToeplitzFactor",
    "levinson",
    "toeplitz_solve",
    "sample_covariance",
]

# Pivots smaller than this fraction of the largest diagonal element are rejected.
PIVOT_RTOL = 1e-12

# Stationary autocovariances are summed until the taps fall below this level,
# but over at most max(20 n, _TAIL_MIN_CAP) extra taps.
_TAIL_TOL = 1e-17
_TAIL_MIN_CAP = 1 << 17


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Dense symmetric positive-definite covariance.

    ``first_row`` is set when the matrix is Toeplitz.
    """

    dense: NDArray[np.float64]
    first_row: NDArray[np.float64] | None = None

    @property
    def dim(self):
        return self.dense.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.dense if dtype is None else self.dense.astype(dtype)


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Upper-triangular factor ``U`` with ``C = U.T @ U`` and ``ln det C``."""

    U: NDArray[np.float64]
    ln_det: float

    @property
    def dim(self):
        return self.U.shape[0]

    def whiten(self, b):
        """Return ``U^-T b`` (solves ``U.T z = b``)."""
        return solve_triangular(self.U, b, trans="T", lower=False, check_finite=False)

    def solve(self, b):
        """Return ``C^-1 b``."""
        return cho_solve((self.U, False), b, check_finite=False)

    def scaled(self, sigma):
        """Factor of ``sigma**2 C``."""
        n = self.dim
        return CholeskyFactor(self.U * sigma, self.ln_det + 2.0 * n * math.log(sigma))


def filtered_covariance(h: ArrayLike) -> NDArray[np.float64]:
    """Unit covariance of white noise passed through the causal filter ``h``.

    Element ``(k, l)`` with ``l >= k`` is ``sum_{i=0..k} h_i h_{i+l-k}``,
    i.e. ``U.T @ U`` with ``U`` the upper-triangular Toeplitz matrix of taps.
    Each diagonal is a running sum, which makes assembly O(n**2).
    """
    h = np.asarray(h, dtype=float)
    n = h.size
    c = np.empty((n, n))
    flat = c.reshape(-1)
    for d in range(n):
        diag = np.cumsum(h[: n - d] * h[d:])
        flat[d :: n + 1][: n - d] = diag
        if d:
            flat[d * n :: n + 1][: n - d] = diag
    return c


def _filtered_or_identity(spec, n):
    if spec.kind == NoiseKind.WHITE:
        return np.identity(n)
    return filtered_covariance(filter_coefficients(spec, n).h)


def unit_covariance(spec: NoiseModelSpec, n: int) -> NDArray[np.float64]:
    """Covariance of ``spec`` with its overall amplitude ``sigma`` set to one.

    For ``SUM`` models the component amplitudes are kept.
    """
    if n < 1:
        raise EmptyRequestError(f"covariance dimension must be >= 1, got {n}")
    if spec.kind == NoiseKind.SUM:
        return sum(c.sigma**2 * _filtered_or_identity(c, n) for c in spec.components)
    if spec.kind == NoiseKind.PLWN:
        c = np.identity(n) * (1.0 - spec.phi_mix)
        if spec.phi_mix > 0:
            c += spec.phi_mix * filtered_covariance(
                filter_coefficients(NoiseModelSpec.powerlaw(spec.kappa), n).h
            )
        return c
    return _filtered_or_identity(spec, n)


def build_covariance(spec: NoiseModelSpec, n: int) -> CovarianceMatrix:
    """Covariance matrix of ``n`` consecutive samples of ``spec``.

    The noise is assumed to be zero before the first sample, so power-law
    covariances grow along the diagonal when ``kappa < -1``.

    Examples
    --------
    >>> build_covariance(NoiseModelSpec.random_walk(), 3).dense
    array([[1., 1., 1.],
           [1., 2., 2.],
           [1., 2., 3.]])
    """
    unit = unit_covariance(spec, n)
    dense = unit if spec.kind == NoiseKind.SUM else spec.sigma**2 * unit
    first_row = None
    if spec.kind == NoiseKind.WHITE or (spec.kind == NoiseKind.PLWN and spec.phi_mix == 0):
        first_row = dense[0].copy()
    dense.setflags(write=False)
    return CovarianceMatrix(dense, first_row)


def _autocorrelation(h, nlags):
    nfft = 1 << int(2 * h.size - 1).bit_length()
    spec = np.fft.rfft(h, nfft)
    return np.fft.irfft(spec * spec.conj(), nfft)[:nlags]


def _stationary_unit_row(spec, n):
    if spec.kind == NoiseKind.WHITE:
        row = np.zeros(n)
        row[0] = 1.0
        return row
    phi = spec.phi
    if phi < 1.0:
        tail = int(math.ceil(math.log(_TAIL_TOL) / math.log(phi)))
        length = n + min(tail, max(20 * n, _TAIL_MIN_CAP))
    else:
        length = n
    h = filter_coefficients(spec, length).h
    if length <= 2048:
        return np.correlate(h, h, mode="full")[length - 1 : length - 1 + n]
    return _autocorrelation(h, n)


def stationary_first_row(spec: NoiseModelSpec, n: int) -> NDArray[np.float64]:
    """First row of a Toeplitz covariance for ``spec`` with unit ``sigma``.

    For stationary models (GGM with ``phi < 1``) this is the autocovariance
    of the process started infinitely long ago, truncated once the taps are
    negligible. For non-stationary power-law noise the row is the last row
    of the exact zero-start matrix, ``C[n-1-l, n-1]``: an approximation that
    treats the noise as fully developed over the whole window.
    """
    if n < 1:
        raise EmptyRequestError(f"covariance dimension must be >= 1, got {n}")
    if spec.kind == NoiseKind.SUM:
        return sum(c.sigma**2 * _stationary_unit_row(c, n) for c in spec.components)
    if spec.kind == NoiseKind.PLWN:
        row = np.zeros(n)
        row[0] = 1.0 - spec.phi_mix
        if spec.phi_mix > 0:
            row += spec.phi_mix * _stationary_unit_row(NoiseModelSpec.powerlaw(spec.kappa), n)
        return row
    return _stationary_unit_row(spec, n)


def toeplitz_covariance(spec: NoiseModelSpec, n: int) -> CovarianceMatrix:
    """Toeplitz covariance of ``spec``, see :func:`stationary_first_row`."""
    scale = 1.0 if spec.kind == NoiseKind.SUM else spec.sigma**2
    row = scale * stationary_first_row(spec, n)
    dense = toeplitz(row)
    dense.setflags(write=False)
    return CovarianceMatrix(dense, row)


def cholesky(c) -> CholeskyFactor:
    """Cholesky factor ``C = U.T @ U`` with the log-determinant.

    The determinant is accumulated as ``2 sum(log(diag(U)))`` so that it
    never overflows.

    Raises
    ------
    FactorizationError
        If ``C`` is not positive definite; ``pivot`` is the failing index.
    ConditioningError
        If a pivot is below ``1e-12`` times the largest diagonal element.
    """
    a = np.asarray(c, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise FactorizationError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        raise EmptyRequestError("empty covariance matrix")
    # a is symmetric, so its transpose is a free Fortran-ordered view
    u, info = dpotrf(a.T, lower=0, clean=1, overwrite_a=0)
    if info > 0:
        raise FactorizationError(
            f"matrix is not positive definite (pivot {info - 1})", pivot=info - 1
        )
    if info < 0:
        raise FactorizationError(f"invalid argument {-info} passed to dpotrf")
    d = np.diag(u)
    small = np.flatnonzero(d * d < PIVOT_RTOL * np.max(np.diag(a)))
    if small.size:
        k = int(small[0])
        raise ConditioningError(f"pivot {k} is numerically zero", pivot=k)
    return CholeskyFactor(u, float(2.0 * np.sum(np.log(d))))


def _durbin(t):
    """Levinson-Durbin recursion on the first row ``t``.

    Returns the monic order-``n`` predictor ``a`` (``a[0] = 1``), the final
    prediction-error variance and ``ln det T``. ``T^-1 e_1 = a / err``.
    """
    n = t.size
    t0 = t[0]
    if not t0 > 0:
        raise ConditioningError("Toeplitz diagonal must be positive", pivot=0)
    a = np.zeros(n)
    a[0] = 1.0
    err = t0
    ln_det = math.log(t0)
    floor = PIVOT_RTOL * t0
    for m in range(1, n):
        k = (t[m:0:-1] @ a[:m]) / err
        a[1 : m + 1] -= k * a[m - 1 :: -1]
        err *= 1.0 - k * k
        if not err > floor:
            raise ConditioningError(f"Toeplitz pivot {m} is numerically zero", pivot=m)
        ln_det += math.log(err)
    return a, err, ln_det


class ToeplitzFactor:
    """Inverse representation of a symmetric positive-definite Toeplitz matrix.

    Construction runs the O(n**2) Levinson-Durbin recursion once. Solves then
    use the Gohberg-Semencul form of the inverse,

        T^-1 = (L(a) L(a)^T - L(b) L(b)^T) / err,

    with ``L(v)`` the lower-triangular Toeplitz matrix with first column
    ``v``, ``a`` the monic predictor and ``b = [0, a[n-1], ..., a[1]]``.
    Each product with ``L`` or ``L^T`` is a zero-padded FFT convolution, so a
    solve costs O(n log n) per right-hand side.
    """

    def __init__(self, first_row: ArrayLike):
        t = np.asarray(first_row, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise EmptyRequestError("first row must be a non-empty vector")
        a, err, ln_det = _durbin(t)
        self.first_row = t
        self.ln_det = ln_det
        self._err = err
        n = t.size
        self._nfft = 1 << int(2 * n - 1).bit_length()
        back = np.zeros(n)
        back[1:] = a[:0:-1]
        self._fa = np.fft.rfft(a, self._nfft)
        self._fb = np.fft.rfft(back, self._nfft)

    @property
    def dim(self):
        return self.first_row.size

    def _lower(self, fv, x):
        n = self.dim
        return np.fft.irfft(fv[:, None] * np.fft.rfft(x, self._nfft, axis=0), self._nfft, axis=0)[:n]

    def _lower_t(self, fv, x):
        return self._lower(fv, x[::-1])[::-1]

    def solve(self, b: ArrayLike) -> NDArray[np.float64]:
        """Return ``T^-1 b`` for a vector or a matrix of right-hand sides."""
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.dim:
            raise ValueError(f"rhs has {b.shape[0]} rows, matrix has {self.dim}")
        x = b.reshape(self.dim, -1)
        out = self._lower(self._fa, self._lower_t(self._fa, x))
        out -= self._lower(self._fb, self._lower_t(self._fb, x))
        out /= self._err
        return out.reshape(b.shape)


def levinson(first_row: ArrayLike, rhs: ArrayLike):
    """Solve a symmetric positive-definite Toeplitz system.

    Parameters
    ----------
    first_row : array_like, shape (n,)
        First row (and column) of the matrix ``T``.
    rhs : array_like, shape (n,) or (n, k)
        One or several right-hand sides.

    Returns
    -------
    x : ndarray
        Solution of ``T x = rhs`` with the shape of ``rhs``.
    ln_det : float
        ``ln det T``, the sum of the logs of the prediction-error variances.

    Raises
    ------
    ConditioningError
        If a prediction-error variance drops below ``1e-12 * T[0, 0]``.
    """
    factor = ToeplitzFactor(first_row)
    return factor.solve(rhs), factor.ln_det


def toeplitz_solve(first_row: ArrayLike, rhs: ArrayLike) -> NDArray[np.float64]:
    """Solve ``T x = rhs`` for the symmetric Toeplitz matrix with ``first_row``.

    Examples
    --------
    >>> toeplitz_solve([1.0, 0.0, 0.0], [5.0, 6.0, 7.0])
    array([5., 6., 7.])
    """
    return levinson(first_row, rhs)[0]


def sample_covariance(w: ArrayLike, max_lag: int | None = None) -> NDArray[np.float64]:
    """Empirical Toeplitz covariance of a zero-mean series.

    Lag ``j`` is estimated as ``sum_i w_i w_{i+j} / (n - j)``. This is a
    diagnostic only: the long lags rest on very few products.
    """
    w = np.asarray(w, dtype=float)
    n = w.size
    max_lag = n - 1 if max_lag is None else min(max_lag, n - 1)
    lags = np.arange(max_lag + 1)
    acov = np.array([w[: n - j] @ w[j:] for j in lags]) / (n - lags)
    return toeplitz(acov)
