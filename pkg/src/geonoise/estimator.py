"""Weighted least squares, Gaussian log-likelihood and maximum likelihood fitting.

Trajectory parameters enter the model linearly and are always solved by
weighted least squares. Only the noise parameters are searched numerically,
with a Nelder-Mead simplex on the negative log-likelihood. By default the
overall noise amplitude is profiled out in closed form,
``sigma**2 = r^T C1^-1 r / N`` with ``C1`` the unit-amplitude covariance.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit, logit

from .covariance import (
    CholeskyFactor,
    ToeplitzFactor,
    build_covariance,
    cholesky,
    stationary_first_row,
    toeplitz_covariance,
    unit_covariance,
)
from .exceptions import (
    CollinearityError,
    ConvergenceWarning,
    DomainError,
    ObjectiveError,
    SpecificationError,
)
from .noise_kernel import NoiseKind, NoiseModelSpec
from .trajectory import DesignMatrix, TrajectoryModelSpec, build_design_matrix

__all__ = [
    "MinimizerOptions",
    "SimplexResult",
    "FitResult",
    "wls_fit",
    "log_likelihood",
    "sigma_from_residuals",
    "nelder_mead",
    "mle_fit",
    "fit_arrays",
]

logger = logging.getLogger(__name__)

LN_2PI = math.log(2.0 * math.pi)

# Search box for spectral indices.
KAPPA_BOUNDS = (-2.0, 0.1)

# Fewer observations leave too few residual degrees of freedom for noise estimation.
MIN_OBSERVATIONS = 8

# A restart must improve -ln L by at least this much to trigger another one.
RESTART_TOL = 1e-6
MAX_RESTARTS = 5


@dataclass
class MinimizerOptions:
    """Settings of the Nelder-Mead simplex.

    Attributes
    ----------
    xatol : float
        Stop once every vertex lies within ``xatol`` of the best vertex in
        every coordinate.
    max_iter : int
        Maximum number of simplex iterations.
    initial_simplex_scale : float
        Offset of the initial vertices from the start point along each axis.
    """

    xatol: float = 0.01
    max_iter: int = 1000
    initial_simplex_scale: float = 0.2

    def __post_init__(self):
        if not self.xatol > 0:
            raise DomainError(f"xatol must be positive, got {self.xatol}")
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.initial_simplex_scale > 0:
            raise DomainError("initial_simplex_scale must be positive")


@dataclass
class SimplexResult:
    x: NDArray[np.float64]
    fun: float
    nit: int
    nfev: int
    converged: bool


def _as_matrix(A):
    if isinstance(A, DesignMatrix):
        return A.A, A.column_labels
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    return A, [f"x{i}" for i in range(A.shape[1])]


def _solve_normal(N, rhs, labels):
    """Return ``(N^-1 rhs, N^-1)`` or raise on collinear columns."""
    scale = np.sqrt(np.diag(N))
    if np.any(scale == 0):
        bad = [labels[i] for i in np.flatnonzero(scale == 0)]
        raise CollinearityError(f"columns {bad} are identically zero", bad)
    Ns = N / np.outer(scale, scale)
    w, v = np.linalg.eigh(Ns)
    if w[0] <= 1e-12 * w[-1]:
        null = v[:, w <= 1e-12 * w[-1]]
        bad = [labels[i] for i in np.flatnonzero(np.any(np.abs(null) > 1e-6, axis=1))]
        raise CollinearityError(f"design columns {bad} are collinear", bad)
    factor = cho_factor(Ns)
    inv = cho_solve(factor, np.identity(len(scale))) / np.outer(scale, scale)
    inv = 0.5 * (inv + inv.T)
    return inv @ rhs, inv


def wls_fit(A, chol: CholeskyFactor, y: ArrayLike):
    """Weighted least-squares estimate and its covariance.

    Both sides are whitened with the Cholesky factor, ``B = U^-T A`` and
    ``z = U^-T y``; then ``x = (B^T B)^-1 B^T z`` and ``C_x = (B^T B)^-1``.

    Parameters
    ----------
    A : DesignMatrix or array_like, shape (N, M)
    chol : CholeskyFactor
        Factor of the noise covariance.
    y : array_like, shape (N,)

    Returns
    -------
    x : ndarray, shape (M,)
    C_x : ndarray, shape (M, M)

    Raises
    ------
    CollinearityError
        If ``B^T B`` is singular; ``columns`` names the offending columns.
    """
    A, labels = _as_matrix(A)
    y = np.asarray(y, dtype=float)
    if A.shape[0] != y.size or chol.dim != y.size:
        raise ValueError("design matrix, covariance and observations disagree in length")
    Bz = chol.whiten(np.column_stack([A, y]))
    B, z = Bz[:, :-1], Bz[:, -1]
    return _solve_normal(B.T @ B, B.T @ z, labels)


def _quadratic(factor, r):
    if isinstance(factor, ToeplitzFactor):
        return float(r @ factor.solve(r))
    z = factor.whiten(r)
    return float(z @ z)


def log_likelihood(chol: CholeskyFactor, residuals: ArrayLike) -> float:
    """Gaussian log-likelihood ``-(N ln 2pi + ln det C + r^T C^-1 r) / 2``.

    ``chol`` may also be a :class:`~geonoise.covariance.ToeplitzFactor`.
    """
    r = np.asarray(residuals, dtype=float)
    return -0.5 * (r.size * LN_2PI + chol.ln_det + _quadratic(chol, r))


def sigma_from_residuals(chol: CholeskyFactor, residuals: ArrayLike) -> float:
    """Amplitude ``sqrt(r^T C^-1 r / N)`` that maximises the likelihood of ``sigma**2 C``."""
    r = np.asarray(residuals, dtype=float)
    return math.sqrt(_quadratic(chol, r) / r.size)


def nelder_mead(objective, start, opts: MinimizerOptions | None = None, bounds=None):
    """Minimise ``objective`` with the downhill simplex method.

    Reflection, expansion, contraction and shrink coefficients are 1, 2,
    0.5 and 0.5. Points outside ``bounds`` (a sequence of ``(low, high)``
    pairs, ``None`` for unbounded) are rejected without evaluating the
    objective.

    Returns
    -------
    SimplexResult
        ``x`` is the best vertex and ``fun`` its value. ``converged`` is
        False when ``max_iter`` was exhausted; a ``ConvergenceWarning`` is
        issued in that case.

    Raises
    ------
    ObjectiveError
        If the objective returns NaN or an infinite value.
    """
    opts = opts or MinimizerOptions()
    x0 = np.atleast_1d(np.asarray(start, dtype=float)).copy()
    dim = x0.size
    if bounds is not None:
        bounds = [(-np.inf, np.inf) if b is None else b for b in bounds]
        lo = np.array([b[0] for b in bounds], dtype=float)
        hi = np.array([b[1] for b in bounds], dtype=float)
        if np.any(x0 < lo) or np.any(x0 > hi):
            raise DomainError(f"start point {x0} lies outside the bounds")
    nfev = 0

    def f(x):
        nonlocal nfev
        if bounds is not None and (np.any(x < lo) or np.any(x > hi)):
            return np.inf
        nfev += 1
        value = float(objective(x))
        if not np.isfinite(value):
            raise ObjectiveError(f"objective returned {value} at {x}")
        return value

    sim = np.vstack([x0] + [x0 + opts.initial_simplex_scale * e for e in np.identity(dim)])
    fsim = np.array([f(x) for x in sim])

    nit = 0
    converged = False
    while True:
        order = np.argsort(fsim, kind="stable")
        sim, fsim = sim[order], fsim[order]
        if np.max(np.abs(sim[1:] - sim[0])) <= opts.xatol:
            converged = True
            break
        if nit >= opts.max_iter:
            break
        nit += 1

        centroid = sim[:-1].mean(axis=0)
        worst = sim[-1]
        xr = centroid + (centroid - worst)
        fr = f(xr)
        if fr < fsim[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = f(xe)
            sim[-1], fsim[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
            continue
        if fr < fsim[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                sim[-1], fsim[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (worst - centroid)
            fc = f(xc)
            if fc < fsim[-1]:
                sim[-1], fsim[-1] = xc, fc
                continue
        sim[1:] = sim[0] + 0.5 * (sim[1:] - sim[0])
        fsim[1:] = [f(x) for x in sim[1:]]

    if not converged:
        warnings.warn(
            f"Nelder-Mead stopped after {nit} iterations without reaching xatol={opts.xatol}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return SimplexResult(sim[0].copy(), float(fsim[0]), nit, nfev, converged)


@dataclass
class FitResult:
    """Outcome of :func:`mle_fit`.

    ``C_x`` is scaled by the estimated amplitude. ``noise`` carries the
    estimated noise parameters with ``sigma`` set to ``sigma_driver``.
    """

    x: NDArray[np.float64]
    C_x: NDArray[np.float64]
    noise: NoiseModelSpec
    ln_L: float
    residuals: NDArray[np.float64]
    sigma_driver: float
    labels: list[str] = field(default_factory=list)
    converged: bool = True
    at_boundary: bool = False
    n_evaluations: int = 0
    n_iterations: int = 0
    runtime: float = 0.0

    @property
    def sigma_x(self):
        return np.sqrt(np.diag(self.C_x))

    def parameter(self, label):
        """Estimate and 1-sigma uncertainty of the column called ``label``."""
        i = self.labels.index(label)
        return float(self.x[i]), float(self.sigma_x[i])


@dataclass
class _Evaluation:
    x: NDArray[np.float64]
    C_x: NDArray[np.float64]  # for unit amplitude
    residuals: NDArray[np.float64]
    quad: float  # r^T C1^-1 r
    ln_det: float  # ln det C1


class _Problem:
    """Generalised least squares for a fixed design under varying noise models."""

    def __init__(self, A, labels, y, toeplitz):
        self.A = A
        self.labels = labels
        self.y = y
        self.toeplitz = toeplitz
        self.n = y.size

    def evaluate(self, spec):
        A, y = self.A, self.y
        if self.toeplitz:
            factor = ToeplitzFactor(stationary_first_row(spec, self.n))
            S = factor.solve(np.column_stack([A, y]))
            SA, Sy = S[:, :-1], S[:, -1]
            x, C_x = _solve_normal(A.T @ SA, A.T @ Sy, self.labels)
            r = y - A @ x
            quad = float(r @ (Sy - SA @ x))
        else:
            factor = cholesky(unit_covariance(spec, self.n))
            Bz = factor.whiten(np.column_stack([A, y]))
            B, z = Bz[:, :-1], Bz[:, -1]
            x, C_x = _solve_normal(B.T @ B, B.T @ z, self.labels)
            r = y - A @ x
            rw = z - B @ x
            quad = float(rw @ rw)
        return _Evaluation(x, C_x, r, quad, factor.ln_det)


def _ln_l(ev, n, sigma=None):
    """Log-likelihood at amplitude ``sigma``, or at the profiled optimum if None."""
    if sigma is None:
        return -0.5 * (n * LN_2PI + ev.ln_det + n * math.log(ev.quad / n) + n)
    return -0.5 * (n * LN_2PI + ev.ln_det + 2 * n * math.log(sigma) + ev.quad / sigma**2)


class _Parametrisation:
    """Maps between NoiseModelSpec values and the simplex search vector."""

    def __init__(self, family: NoiseModelSpec, profile: bool, sigma0: float):
        self.family = family
        free = family.free
        self.profiled = profile and "sigma" in free
        self.joint_plwn = (
            family.kind == NoiseKind.PLWN and not profile and {"sigma", "phi_mix"} <= free
        )
        names = []
        for name in ("kappa", "kappa2", "phi"):
            if name in free:
                names.append(name)
        if self.joint_plwn:
            names += ["log_sigma_pl", "log_sigma_w"]
        else:
            if "phi_mix" in free:
                names.append("phi_mix")
            if "sigma" in free and not self.profiled:
                names.append("log_sigma")
        self.names = names
        start, bounds = [], []
        for name in names:
            if name in ("kappa", "kappa2"):
                start.append(-0.5)
                bounds.append(KAPPA_BOUNDS)
            elif name == "phi":
                start.append(float(logit(0.9)))
                bounds.append(None)
            elif name == "phi_mix":
                start.append(0.0)
                bounds.append(None)
            elif name == "log_sigma":
                start.append(math.log(sigma0))
                bounds.append(None)
            else:
                start.append(math.log(sigma0 * math.sqrt(0.5)))
                bounds.append(None)
        self.start = np.array(start)
        self.bounds = bounds

    def spec(self, z):
        """Noise model for search vector ``z``; ``sigma`` is the amplitude to use."""
        values = dict(zip(self.names, z))
        changes = {}
        for name in ("kappa", "kappa2"):
            if name in values:
                changes[name] = float(values[name])
        if "phi" in values:
            changes["phi"] = float(min(expit(values["phi"]), 1.0))
        if "phi_mix" in values:
            changes["phi_mix"] = float(expit(values["phi_mix"]))
        if "log_sigma" in values:
            changes["sigma"] = math.exp(values["log_sigma"])
        if self.joint_plwn:
            spl = math.exp(values["log_sigma_pl"])
            sw = math.exp(values["log_sigma_w"])
            changes["sigma"] = math.sqrt(spl**2 + sw**2)
            changes["phi_mix"] = spl**2 / (spl**2 + sw**2)
        return self.family.replace(**changes)

    def at_boundary(self, z, xatol):
        # the final simplex may stop up to its own spread short of a bound
        margin = 2.0 * xatol
        for name, value, b in zip(self.names, z, self.bounds):
            if b is not None and (value - b[0] <= margin or b[1] - value <= margin):
                return True
            if name in ("phi", "phi_mix") and abs(value) > 6.9:
                return True
        return False


def _check_sizes(n, m, n_free):
    if n_free and n < MIN_OBSERVATIONS:
        raise SpecificationError(
            f"noise estimation needs at least {MIN_OBSERVATIONS} observations, got {n}"
        )
    if n_free and n < m + n_free + 1:
        raise SpecificationError(
            f"{n} observations cannot support {m} trajectory and {n_free} noise parameters"
        )


def fit_arrays(
    A,
    y: ArrayLike,
    noise_family: NoiseModelSpec,
    options: MinimizerOptions | None = None,
    *,
    toeplitz: bool = False,
    profile: bool = True,
) -> FitResult:
    """Maximum likelihood fit for an explicit design matrix; see :func:`mle_fit`."""
    started = time.perf_counter()
    options = options or MinimizerOptions()
    A, labels = _as_matrix(A)
    y = np.asarray(y, dtype=float)
    n, m = A.shape
    if y.size != n:
        raise ValueError(f"{y.size} observations for a design matrix with {n} rows")
    family = noise_family
    _check_sizes(n, m, len(family.free))

    if not family.free:
        if toeplitz:
            cov = toeplitz_covariance(family, n)
        else:
            cov = build_covariance(family, n)
        chol = cholesky(cov)
        x, C_x = wls_fit(DesignMatrix(A, labels), chol, y)
        r = y - A @ x
        return FitResult(
            x, C_x, family, log_likelihood(chol, r), r, family.sigma, labels,
            runtime=time.perf_counter() - started,
        )
    if family.kind == NoiseKind.SUM:
        raise SpecificationError("SUM models can only be evaluated with fixed parameters")

    problem = _Problem(A, labels, y, toeplitz)
    ols = problem.evaluate(NoiseModelSpec.white())
    sigma0 = max(math.sqrt(ols.quad / n), 1e-12)
    par = _Parametrisation(family, profile, sigma0)

    def evaluate(z):
        spec = par.spec(z)
        ev = problem.evaluate(spec)
        sigma = None if par.profiled else spec.sigma
        return spec, ev, _ln_l(ev, n, sigma)

    nfev = nit = 0
    converged = True
    if par.names:

        def objective(z):
            return -evaluate(z)[2]

        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            best = nelder_mead(objective, par.start, options, par.bounds)
            nfev, nit = best.nfev, best.nit
            for _ in range(MAX_RESTARTS):
                again = nelder_mead(objective, best.x, options, par.bounds)
                nfev += again.nfev
                nit += again.nit
                improvement = best.fun - again.fun
                if again.fun < best.fun:
                    best = again
                if improvement < RESTART_TOL:
                    break
        converged = not any(issubclass(w.category, ConvergenceWarning) for w in caught)
        if not converged:
            warnings.warn("noise parameter search did not converge", ConvergenceWarning, stacklevel=2)
        z = best.x
    else:
        z = np.array([])

    spec, ev, ln_l = evaluate(z)
    sigma = math.sqrt(ev.quad / n) if par.profiled else spec.sigma
    spec = spec.replace(sigma=sigma)
    logger.debug("mle_fit: %s, ln L = %.6f after %d evaluations", spec.describe(), ln_l, nfev)
    return FitResult(
        x=ev.x,
        C_x=ev.C_x * sigma**2,
        noise=spec,
        ln_L=ln_l,
        residuals=ev.residuals,
        sigma_driver=sigma,
        labels=labels,
        converged=converged,
        at_boundary=par.at_boundary(z, options.xatol) if par.names else False,
        n_evaluations=nfev,
        n_iterations=nit,
        runtime=time.perf_counter() - started,
    )


def mle_fit(
    ts,
    traj: TrajectoryModelSpec,
    noise_family: NoiseModelSpec,
    options: MinimizerOptions | None = None,
    *,
    toeplitz: bool = False,
    profile: bool = True,
) -> FitResult:
    """Jointly estimate trajectory and noise parameters by maximum likelihood.

    Parameters
    ----------
    ts : TimeSeries
        Observations; the design matrix is evaluated at ``ts.years``.
    traj : TrajectoryModelSpec
        Trajectory model.
    noise_family : NoiseModelSpec
        Noise model; parameters listed in ``noise_family.free`` are
        estimated, the others are held at their given values.
    options : MinimizerOptions, optional
        Simplex settings.
    toeplitz : bool
        Use the O(N**2) Toeplitz approximation of the covariance instead of
        the exact dense matrix.
    profile : bool
        Compute the overall amplitude in closed form instead of searching
        it. With ``profile=False`` a free PLWN model is searched over its
        two separate amplitudes.

    Returns
    -------
    FitResult

    Notes
    -----
    Spectral indices are searched in [-2, 0.1]; ``phi`` and ``phi_mix`` go
    through a logistic transform and amplitudes through a logarithm, so
    every simplex vertex is a valid model. After convergence the simplex is
    restarted from the best point until a restart gains less than 1e-6 in
    ``ln L``.
    """
    A = build_design_matrix(traj, ts.years)
    return fit_arrays(A, ts.values, noise_family, options, toeplitz=toeplitz, profile=profile)
