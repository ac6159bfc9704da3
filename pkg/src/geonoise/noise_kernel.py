"""Filter taps and analytic spectra of the power-law family of noise models.

Coloured noise is produced by filtering independent Gaussian deviates with an
impulse response ``h``. For power-law noise the taps are those of the
fractional-integration operator ``(1 - B)**(-kappa/2)``; the generalised
Gauss-Markov (GGM) model damps every tap by a factor ``phi`` so that the
memory becomes finite. ``kappa`` is the spectral index of the PSD,
``P(f) ~ f**kappa``: 0 is white, -1 flicker and -2 random walk.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.signal import fftconvolve

from .exceptions import DomainError, EmptyRequestError, SingularityError, SpecificationError

__all__ = [
    "NoiseKind",
    "NoiseModelSpec",
    "FilterCoefficients",
    "pl_filter_coeffs",
    "ggm_filter_coeffs",
    "figgm_filter_coeffs",
    "filter_coefficients",
    "psd_powerlaw",
    "psd_ggm",
    "powerlaw_p0",
    "noise_psd",
]

KAPPA_MIN = -2.0
KAPPA_MAX = 2.0

# Above this many taps the FIGGM convolution switches to FFT.
_DIRECT_CONVOLVE_MAX = 20000


class NoiseKind(str, enum.Enum):
    """Noise model families. Values are the short names used by the CLI."""

    WHITE = "wn"
    POWERLAW = "pl"
    FLICKER = "fn"
    RANDOM_WALK = "rw"
    GGM = "ggm"
    FIGGM = "figgm"
    PLWN = "plwn"
    SUM = "sum"


_CANONICAL_KAPPA = {
    NoiseKind.WHITE: 0.0,
    NoiseKind.FLICKER: -1.0,
    NoiseKind.RANDOM_WALK: -2.0,
}

FREE_PARAMETERS = {
    NoiseKind.WHITE: ("sigma",),
    NoiseKind.POWERLAW: ("sigma", "kappa"),
    NoiseKind.FLICKER: ("sigma",),
    NoiseKind.RANDOM_WALK: ("sigma",),
    NoiseKind.GGM: ("sigma", "kappa", "phi"),
    NoiseKind.FIGGM: ("sigma", "kappa", "kappa2", "phi"),
    NoiseKind.PLWN: ("sigma", "kappa", "phi_mix"),
    NoiseKind.SUM: (),
}


def _check_kappa(kappa, name="kappa"):
    if not np.isfinite(kappa) or not KAPPA_MIN <= kappa <= KAPPA_MAX:
        raise DomainError(f"{name}={kappa} outside [{KAPPA_MIN}, {KAPPA_MAX}]")


def _check_phi(phi):
    if not np.isfinite(phi) or not 0.0 < phi <= 1.0:
        raise DomainError(f"phi={phi} outside (0, 1]")


@dataclass(frozen=True)
class NoiseModelSpec:
    """Parameters of a noise model.

    Use the class-method constructors (:meth:`white`, :meth:`powerlaw`,
    :meth:`flicker`, ...) rather than the raw initializer.

    Attributes
    ----------
    kind : NoiseKind
        Model family.
    sigma : float
        Amplitude in units of the observations. For filtered models this is
        the standard deviation of the driving white noise; for ``PLWN`` it is
        the overall amplitude of ``sigma**2 (phi_mix J + (1 - phi_mix) I)``.
    kappa : float
        Spectral index of the (first) power-law stage.
    kappa2 : float
        Spectral index of the pure power-law stage of FIGGM.
    phi : float
        GGM damping factor in (0, 1].
    phi_mix : float
        Fraction of power-law variance in the ``PLWN`` mixture.
    components : tuple of NoiseModelSpec
        Summands of a ``SUM`` model.
    free : frozenset of str
        Parameters to be estimated by :func:`geonoise.estimator.mle_fit`.
    """

    kind: NoiseKind
    sigma: float = 1.0
    kappa: float | None = None
    kappa2: float = 0.0
    phi: float = 1.0
    phi_mix: float = 1.0
    components: tuple[NoiseModelSpec, ...] = ()
    free: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        kind = NoiseKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "free", frozenset(self.free))
        if kind in _CANONICAL_KAPPA:
            canonical = _CANONICAL_KAPPA[kind]
            if self.kappa is not None and self.kappa != canonical:
                raise SpecificationError(
                    f"{kind.name} noise has kappa={canonical}, got {self.kappa}"
                )
            object.__setattr__(self, "kappa", canonical)
        elif self.kappa is None:
            object.__setattr__(self, "kappa", -1.0 if kind != NoiseKind.SUM else 0.0)

        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise DomainError(f"sigma={self.sigma} must be finite and >= 0")
        _check_kappa(self.kappa)
        _check_kappa(self.kappa2, "kappa2")
        _check_phi(self.phi)
        if not 0.0 <= self.phi_mix <= 1.0:
            raise DomainError(f"phi_mix={self.phi_mix} outside [0, 1]")
        if kind == NoiseKind.SUM:
            if len(self.components) < 2:
                raise SpecificationError("a SUM model needs at least two components")
            if any(c.kind in (NoiseKind.SUM, NoiseKind.PLWN) for c in self.components):
                raise SpecificationError("SUM components must be single filtered models")
        elif self.components:
            raise SpecificationError(f"{kind.name} model takes no components")
        unknown = self.free - set(FREE_PARAMETERS[kind])
        if unknown:
            raise SpecificationError(
                f"{kind.name} model has no free parameter(s) {sorted(unknown)}"
            )

    # constructors -------------------------------------------------------

    @classmethod
    def white(cls, sigma=1.0):
        return cls(NoiseKind.WHITE, sigma=sigma)

    @classmethod
    def powerlaw(cls, kappa, sigma=1.0):
        return cls(NoiseKind.POWERLAW, sigma=sigma, kappa=kappa)

    @classmethod
    def flicker(cls, sigma=1.0):
        return cls(NoiseKind.FLICKER, sigma=sigma)

    @classmethod
    def random_walk(cls, sigma=1.0):
        return cls(NoiseKind.RANDOM_WALK, sigma=sigma)

    @classmethod
    def ggm(cls, kappa, phi, sigma=1.0):
        return cls(NoiseKind.GGM, sigma=sigma, kappa=kappa, phi=phi)

    @classmethod
    def figgm(cls, kappa1, kappa2, phi, sigma=1.0):
        return cls(NoiseKind.FIGGM, sigma=sigma, kappa=kappa1, kappa2=kappa2, phi=phi)

    @classmethod
    def plwn(cls, kappa, phi_mix, sigma=1.0):
        """Power-law plus white noise, ``sigma**2 (phi_mix J + (1-phi_mix) I)``."""
        return cls(NoiseKind.PLWN, sigma=sigma, kappa=kappa, phi_mix=phi_mix)

    @classmethod
    def plwn_from_amplitudes(cls, kappa, sigma_pl, sigma_w):
        """Build a PLWN model from separate power-law and white amplitudes."""
        total = sigma_pl**2 + sigma_w**2
        if total == 0:
            return cls.plwn(kappa, 0.5, 0.0)
        return cls.plwn(kappa, sigma_pl**2 / total, float(np.sqrt(total)))

    @classmethod
    def sum(cls, *components):
        return cls(NoiseKind.SUM, components=tuple(components))

    # derived views ------------------------------------------------------

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def with_free(self, *names):
        """Return a copy with ``names`` marked free; no names means all."""
        names = names or FREE_PARAMETERS[self.kind]
        return self.replace(free=self.free | set(names))

    def with_fixed(self, *names):
        return self.replace(free=self.free - set(names))

    @property
    def sigma_pl(self):
        """Power-law amplitude of a PLWN model (driving-noise units)."""
        if self.kind != NoiseKind.PLWN:
            raise SpecificationError("sigma_pl is defined for PLWN models only")
        return self.sigma * np.sqrt(self.phi_mix)

    @property
    def sigma_w(self):
        """White-noise amplitude of a PLWN model."""
        if self.kind != NoiseKind.PLWN:
            raise SpecificationError("sigma_w is defined for PLWN models only")
        return self.sigma * np.sqrt(1.0 - self.phi_mix)

    @property
    def is_stationary(self):
        """Whether the process has finite variance when started infinitely early.

        Pure power-law noise with ``kappa <= -1`` (flicker and redder) is
        non-stationary; GGM damping with ``phi < 1`` restores stationarity.
        """
        k = self.kind
        if k == NoiseKind.SUM:
            return all(c.is_stationary for c in self.components)
        if k in (NoiseKind.WHITE,):
            return True
        if k == NoiseKind.GGM:
            return self.phi < 1.0 or self.kappa > -1.0
        if k == NoiseKind.FIGGM:
            return self.kappa2 > -1.0 and (self.phi < 1.0 or self.kappa + self.kappa2 > -1.0)
        if k == NoiseKind.PLWN and self.phi_mix == 0.0:
            return True
        return self.kappa > -1.0

    @property
    def is_filtered(self):
        """True when the model is a single linear filter of white noise."""
        return self.kind not in (NoiseKind.PLWN, NoiseKind.SUM)

    def describe(self):
        """Compact ``key=value`` description used in report headers."""
        if self.kind == NoiseKind.SUM:
            return " + ".join(c.describe() for c in self.components)
        parts = [self.kind.value, f"sigma={self.sigma:.17g}"]
        if self.kind not in (NoiseKind.WHITE,):
            parts.append(f"kappa={self.kappa:.17g}")
        if self.kind == NoiseKind.FIGGM:
            parts.append(f"kappa2={self.kappa2:.17g}")
        if self.kind in (NoiseKind.GGM, NoiseKind.FIGGM):
            parts.append(f"phi={self.phi:.17g}")
        if self.kind == NoiseKind.PLWN:
            parts.append(f"phi_mix={self.phi_mix:.17g}")
        return " ".join(parts)


@dataclass(frozen=True, eq=False)
class FilterCoefficients:
    """Impulse response of a noise filter.

    ``h`` is stored read-only; ``kappa``, ``phi`` and ``kappa2`` record the
    parameters that produced it.
    """

    h: NDArray[np.float64]
    kappa: float
    phi: float = 1.0
    kappa2: float = 0.0

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    def __len__(self):
        return len(self.h)

    def __array__(self, dtype=None, copy=None):
        return self.h if dtype is None else self.h.astype(dtype)


def _taps(kappa, phi, n):
    if n < 1:
        raise EmptyRequestError(f"need at least one filter tap, got n={n}")
    i = np.arange(1, n, dtype=float)
    # h_i = (i - kappa/2 - 1) * phi * h_{i-1} / i, evaluated as a running product
    factors = (i - kappa / 2.0 - 1.0) * phi / i
    h = np.empty(n)
    h[0] = 1.0
    np.cumprod(factors, out=h[1:])
    return h


def pl_filter_coeffs(kappa, n):
    """Filter taps of pure power-law noise.

    Parameters
    ----------
    kappa : float
        Spectral index in [-2, 2].
    n : int
        Number of taps.

    Returns
    -------
    FilterCoefficients
        ``h[0] = 1`` and ``h[i] = (i - kappa/2 - 1) h[i-1] / i``.

    Examples
    --------
    >>> pl_filter_coeffs(-1, 4).h
    array([1.    , 0.5   , 0.375 , 0.3125])
    """
    _check_kappa(kappa)
    return FilterCoefficients(_taps(kappa, 1.0, int(n)), kappa=float(kappa))


def ggm_filter_coeffs(kappa, phi, n):
    """Filter taps of generalised Gauss-Markov noise.

    Identical to :func:`pl_filter_coeffs` except that each recursion step is
    damped by ``phi``; ``phi = 1`` gives pure power-law taps bit for bit.
    """
    _check_kappa(kappa)
    _check_phi(phi)
    return FilterCoefficients(_taps(kappa, phi, int(n)), kappa=float(kappa), phi=float(phi))


def figgm_filter_coeffs(kappa1, kappa2, phi, n):
    """Taps of a power-law filter (``kappa2``) followed by a GGM filter (``kappa1``, ``phi``).

    Both indices follow the same sign convention: negative values produce
    long memory. The result is the causal convolution of the two tap
    sequences truncated to ``n`` taps.
    """
    pl = pl_filter_coeffs(kappa2, n).h
    ggm = ggm_filter_coeffs(kappa1, phi, n).h
    if n <= _DIRECT_CONVOLVE_MAX:
        h = np.convolve(pl, ggm)[:n]
    else:
        h = fftconvolve(pl, ggm)[:n]
    return FilterCoefficients(h, kappa=float(kappa1), phi=float(phi), kappa2=float(kappa2))


def filter_coefficients(spec: NoiseModelSpec, n: int) -> FilterCoefficients:
    """Unit-amplitude filter taps for a single filtered noise model."""
    kind = spec.kind
    if kind in (NoiseKind.WHITE, NoiseKind.POWERLAW, NoiseKind.FLICKER, NoiseKind.RANDOM_WALK):
        return pl_filter_coeffs(spec.kappa, n)
    if kind == NoiseKind.GGM:
        return ggm_filter_coeffs(spec.kappa, spec.phi, n)
    if kind == NoiseKind.FIGGM:
        return figgm_filter_coeffs(spec.kappa, spec.kappa2, spec.phi, n)
    raise SpecificationError(f"{kind.name} model is not a single filter")


def _as_freq(f, fs):
    f = np.asarray(f, dtype=float)
    if fs <= 0:
        raise DomainError(f"sampling frequency must be positive, got {fs}")
    if np.any(f < 0) or np.any(f > fs / 2 * (1 + 1e-12)):
        raise DomainError("frequencies must lie in [0, fs/2]")
    return f


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def psd_powerlaw(f, kappa, sigma, fs):
    """One-sided PSD of fractionally differenced power-law noise.

    ``S(f) = 2 sigma**2 / fs * (2 sin(pi f / fs))**kappa``. The driving white
    noise has standard deviation ``sigma``.

    Raises
    ------
    SingularityError
        If ``f = 0`` and ``kappa < 0``.
    """
    _check_kappa(kappa)
    f = _as_freq(f, fs)
    if kappa < 0 and np.any(f == 0):
        raise SingularityError("power-law PSD diverges at f = 0 for kappa < 0")
    with np.errstate(divide="ignore"):
        s = 2.0 * sigma**2 / fs * (2.0 * np.sin(np.pi * f / fs)) ** kappa
    return _scalar_or_array(s)


def powerlaw_p0(kappa, sigma, fs):
    """Low-frequency constant ``P0`` with ``S(f) ~ P0 (f/fs)**kappa`` for ``f << fs``."""
    return 2.0 * sigma**2 / fs * (2.0 * np.pi) ** kappa


def psd_ggm(f, kappa, phi, sigma, fs):
    """One-sided PSD of GGM noise.

    ``S(f) = 2 sigma**2 / fs * (1 + phi**2 - 2 phi cos(2 pi f / fs))**(kappa/2)``,
    finite at ``f = 0`` whenever ``phi < 1``.
    """
    _check_kappa(kappa)
    _check_phi(phi)
    f = _as_freq(f, fs)
    if phi == 1.0 and kappa < 0 and np.any(f == 0):
        raise SingularityError("GGM PSD with phi = 1 diverges at f = 0 for kappa < 0")
    base = 1.0 + phi**2 - 2.0 * phi * np.cos(2.0 * np.pi * f / fs)
    with np.errstate(divide="ignore"):
        s = 2.0 * sigma**2 / fs * np.maximum(base, 0.0) ** (kappa / 2.0)
    return _scalar_or_array(s)


def noise_psd(spec: NoiseModelSpec, f: ArrayLike, fs: float):
    """Analytic one-sided PSD of any noise model."""
    k = spec.kind
    if k == NoiseKind.SUM:
        return sum(noise_psd(c, f, fs) for c in spec.components)
    if k == NoiseKind.PLWN:
        pl = psd_powerlaw(f, spec.kappa, 1.0, fs) if spec.phi_mix > 0 else 0.0
        wn = psd_powerlaw(f, 0.0, 1.0, fs)
        return spec.sigma**2 * (spec.phi_mix * pl + (1.0 - spec.phi_mix) * wn)
    if k == NoiseKind.GGM:
        return psd_ggm(f, spec.kappa, spec.phi, spec.sigma, fs)
    if k == NoiseKind.FIGGM:
        pl = psd_powerlaw(f, spec.kappa2, 1.0, fs) * fs / 2.0
        return pl * psd_ggm(f, spec.kappa, spec.phi, spec.sigma, fs)
    return psd_powerlaw(f, spec.kappa, spec.sigma, fs)
