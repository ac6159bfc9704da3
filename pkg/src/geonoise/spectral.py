"""One-sided periodograms, Welch averaging and power-law fits to spectra."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.signal import get_window

from .exceptions import DomainError
from .timeseries import atomic_write, format_header, parse_header_line

__all__ = [
    "Periodogram",
    "dft",
    "idft",
    "periodogram",
    "welch",
    "welch_segment_length",
    "fit_power_law_psd",
    "read_periodogram",
]

WINDOWS = ("rectangular", "hann", "hamming", "blackman")
MIN_FIT_BINS = 8


@dataclass(frozen=True, eq=False)
class Periodogram:
    """Power spectral density on the one-sided grid ``k fs / N``.

    ``power`` has units of value**2 per frequency unit of ``fs``.
    """

    freqs: NDArray[np.float64]
    power: NDArray[np.float64]
    fs: float
    method: str = "raw"
    segments: int = 1
    segment_length: int | None = None
    overlap: float = 0.0
    window: str = "rectangular"

    def header(self):
        items = [("fs", f"{self.fs:.17g}"), ("method", self.method), ("window", self.window)]
        if self.method == "welch":
            items += [
                ("segments", str(self.segments)),
                ("segment_length", str(self.segment_length)),
                ("overlap", f"{self.overlap:.17g}"),
            ]
        return items

    def to_text(self, extra_header=()):
        rows = "".join(f"{f:.17g} {p:.17g}\n" for f, p in zip(self.freqs, self.power))
        return format_header(list(extra_header) + self.header()) + rows

    def write(self, path, extra_header=()):
        atomic_write(path, self.to_text(extra_header))


def read_periodogram(path) -> Periodogram:
    meta, rows = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                kv = parse_header_line(line)
                if kv:
                    meta[kv[0]] = kv[1]
                continue
            rows.append([float(v) for v in line.split()])
    data = np.array(rows).reshape(-1, 2)
    seg_len = meta.get("segment_length")
    return Periodogram(
        data[:, 0], data[:, 1], float(meta["fs"]), meta.get("method", "raw"),
        int(meta.get("segments", 1)), int(seg_len) if seg_len not in (None, "None") else None,
        float(meta.get("overlap", 0.0)), meta.get("window", "rectangular"),
    )


def dft(values: ArrayLike) -> NDArray[np.complex128]:
    """``Y_k = sum_n y_n exp(-2 pi i k n / N)`` for ``k = 0 .. N-1``."""
    return np.fft.fft(np.asarray(values, dtype=float))


def idft(coeffs: ArrayLike) -> NDArray[np.complex128]:
    """Inverse of :func:`dft`, ``y_n = sum_k Y_k exp(2 pi i k n / N) / N``."""
    return np.fft.ifft(coeffs)


def _one_sided(values, fs):
    """Unnormalised one-sided power ``|Y_k|**2`` with interior bins doubled."""
    n = values.size
    y = np.fft.rfft(values)
    power = np.abs(y) ** 2
    if n % 2 == 0:
        power[1:-1] *= 2.0
    else:
        power[1:] *= 2.0
    freqs = np.arange(power.size) * fs / n
    return freqs, power


def periodogram(values: ArrayLike, fs: float) -> Periodogram:
    """Raw one-sided periodogram.

    ``S_0 = |Y_0|**2 / (fs N)``, ``S_{N/2} = |Y_{N/2}|**2 / (fs N)`` and
    ``S_k = 2 |Y_k|**2 / (fs N)`` in between, so that
    ``sum(S) * fs / N`` equals the mean square of ``values``. For odd ``N``
    there is no Nyquist bin and every bin above zero is doubled.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        raise DomainError(f"periodogram needs at least 2 samples, got {n}")
    if not fs > 0:
        raise DomainError(f"sampling frequency must be positive, got {fs}")
    freqs, power = _one_sided(values, fs)
    return Periodogram(freqs, power / (fs * n), float(fs), "raw", 1, n, 0.0, "rectangular")


def welch_segment_length(n, segments, overlap):
    """Segment length that tiles ``n`` samples with ``segments`` overlapping pieces."""
    return int(n // (1 + (segments - 1) * (1.0 - overlap)))


def welch(
    values: ArrayLike,
    fs: float,
    segment_length: int | None = None,
    overlap_fraction: float = 0.5,
    window: str = "hann",
    segments: int = 4,
) -> Periodogram:
    """Welch estimate: average of windowed periodograms of overlapping segments.

    Parameters
    ----------
    values : array_like
    fs : float
        Sampling frequency.
    segment_length : int, optional
        Samples per segment. Defaults to the length that gives ``segments``
        pieces with the requested overlap.
    overlap_fraction : float
        Overlap between consecutive segments, in [0, 1).
    window : {"hann", "rectangular", "hamming", "blackman"}
    segments : int
        Only used to derive the default ``segment_length``.

    Each segment is scaled by ``1 / sum(window**2)`` so that the estimate is
    unbiased for white noise; a single rectangular segment reproduces
    :func:`periodogram` exactly. Samples past the last full segment are
    ignored.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if not 0.0 <= overlap_fraction < 1.0:
        raise DomainError(f"overlap must lie in [0, 1), got {overlap_fraction}")
    if window not in WINDOWS:
        raise DomainError(f"unknown window {window!r}; choose from {WINDOWS}")
    if segment_length is None:
        segment_length = welch_segment_length(n, segments, overlap_fraction)
    if segment_length > n:
        raise DomainError(f"segment length {segment_length} exceeds series length {n}")
    if segment_length < 2:
        raise DomainError("segments need at least 2 samples")
    if not fs > 0:
        raise DomainError(f"sampling frequency must be positive, got {fs}")
    step = max(1, segment_length - int(round(overlap_fraction * segment_length)))
    starts = range(0, n - segment_length + 1, step)
    name = "boxcar" if window == "rectangular" else window
    w = get_window(name, segment_length, fftbins=True)
    norm = fs * np.sum(w * w)
    total = None
    # fixed summation order keeps the result reproducible
    for start in starts:
        freqs, power = _one_sided(values[start : start + segment_length] * w, fs)
        total = power if total is None else total + power
    count = len(starts)
    return Periodogram(
        freqs, total / (count * norm), float(fs), "welch", count, segment_length,
        float(overlap_fraction), window,
    )


def fit_power_law_psd(pg: Periodogram):
    """Fit ``S = P0 (f / fs)**kappa`` by least squares in log-log space.

    The DC bin is excluded; bins with non-positive power are dropped with a
    warning.

    Returns
    -------
    P0 : float
    kappa : float

    Raises
    ------
    DomainError
        If fewer than 8 usable bins remain.
    """
    f = np.asarray(pg.freqs, dtype=float)
    s = np.asarray(pg.power, dtype=float)
    keep = f > 0
    f, s = f[keep], s[keep]
    positive = s > 0
    if not np.all(positive):
        warnings.warn(f"dropping {np.sum(~positive)} non-positive PSD bins", RuntimeWarning, stacklevel=2)
        f, s = f[positive], s[positive]
    if f.size < MIN_FIT_BINS:
        raise DomainError(f"need at least {MIN_FIT_BINS} positive-frequency bins, got {f.size}")
    X = np.column_stack([np.ones(f.size), np.log(f / pg.fs)])
    (ln_p0, kappa), *_ = np.linalg.lstsq(X, np.log(s), rcond=None)
    return float(np.exp(ln_p0)), float(kappa)
