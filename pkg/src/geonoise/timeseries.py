"""Evenly sampled time series and their plain-text file format.

A file holds ``# key: value`` header lines followed by ``MJD value`` data
lines separated by a single space::

    # station: BSG01
    # component: up
    51544 -0.31415926535897931
    51545 1.2345678901234567

Numbers are written with 17 significant digits, enough to round-trip any
double exactly.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .exceptions import OrderingError, ParseError, TimeSeriesFormatError

__all__ = ["TimeSeries", "read_timeseries", "write_timeseries", "mjd_to_year", "atomic_write"]

MJD_J2000 = 51544.5
DAYS_PER_YEAR = 365.25
SPACING_TOL = 1e-6  # days


def mjd_to_year(mjd):
    """Decimal year with 365.25-day years counted from J2000."""
    return 2000.0 + (np.asarray(mjd, dtype=float) - MJD_J2000) / DAYS_PER_YEAR


@dataclass(eq=False)
class TimeSeries:
    """Observations at uniformly spaced epochs.

    Attributes
    ----------
    mjd : ndarray
        Epochs as Modified Julian Dates (days), strictly increasing.
    values : ndarray
        Observations, typically in mm.
    sampling_period : float
        Spacing of the epochs in days.
    metadata : dict
        Free-form header fields such as ``station`` and ``component``.
    """

    mjd: NDArray[np.float64]
    values: NDArray[np.float64]
    sampling_period: float | None = None
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.mjd = np.asarray(self.mjd, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.mjd.shape != self.values.shape or self.mjd.ndim != 1:
            raise TimeSeriesFormatError("epochs and values must be 1-D arrays of equal length")
        steps = np.diff(self.mjd)
        if np.any(steps <= 0):
            raise OrderingError("epochs must be strictly increasing")
        if self.sampling_period is None:
            self.sampling_period = float(steps[0]) if steps.size else 1.0
        if steps.size and np.max(np.abs(steps - self.sampling_period)) > SPACING_TOL:
            raise TimeSeriesFormatError(
                f"epochs are not uniformly spaced at {self.sampling_period} days"
            )

    def __len__(self):
        return self.values.size

    @property
    def years(self):
        return mjd_to_year(self.mjd)

    @property
    def dt_years(self):
        return self.sampling_period / DAYS_PER_YEAR

    @property
    def fs_per_year(self):
        """Sampling frequency in cycles per year."""
        return DAYS_PER_YEAR / self.sampling_period

    @classmethod
    def daily(cls, values, start_mjd=51544.0, **metadata):
        values = np.asarray(values, dtype=float)
        return cls(start_mjd + np.arange(values.size, dtype=float), values, 1.0,
                   {k: str(v) for k, v in metadata.items()})

    def with_values(self, values):
        return TimeSeries(self.mjd, values, self.sampling_period, dict(self.metadata))


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_header(items):
    return "".join(f"# {k}: {v}\n" for k, v in items)


def format_timeseries(ts: TimeSeries, header=()) -> str:
    lines = [format_header(header)]
    lines.extend(f"{t:.17g} {v:.17g}\n" for t, v in zip(ts.mjd, ts.values))
    return "".join(lines)


def write_timeseries(ts: TimeSeries, path, header=None):
    """Write ``ts`` atomically; ``header`` defaults to the series metadata."""
    header = list(ts.metadata.items()) if header is None else list(header)
    atomic_write(path, format_timeseries(ts, header))


def parse_header_line(line):
    body = line[1:].strip()
    key, sep, value = body.partition(":")
    if not sep:
        return None
    return key.strip(), value.strip()


def read_timeseries(path) -> TimeSeries:
    """Parse a time-series file.

    Raises
    ------
    ParseError
        On a malformed data line, with its line number.
    OrderingError
        If an epoch does not exceed the previous one.
    TimeSeriesFormatError
        If the spacing is not uniform to within 1e-6 day.
    """
    metadata = {}
    mjd, values, linenos = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                kv = parse_header_line(stripped)
                if kv is not None:
                    metadata[kv[0]] = kv[1]
                continue
            fields = stripped.split()
            if len(fields) != 2:
                raise ParseError(f"expected 'MJD value', got {stripped!r}", lineno)
            try:
                t, v = float(fields[0]), float(fields[1])
            except ValueError:
                raise ParseError(f"non-numeric field in {stripped!r}", lineno) from None
            if not (np.isfinite(t) and np.isfinite(v)):
                raise ParseError(f"non-finite number in {stripped!r}", lineno)
            if mjd and t <= mjd[-1]:
                raise OrderingError(f"epoch {t} does not follow {mjd[-1]}", lineno)
            mjd.append(t)
            values.append(v)
            linenos.append(lineno)
    if not mjd:
        raise TimeSeriesFormatError(f"{path}: no observations")
    period = metadata.get("sampling_period")
    period = float(period) if period else None
    try:
        return TimeSeries(np.array(mjd), np.array(values), period, metadata)
    except TimeSeriesFormatError as exc:
        steps = np.diff(mjd)
        ref = period if period is not None else steps[0]
        bad = np.flatnonzero(np.abs(steps - ref) > SPACING_TOL)
        lineno = linenos[bad[0] + 1] if bad.size else None
        raise TimeSeriesFormatError(str(exc), lineno) from None
