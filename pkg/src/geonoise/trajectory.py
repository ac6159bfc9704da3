"""Linear trajectory models: polynomial, periodic and offset basis functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exceptions import CollinearityError, SpecificationError, UnderdeterminedError

__all__ = [
    "Polynomial",
    "Periodic",
    "Offset",
    "TrajectoryModelSpec",
    "DesignMatrix",
    "build_design_matrix",
    "amp_phase",
    "standard_model",
    "ANNUAL",
    "SEMIANNUAL",
]

ANNUAL = 2.0 * math.pi
SEMIANNUAL = 4.0 * math.pi


@dataclass(frozen=True)
class Polynomial:
    """Columns ``(t - t_ref)**0 ... (t - t_ref)**degree``."""

    degree: int = 1

    def __post_init__(self):
        if self.degree < 0:
            raise SpecificationError(f"polynomial degree must be >= 0, got {self.degree}")

    def columns(self, dt, t):
        return [dt**p for p in range(self.degree + 1)]

    def labels(self):
        names = {0: "intercept", 1: "trend"}
        return [names.get(p, f"poly{p}") for p in range(self.degree + 1)]


@dataclass(frozen=True)
class Periodic:
    """Cosine and sine columns at angular frequency ``omega`` (rad per time unit)."""

    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise SpecificationError(f"angular frequency must be positive, got {self.omega}")

    @property
    def period(self):
        return 2.0 * math.pi / self.omega

    def columns(self, dt, t):
        return [np.cos(self.omega * dt), np.sin(self.omega * dt)]

    def labels(self):
        tag = f"{self.period:.6g}"
        return [f"cos[{tag}]", f"sin[{tag}]"]


@dataclass(frozen=True)
class Offset:
    """Heaviside step: 0 before ``epoch``, 1 from ``epoch`` onward."""

    epoch: float

    def columns(self, dt, t):
        return [(t >= self.epoch).astype(float)]

    def labels(self):
        return [f"offset[{self.epoch:.10g}]"]


BasisTerm = Polynomial | Periodic | Offset


@dataclass(frozen=True)
class TrajectoryModelSpec:
    """Ordered basis terms and the reference epoch subtracted from the time axis.

    Offsets are placed on the absolute time axis; polynomial and periodic
    terms are evaluated at ``t - reference_epoch``.
    """

    terms: tuple[BasisTerm, ...]
    reference_epoch: float = 0.0

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        polys = [t for t in terms if isinstance(t, Polynomial)]
        if len(polys) > 1:
            raise SpecificationError("at most one polynomial term is allowed")
        omegas = [t.omega for t in terms if isinstance(t, Periodic)]
        if len(set(omegas)) != len(omegas):
            raise SpecificationError("periodic terms must have distinct frequencies")
        steps = [t.epoch for t in terms if isinstance(t, Offset)]
        if len(set(steps)) != len(steps):
            raise SpecificationError("offset terms must have distinct epochs")
        for t in terms:
            if not isinstance(t, (Polynomial, Periodic, Offset)):
                raise SpecificationError(f"unknown basis term {t!r}")

    @property
    def labels(self):
        return [label for term in self.terms for label in term.labels()]

    @property
    def n_columns(self):
        return len(self.labels)

    def with_reference(self, epoch):
        return TrajectoryModelSpec(self.terms, float(epoch))


def standard_model(reference_epoch=0.0, degree=1, periods=(1.0, 0.5), offsets=()):
    """Polynomial trend plus seasonal terms with periods given in time units."""
    terms = [Polynomial(degree)]
    terms += [Periodic(2.0 * math.pi / p) for p in periods]
    terms += [Offset(e) for e in offsets]
    return TrajectoryModelSpec(tuple(terms), reference_epoch)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Design matrix ``A`` and a label for every column."""

    A: NDArray[np.float64]
    column_labels: list[str] = field(default_factory=list)

    def __array__(self, dtype=None, copy=None):
        return self.A if dtype is None else self.A.astype(dtype)

    @property
    def shape(self):
        return self.A.shape


def _dependent_columns(A, labels):
    """Labels of the columns that take part in a linear dependency."""
    scale = np.linalg.norm(A, axis=0)
    if np.any(scale == 0):
        return [labels[i] for i in np.flatnonzero(scale == 0)]
    _, s, vt = np.linalg.svd(A / scale, full_matrices=False)
    null = vt[s < s[0] * 1e-10]
    involved = np.flatnonzero(np.any(np.abs(null) > 1e-8, axis=0))
    return [labels[i] for i in involved]


def build_design_matrix(spec: TrajectoryModelSpec, epochs: ArrayLike) -> DesignMatrix:
    """Evaluate every basis function of ``spec`` at ``epochs``.

    Raises
    ------
    SpecificationError
        If epochs are not strictly increasing.
    UnderdeterminedError
        If there are fewer epochs than columns.
    CollinearityError
        If the columns are linearly dependent on these epochs.

    Examples
    --------
    >>> build_design_matrix(standard_model(periods=()), [0.0, 1.0, 2.0]).A
    array([[1., 0.],
           [1., 1.],
           [1., 2.]])
    """
    t = np.asarray(epochs, dtype=float)
    if t.ndim != 1:
        raise SpecificationError("epochs must be one-dimensional")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise SpecificationError("epochs must be strictly increasing")
    labels = spec.labels
    if t.size < len(labels):
        raise UnderdeterminedError(f"{t.size} epochs cannot determine {len(labels)} parameters")
    dt = t - spec.reference_epoch
    cols = [c for term in spec.terms for c in term.columns(dt, t)]
    A = np.column_stack(cols) if cols else np.empty((t.size, 0))
    if A.shape[1] and np.linalg.matrix_rank(A / np.maximum(np.linalg.norm(A, axis=0), 1e-300)) < A.shape[1]:
        bad = _dependent_columns(A, labels)
        raise CollinearityError(f"design matrix is rank deficient in columns {bad}", bad)
    return DesignMatrix(A, labels)


def amp_phase(c, s):
    """Amplitude and phase lag of ``c cos(wt) + s sin(wt) = b cos(wt - psi)``.

    The phase is returned in ``(-pi, pi]``.

    Examples
    --------
    >>> amp_phase(0.0, 1.0)
    (1.0, 1.5707963267948966)
    """
    b = math.hypot(c, s)
    psi = math.atan2(s, c)
    if psi == -math.pi:
        psi = math.pi
    return b, psi + 0.0
