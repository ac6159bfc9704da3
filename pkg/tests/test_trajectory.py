import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geonoise.exceptions import CollinearityError, SpecificationError, UnderdeterminedError
from geonoise.trajectory import (
    ANNUAL,
    Offset,
    Periodic,
    Polynomial,
    TrajectoryModelSpec,
    amp_phase,
    build_design_matrix,
    standard_model,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_intercept_and_trend():
    dm = build_design_matrix(TrajectoryModelSpec((Polynomial(1),)), [0.0, 1.0, 2.0])
    np.testing.assert_array_equal(dm.A, [[1, 0], [1, 1], [1, 2]])
    assert dm.column_labels == ["intercept", "trend"]


def test_annual_row_at_reference():
    dm = build_design_matrix(TrajectoryModelSpec((Periodic(2 * math.pi),)), [0.0, 0.25])
    np.testing.assert_array_equal(dm.A[0], [1.0, 0.0])
    np.testing.assert_allclose(dm.A[1], [0.0, 1.0], atol=1e-15)


def test_offset_closed_on_the_left():
    spec = TrajectoryModelSpec((Polynomial(0), Offset(1.0)))
    dm = build_design_matrix(spec, [0.5, 1.0, 1.5])
    np.testing.assert_array_equal(dm.A[:, 1], [0, 1, 1])


def test_reference_epoch_and_higher_degree():
    spec = TrajectoryModelSpec((Polynomial(2),), reference_epoch=10.0)
    dm = build_design_matrix(spec, [9.0, 10.0, 12.0])
    np.testing.assert_array_equal(dm.A, [[1, -1, 1], [1, 0, 0], [1, 2, 4]])
    assert dm.column_labels == ["intercept", "trend", "poly2"]


def test_periodic_contributes_two_columns():
    spec = standard_model(periods=(1.0, 0.5), offsets=(2.5,))
    t = np.linspace(0, 5, 40)
    assert build_design_matrix(spec, t).shape == (40, 7)
    assert spec.n_columns == 7


def test_duplicate_terms_rejected():
    with pytest.raises(SpecificationError):
        TrajectoryModelSpec((Periodic(ANNUAL), Periodic(ANNUAL)))
    with pytest.raises(SpecificationError):
        TrajectoryModelSpec((Polynomial(1), Polynomial(0)))
    with pytest.raises(SpecificationError):
        TrajectoryModelSpec((Offset(1.0), Offset(1.0)))


def test_rank_deficiency_names_columns():
    # an offset before the first epoch duplicates the intercept
    spec = TrajectoryModelSpec((Polynomial(1), Offset(-1.0)))
    with pytest.raises(CollinearityError) as info:
        build_design_matrix(spec, np.arange(10.0))
    assert set(info.value.columns) == {"intercept", "offset[-1]"}


def test_underdetermined_and_ordering():
    with pytest.raises(UnderdeterminedError):
        build_design_matrix(standard_model(), [0.0, 1.0, 2.0])
    with pytest.raises(SpecificationError):
        build_design_matrix(TrajectoryModelSpec((Polynomial(1),)), [0.0, 2.0, 1.0])


def test_bitwise_reproducible():
    spec = standard_model(reference_epoch=2000.3, offsets=(2003.1,))
    t = 2000 + np.arange(2000) / 365.25
    a = build_design_matrix(spec, t).A
    b = build_design_matrix(spec, t.copy()).A
    assert a.tobytes() == b.tobytes()


def test_amp_phase_examples():
    assert amp_phase(1.0, 0.0) == (1.0, 0.0)
    b, psi = amp_phase(0.0, 1.0)
    assert b == 1.0 and psi == pytest.approx(math.pi / 2, abs=1e-15)
    b, psi = amp_phase(3.0, 4.0)
    assert b == 5.0 and psi == pytest.approx(0.9272952180016122, abs=1e-15)
    assert amp_phase(0.0, 0.0) == (0.0, 0.0)
    assert amp_phase(-1.0, -0.0)[1] == pytest.approx(math.pi)


@given(finite, finite, st.floats(0.1, 20.0), st.floats(-100, 100))
def test_amp_phase_reconstruction(c, s, omega, t):
    b, psi = amp_phase(c, s)
    assert -math.pi < psi <= math.pi
    assert b * math.cos(omega * t - psi) == pytest.approx(c * math.cos(omega * t) + s * math.sin(omega * t), abs=1e-12 * max(1.0, b))
