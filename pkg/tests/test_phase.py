import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from snstf.errors import DomainError, InsufficientReferenceError
from snstf.phase import (REFERENCE_PHASES, DriftProcessParams, ReferenceWindowCounts, differential_phase, drift_sample_path,
                         error_objective, estimate_phase, estimate_phase_closed_form, interference_prob,
                         minor_angle, normalize_counts, rate_std_per_ms, wrap_phase)

TABLE_COUNTS = (4.15, 16.60, 22.55, 6.25)


def test_normalized_counts_of_published_window():
    p = normalize_counts(ReferenceWindowCounts(TABLE_COUNTS))
    np.testing.assert_allclose(p, [0.168, 0.670, 0.910, 0.252], atol=5e-4)
    assert p.sum() == pytest.approx(2.0)


def test_published_window_estimate():
    est = estimate_phase(ReferenceWindowCounts(TABLE_COUNTS))
    assert math.degrees(est.delta_phi_T) == pytest.approx(209, abs=1e-9)
    assert est.rc == pytest.approx(0.00987, abs=5e-5)


def test_error_objective_vectorised_matches_scalar():
    p = normalize_counts(TABLE_COUNTS)
    grid = np.linspace(0, 2 * math.pi, 7)
    vec = error_objective(p, grid)
    assert vec.shape == (7,)
    for c, v in zip(grid, vec):
        assert error_objective(p, c) == pytest.approx(v)


@settings(max_examples=200)
@given(st.floats(min_value=0, max_value=2 * math.pi - 1e-9))
def test_noise_free_counts_recover_phase(phi):
    p = np.cos((np.array([0, 0.5, 1, 1.5]) * math.pi + phi) / 2) ** 2
    est = estimate_phase(ReferenceWindowCounts(tuple(100 * p)))
    assert minor_angle(est.delta_phi_T - phi) <= math.radians(0.5) + 1e-9
    assert est.rc < 1e-3
    assert minor_angle(estimate_phase_closed_form(2 * p / p.sum()) - phi) < 1e-9


@settings(max_examples=200)
@given(st.lists(st.floats(min_value=0.1, max_value=100), min_size=4, max_size=4))
def test_grid_and_closed_form_agree(counts):
    p = normalize_counts(counts)
    grid = estimate_phase(ReferenceWindowCounts(tuple(counts)), step=0.5).delta_phi_T
    exact = estimate_phase_closed_form(p)
    # the objective is a sinusoid in the offset, so the grid optimum lies
    # within half a step of the continuous one unless the sinusoid is flat
    amplitude = math.hypot(np.sum(p * np.cos(REFERENCE_PHASES)), np.sum(p * np.sin(REFERENCE_PHASES)))
    if amplitude > 1e-6:
        assert minor_angle(grid - exact) <= math.radians(0.25) + 1e-9


@given(st.lists(st.floats(min_value=0.1, max_value=100), min_size=4, max_size=4))
def test_rc_in_unit_interval(counts):
    est = estimate_phase(ReferenceWindowCounts(tuple(counts)))
    assert 0 <= est.rc <= 1
    assert 0 <= est.delta_phi_T < 2 * math.pi


def test_tie_breaks_to_smallest_angle():
    # uniform counts: the objective is constant, rc = 1 and the first grid angle wins
    est = estimate_phase(ReferenceWindowCounts((5, 5, 5, 5)))
    assert est.delta_phi_T == 0.0 and est.rc == 1.0


def test_two_detector_mode():
    phi = math.radians(70)
    p1 = np.cos((np.array([0, 0.5, 1, 1.5]) * math.pi + phi) / 2) ** 2
    w = ReferenceWindowCounts(tuple(50 * p1), counts_port2=tuple(50 * (1 - p1)))
    est = estimate_phase(w, two_detector=True)
    assert math.degrees(est.delta_phi_T) == pytest.approx(70, abs=0.5)
    with pytest.raises(DomainError):
        estimate_phase(ReferenceWindowCounts(TABLE_COUNTS), two_detector=True)


def test_empty_window_rejected():
    with pytest.raises(InsufficientReferenceError):
        estimate_phase(ReferenceWindowCounts((0, 0, 0, 0)))
    with pytest.raises(DomainError):
        ReferenceWindowCounts((1, 2, 3))
    with pytest.raises(DomainError):
        ReferenceWindowCounts((1, -2, 3, 4))


def test_interference_ports_complement():
    x = np.linspace(0, 6, 13)
    np.testing.assert_allclose(interference_prob(x, 1) + interference_prob(x, 2), 1.0)
    assert interference_prob(0.0) == 1.0
    with pytest.raises(DomainError):
        interference_prob(0.0, port=3)


@given(st.floats(min_value=-100, max_value=100, allow_nan=False))
def test_wrap_and_minor_angle(x):
    w = wrap_phase(x)
    assert 0 <= w < 2 * math.pi
    assert 0 <= minor_angle(x) <= math.pi
    assert math.cos(w) == pytest.approx(math.cos(x), abs=1e-9)


def test_differential_phase_wraps():
    assert differential_phase(0.5, 1.0, 0.25) == pytest.approx(2 * math.pi - 0.25)


def test_drift_path_shape_and_seed():
    params = DriftProcessParams(sigma_rate=7.4, step_duration=1e-5)
    a = drift_sample_path(params, 100, seed=3, initial_phase=1.0)
    b = drift_sample_path(params, 100, seed=3, initial_phase=1.0)
    assert a.shape == (101,) and a[0] == 1.0
    np.testing.assert_array_equal(a, b)


def test_drift_rate_std_matches_configuration():
    params = DriftProcessParams(sigma_rate=7.4, step_duration=1e-5)
    path = drift_sample_path(params, 200_000, seed=11)
    assert rate_std_per_ms(path, params.step_duration) == pytest.approx(7.4, rel=0.01)


def test_drift_offset_rate():
    params = DriftProcessParams(sigma_rate=0.0, step_duration=1e-5, delta_nu=10.0)
    path = drift_sample_path(params, 1000, seed=0)
    assert path[-1] == pytest.approx(2 * math.pi * 10.0 * 1e-2)


def test_drift_params_validation():
    with pytest.raises(DomainError):
        DriftProcessParams(sigma_rate=-1)
    with pytest.raises(DomainError):
        drift_sample_path(DriftProcessParams(), 0)
