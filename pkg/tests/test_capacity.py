import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from snstf.capacity import fiber_transmittance, plob_bound, tgw_bound
from snstf.errors import DomainError

# mpmath, 40 digits: -log2(1 - 5.99e-7) and log2(1.3 / 0.7)
PLOB_599E_7 = 8.6417458831280412e-7
TGW_03 = 0.89308479608348805


def test_plob_matches_high_precision_value():
    assert plob_bound(5.99e-7) == pytest.approx(PLOB_599E_7, rel=1e-12)


def test_tgw_matches_high_precision_value():
    assert tgw_bound(0.3) == pytest.approx(TGW_03, rel=1e-13)


def test_zero_transmittance_has_zero_capacity():
    assert plob_bound(0.0) == 0.0
    assert tgw_bound(0.0) == 0.0


@pytest.mark.parametrize("eta", [-1e-3, 1.0, 1.5, float("nan")])
def test_invalid_transmittance_rejected(eta):
    with pytest.raises(DomainError):
        plob_bound(eta)
    with pytest.raises(DomainError):
        tgw_bound(eta)


def test_array_input_returns_array():
    eta = np.array([1e-6, 1e-3, 0.5])
    out = plob_bound(eta)
    assert out.shape == (3,)
    assert out[2] == pytest.approx(1.0)


@given(st.floats(min_value=1e-12, max_value=0.999))
def test_tgw_exceeds_plob(eta):
    assert tgw_bound(eta) > plob_bound(eta) > 0


@given(st.floats(min_value=1e-12, max_value=1e-4))
def test_small_eta_limits(eta):
    # both bounds are linear in eta to first order: 1.44 eta and 2.89 eta
    assert plob_bound(eta) == pytest.approx(eta / math.log(2), rel=1e-3)
    assert tgw_bound(eta) == pytest.approx(2 * eta / math.log(2), rel=1e-3)


def test_fiber_transmittance():
    assert fiber_transmittance(0, 0.2) == 1.0
    assert fiber_transmittance(50, 0.2) == pytest.approx(0.1)
    with pytest.raises(DomainError):
        fiber_transmittance(-1, 0.2)
