"""Repeaterless capacity bounds for a pure-loss channel of transmittance ``eta``."""
import math

import numpy as np

from .errors import DomainError


def _check(eta):
    arr = np.asarray(eta, dtype=float)
    if np.any((arr < 0) | (arr >= 1)) or np.any(np.isnan(arr)):
        raise DomainError(f"transmittance must lie in [0, 1), got {eta}")
    return arr


def plob_bound(eta):
    """Secret-key capacity ``-log2(1 - eta)`` in bits per channel use."""
    arr = _check(eta)
    out = -np.log1p(-arr) / math.log(2)
    return float(out) if out.ndim == 0 else out


def tgw_bound(eta):
    """Earlier upper bound ``log2((1 + eta) / (1 - eta))``; always above PLOB."""
    arr = _check(eta)
    out = (np.log1p(arr) - np.log1p(-arr)) / math.log(2)
    return float(out) if out.ndim == 0 else out


def fiber_transmittance(length_km, loss_db_per_km: float):
    """Power transmittance ``10**(-alpha L / 10)`` of a fiber span."""
    length = np.asarray(length_km, dtype=float)
    if np.any(length < 0):
        raise DomainError(f"fiber length must be non-negative, got {length_km}")
    out = 10.0 ** (-loss_db_per_km * length / 10.0)
    return float(out) if out.ndim == 0 else out
