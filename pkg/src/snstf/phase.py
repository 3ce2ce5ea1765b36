"""Twin-field interference, phase drift and reference-pulse phase estimation.

Alice sends four reference pulses with phases 0, pi/2, pi and 3pi/2 while
Bob keeps a fixed phase.  The counts seen at one port of Charlie's beam
splitter trace out ``cos^2((dtheta_i + dphi_T) / 2)``, so a least-squares
scan over ``dphi_T`` recovers the fiber phase offset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientReferenceError

REFERENCE_PHASES = np.array([0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi])
TWO_PI = 2 * math.pi


def wrap_phase(phi):
    """Map angles onto [0, 2pi)."""
    out = np.mod(phi, TWO_PI)
    # np.mod can return exactly 2pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def minor_angle(phi):
    """Magnitude of the shortest rotation equivalent to ``phi``, in [0, pi]."""
    w = np.mod(phi, TWO_PI)
    out = np.minimum(w, TWO_PI - w)
    return float(out) if np.ndim(out) == 0 else out


def interference_prob(phi, port: int = 1):
    """Normalised intensity at a beam-splitter port for relative phase ``phi``.

    Port 1 is the constructive port, ``cos^2(phi/2)``; port 2 is its complement.
    """
    p1 = np.cos(np.asarray(phi, dtype=float) / 2) ** 2
    if port == 1:
        out = p1
    elif port == 2:
        out = 1.0 - p1
    else:
        raise DomainError(f"port must be 1 or 2, got {port}")
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ReferenceWindowCounts:
    """Counts for Alice's four reference phases during one estimation window.

    Counts may be non-integer (dead-time corrected averages).  ``counts_port2``
    is optional and only used by the two-detector estimator.
    """

    counts: tuple
    window_duration: float = 10e-6
    detector_id: int = 1
    window_index: int = 0
    counts_port2: tuple | None = None

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=float)
        if c.shape != (4,):
            raise DomainError(f"need four reference counts, got {self.counts!r}")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise DomainError(f"reference counts must be finite and non-negative, got {self.counts!r}")
        if self.counts_port2 is not None:
            c2 = np.asarray(self.counts_port2, dtype=float)
            if c2.shape != (4,) or np.any(c2 < 0):
                raise DomainError(f"bad port-2 reference counts {self.counts_port2!r}")


@dataclass(frozen=True)
class PhaseEstimate:
    delta_phi_T: float
    rc: float
    residual: float
    window_index: int = 0
    timestamp: float = 0.0


@dataclass(frozen=True)
class DriftProcessParams:
    """Gaussian drift-rate random walk.

    ``sigma_rate`` is in rad/ms.  The deterministic rate ``2 pi * delta_nu``
    comes from a laser frequency offset ``delta_nu`` in Hz.
    """

    sigma_rate: float = 7.4
    step_duration: float = 10e-6
    delta_nu: float = 0.0
    fiber_length_km: float = 0.0

    def __post_init__(self):
        if self.sigma_rate < 0:
            raise DomainError(f"sigma_rate must be non-negative, got {self.sigma_rate}")
        if not self.step_duration > 0:
            raise DomainError(f"step_duration must be positive, got {self.step_duration}")

    @property
    def offset_rate(self) -> float:
        """Deterministic drift rate in rad/s."""
        return TWO_PI * self.delta_nu


def normalize_counts(w: ReferenceWindowCounts | tuple | list | np.ndarray) -> np.ndarray:
    """Probabilities ``p_i = 2 N_i / sum(N)``; the four phases pair up to sum to 2."""
    counts = np.asarray(w.counts if isinstance(w, ReferenceWindowCounts) else w, dtype=float)
    total = counts.sum()
    if not total > 0:
        raise InsufficientReferenceError("reference window has no detections")
    return 2.0 * counts / total


def error_objective(p, candidate):
    """Sum of squared deviations of ``p`` from the model at offset ``candidate``.

    ``candidate`` may be an array; the result then has the same shape.
    """
    p = np.asarray(p, dtype=float)
    cand = np.asarray(candidate, dtype=float)
    model = np.cos((REFERENCE_PHASES + cand[..., None]) / 2) ** 2
    out = ((p - model) ** 2).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def _two_port_objective(p1, p2, cand):
    model = np.cos((REFERENCE_PHASES + cand[..., None]) / 2) ** 2
    return ((p1 - model) ** 2).sum(axis=-1) + ((p2 - (1 - model)) ** 2).sum(axis=-1)


def estimate_phase(w: ReferenceWindowCounts, step: float = 1.0, two_detector: bool = False) -> PhaseEstimate:
    """Grid search for the fiber phase offset.

    The grid runs over ``[0, 360)`` degrees in ``step`` increments.  Values
    that differ only by round-off are ties, won by the smallest angle.
    ``rc`` is the ratio of the smallest to the largest objective value on the
    grid (1 when the objective is flat).

    In two-detector mode port-2 counts are normalised the same way and
    compared with ``sin^2`` of the same argument.
    """
    if not 0 < step <= 180:
        raise DomainError(f"grid step must lie in (0, 180] degrees, got {step}")
    n = int(round(360.0 / step))
    grid = np.radians(np.arange(n) * step)
    p = normalize_counts(w)
    if two_detector:
        if w.counts_port2 is None:
            raise DomainError("two-detector estimation needs counts_port2")
        err = _two_port_objective(p, normalize_counts(w.counts_port2), grid)
    else:
        err = error_objective(p, grid)
    lo, hi = float(err.min()), float(err.max())
    # values equal up to round-off count as ties; the smallest angle wins
    i = int(np.argmax(err <= lo + 1e-12 * max(hi, 1.0)))
    lo = float(err[i])
    flat = hi - lo <= 1e-12 * max(hi, 1.0)
    rc = 1.0 if flat else lo / hi
    return PhaseEstimate(
        delta_phi_T=float(grid[i]), rc=rc, residual=lo,
        window_index=w.window_index, timestamp=w.window_index * w.window_duration,
    )


def estimate_phase_closed_form(p) -> float:
    """Continuous least-squares optimum of :func:`error_objective`.

    The model equals ``(1 + cos(dtheta + c)) / 2``, so minimising the squared
    error over ``c`` picks the phase of the first Fourier component of ``p``.
    """
    p = np.asarray(p, dtype=float)
    a = np.sum(p * np.cos(REFERENCE_PHASES))
    b = np.sum(p * np.sin(REFERENCE_PHASES))
    return wrap_phase(math.atan2(-b, a))


def drift_sample_path(params: DriftProcessParams, n_steps: int, seed=None, initial_phase: float = 0.0,
                      rng: np.random.Generator | None = None) -> np.ndarray:
    """Unwrapped phase trajectory of length ``n_steps + 1``.

    Each step adds ``r * step_duration`` with ``r ~ Normal(2 pi delta_nu,
    sigma_rate)``.  Wrap with :func:`wrap_phase` when reading values.
    """
    if n_steps < 1:
        raise DomainError(f"n_steps must be at least 1, got {n_steps}")
    if rng is None:
        rng = np.random.default_rng(seed)
    sigma = params.sigma_rate * 1e3  # rad/ms -> rad/s
    rates = params.offset_rate + sigma * rng.standard_normal(n_steps) if sigma > 0 else np.full(n_steps, params.offset_rate)
    path = np.empty(n_steps + 1)
    path[0] = initial_phase
    np.cumsum(rates * params.step_duration, out=path[1:])
    path[1:] += initial_phase
    return path


def rate_std_per_ms(path: np.ndarray, step_duration: float) -> float:
    """Standard deviation of the drift rate (rad/ms) from a sampled path."""
    rates = np.diff(path) / step_duration
    return float(np.std(rates, ddof=1)) * 1e-3


def differential_phase(theta_a, theta_b, delta_phi_T):
    """Relative phase ``theta_A - theta_B + dphi_T`` wrapped to [0, 2pi)."""
    return wrap_phase(np.asarray(theta_a) - np.asarray(theta_b) + delta_phi_T)
