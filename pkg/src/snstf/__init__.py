"""Finite-key analysis and simulation workbench for sending-or-not-sending twin-field QKD."""

__version__ = "0.1.0"

from .capacity import plob_bound, tgw_bound
from .decoy import (IntensityProbabilityConfig, KeyRateReport, SecurityBudget, binary_entropy, bound_interval,
                    chernoff_delta, key_rate)
from .errors import SnstfError
from .ledger import CountsLedger, load_golden, load_ledger, save_ledger
from .phase import ReferenceWindowCounts, estimate_phase, normalize_counts
from .sifting import SliceConfig, build_ledger, slice_accept
from .simulator import ChannelModel, FrameSchedule, distance_sweep, expected_ledger, monte_carlo_run

__all__ = [
    "ChannelModel", "CountsLedger", "FrameSchedule", "IntensityProbabilityConfig", "KeyRateReport",
    "ReferenceWindowCounts", "SecurityBudget", "SliceConfig", "SnstfError",
    "binary_entropy", "bound_interval", "build_ledger", "chernoff_delta", "distance_sweep", "estimate_phase",
    "expected_ledger", "key_rate", "load_golden", "load_ledger", "monte_carlo_run", "normalize_counts",
    "plob_bound", "save_ledger", "slice_accept", "tgw_bound",
]
