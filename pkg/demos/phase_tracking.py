"""Estimating the fiber phase from four reference pulses.

First the published reference window, then a drifting fiber simulated
pulse by pulse, comparing each window's estimate with the true phase.

    python3 demos/phase_tracking.py
"""
import math

import numpy as np

from snstf.phase import ReferenceWindowCounts, error_objective, estimate_phase, normalize_counts
from snstf.simulator import ChannelModel, FrameSchedule, monte_carlo_run, second_test_config

# 1. One window of reference counts (detector 1, 10 us)
window = ReferenceWindowCounts((4.15, 16.60, 22.55, 6.25))
est = estimate_phase(window)
p = normalize_counts(window)
print("normalized probabilities:", np.round(p, 3))
print(f"estimated phase: {math.degrees(est.delta_phi_T):.0f} deg, rc = {est.rc:.4f}")

grid = np.radians(np.arange(0, 360, 30))
print("objective on a coarse grid:")
for deg, err in zip(np.degrees(grid), error_objective(p, grid)):
    print(f"  {deg:5.0f} deg  {err:.4f}  " + "#" * int(40 * err / 2))

# 2. Tracking a drifting fiber: 1000 windows of two 5 us frames each
cfg = second_test_config().cfg
ch = ChannelModel(eta_A=0.035, eta_B=0.035)  # about 100 km of fiber
run = monte_carlo_run(cfg, cfg, ch, FrameSchedule(), n_frames=2000, seed=11)
est_phase = np.array([e.delta_phi_T for e in run.estimates])
rc = np.array([e.rc for e in run.estimates])
err = np.degrees(np.abs(np.angle(np.exp(1j * (est_phase - run.true_phase)))))

print()
print(f"windows: {len(err)}, mean |error| {err.mean():.1f} deg, median rc {np.median(rc):.3f}")
for cut in (0.05, 0.1, 0.3, 1.0):
    keep = rc <= cut
    print(f"  rc <= {cut:<4}: keeps {keep.mean():6.1%} of windows, mean |error| {err[keep].mean():5.1f} deg")
