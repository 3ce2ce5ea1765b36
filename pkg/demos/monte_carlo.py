"""Pulse-level simulation checked against the analytic expectation.

Simulates 2e6 pulse pairs with phase tracking, folds the events into a
ledger under a few post-selection settings, and compares the detection
counts of each category with the expected-value ledger.

    python3 demos/monte_carlo.py
"""
import math

from snstf import IntensityProbabilityConfig, SecurityBudget, key_rate
from snstf.sifting import SliceConfig, build_ledger
from snstf.simulator import ChannelModel, FrameSchedule, expected_ledger, monte_carlo_run, single_photon_truth

# a short run needs plenty of X-basis pairs to populate the phase slices
cfg = IntensityProbabilityConfig(mu1=0.1, mu2=0.2, muz=0.425, pX=0.5, p0=0.2, p1=0.6, p2=0.2, pz_send=0.2)
ch = ChannelModel(eta_A=0.1, eta_B=0.1, dark_prob=1e-6, misalignment=0.02)
run = monte_carlo_run(cfg, cfg, ch, FrameSchedule(), n_frames=20_000, seed=2024)
print(f"{run.n_pulses:.0e} pulse pairs, {len(run.events)} single-click events, {len(run.estimates)} windows")

# detection counts per category, against the phase-averaged expectation
sl = SliceConfig.from_degrees(10, r_gate=0.85)
led = run.ledger(sl)
exp = expected_ledger(cfg, cfg, ch, sl, run.n_pulses)
print(f"\n{'category':<8} {'sent':>8} {'detected':>9} {'expected':>10} {'z':>6}")
for code in sorted(led.detected):
    n = led.sent[code]
    rate = exp.detected[code] / exp.sent[code]
    z = (led.detected[code] - n * rate) / math.sqrt(n * rate * (1 - rate))
    print(f"{code:<8} {n:8d} {led.detected[code]:9d} {n * rate:10.1f} {z:6.2f}")

# post-selection: tighter rc and narrower slices trade counts for a lower X error
print(f"\n{'Ds':>4} {'rc_max':>6} {'XX11 in slice':>13} {'QBER X11':>9}")
for ds, rc_max in ((5, 1.0), (10, 1.0), (20, 1.0), (10, 0.1), (10, 0.02)):
    cell = build_ledger(run.events, run.sent, run.estimates, SliceConfig.from_degrees(ds, rc_max=rc_max))
    print(f"{ds:4d} {rc_max:6.2f} {sum(cell.slice_detected):13d} {cell.qber_x11:9.2%}")

s1, e1 = single_photon_truth(ch, sl.Ds, sl.r_gate)
print(f"\nmodel truth: s1 = {s1:.3e}, e1ph = {e1:.3f}")
# 2e6 pulses are far too few for a 1e-10 failure probability.  With only a
# handful of slice errors the symmetric Chernoff deviation exceeds 1 and the
# phase-error bound saturates; the lower-tail deviation stays finite.
for budget in (SecurityBudget(), SecurityBudget(epsilon=1e-3, upper_deviation="lower_tail")):
    rep = key_rate(led, cfg, budget, slice_halfwidth=sl.Ds)
    print(f"epsilon {budget.epsilon:g} ({budget.upper_deviation}): s1 >= {rep.s1_lower:.3e}, "
          f"e1ph <= {rep.e1ph_upper:.3f}")
