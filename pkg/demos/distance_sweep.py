"""Key rate against distance for the second-run settings.

Prints the curve next to the PLOB and TGW repeaterless bounds, then finds
where the protocol first beats PLOB and how far a longer run could reach.

    python3 demos/distance_sweep.py [out.csv]
"""
import sys

from snstf.cli import SWEEP_COLUMNS, write_csv
from snstf.simulator import DEFAULT_ATTENUATION, distance_sweep, locate_distance, second_test_config

base = second_test_config()  # 7.2e11 pulses, dark 1e-7, misalignment 2%
rows = distance_sweep(base, DEFAULT_ATTENUATION, range(0, 401, 25))

print(f"{'km':>5} {'R':>10} {'PLOB':>10} {'TGW':>10}  R/PLOB")
for r in rows:
    print(f"{r['distance_km']:5.0f} {r['R']:10.3e} {r['plob']:10.3e} {r['tgw']:10.3e}  {r['R'] / r['plob']:.2f}")

cross = locate_distance(base, DEFAULT_ATTENUATION, 200, 300, column="plob")
print(f"\nR exceeds the PLOB bound beyond {cross:.1f} km")

long_run = second_test_config(n_total=1e14, dark_prob=1e-11)
reach = locate_distance(long_run, DEFAULT_ATTENUATION, 400, 900)
print(f"with 1e14 pulses and 1e-11 dark counts the rate stays positive to {reach:.0f} km")

if len(sys.argv) > 1:
    with open(sys.argv[1], "w", newline="") as fh:
        write_csv(rows, SWEEP_COLUMNS, fh)
    print(f"curve written to {sys.argv[1]}")
