"""How the code distance responds to the Bell-pair error at the seam.

The bulk of each patch sees the local gate error; the seam between two
modules sees the Bell-pair error. The seam tolerates roughly ten times
more noise than the bulk, but the required distance still blows up as the
Bell error approaches its own threshold.
"""

from __future__ import annotations

from seamplan import NoisePoint, effective_bell_threshold, logical_error_rate, min_distance

P_LOCAL = 1e-3

print(f"seam threshold at p_local = {P_LOCAL:g}: {effective_bell_threshold(P_LOCAL):.4f}")
print()
print("fidelity   d(1e-3)  d(1e-6)  d(1e-9)  d(1e-12)")
for f in (0.99, 0.98, 0.96, 0.94, 0.92, 0.90, 0.88, 0.87):
    ds = []
    for target in (1e-3, 1e-6, 1e-9, 1e-12):
        res = min_distance(NoisePoint(1 - f, P_LOCAL), target)
        ds.append("inf" if res.distance is None else f"{res.distance}{'*' if res.extrapolated else ''}")
    print(f"{f:8.2f}   " + "  ".join(f"{d:>7}" for d in ds))
print("(* beyond the calibrated range of the fit)")

print()
print("logical error per round at F0 = 0.95 as the distance grows:")
noise = NoisePoint.from_fidelity(0.95, P_LOCAL)
for d in (3, 5, 7, 9, 11, 13):
    print(f"  d = {d:2d}: p_L = {logical_error_rate(d, noise):.3e}")
