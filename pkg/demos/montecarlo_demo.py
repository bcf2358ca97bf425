"""Checking the averages against a stochastic link.

Pairs arrive as a Poisson stream, age in memory, are dropped once too old,
and distillation succeeds at random. The simulation reports how far actual
consumption strays from the analytic per-cycle cost.
"""

from __future__ import annotations

import numpy as np

from seamplan import LinkParams, SimConfig, cost_bands, simulate_collection, simulate_operation
from seamplan.temporal import collection_time_stats

times = simulate_collection(9, 1000.0, runs=20000, seed=1)
stats = collection_time_stats(9, 1000.0)
print(f"collecting 9 pairs at 1 kHz: mean {times.mean() * 1e3:.3f} ms (expected {stats.mean * 1e3:.3f})")
print(f"  99th percentile {np.quantile(times, 0.99) * 1e3:.3f} ms, Gaussian estimate {stats.t99 * 1e3:.3f} ms")

print()
for lam in (1e7, 1e3):
    res = simulate_operation(SimConfig(link=LinkParams(lam=lam), f0=0.97, runs=500, seed=2))
    print(f"raw pairs at {lam:g}/s: {res.analytical.regime.kind.value}, d = {res.distance}, "
          f"mean window fidelity {res.window_fidelity.mean():.5f}")

print()
print("distilled cost spread over 200 runs per point:")
for row in cost_bands([0.93, 0.96], ["double-select", "expedient"], runs=200, seed=3):
    print(f"  F0 {row.fidelity:.2f} {row.protocol:14s} analytic {row.analytical:8.1f}  "
          f"simulated {row.mean:8.1f} +/- {row.std:6.1f}")
