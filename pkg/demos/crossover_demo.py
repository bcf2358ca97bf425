"""Where distilling stops paying off.

At each raw fidelity the cheapest way to run one lattice-surgery operation
is found by comparing raw consumption with every protocol at its own
minimal distance. Above the crossover fidelity, raw pairs win everywhere.
"""

from __future__ import annotations

import numpy as np

from seamplan.cost_model import crossover_fidelity, evaluate_point, time_crossover_fidelity
from seamplan.distillation import primary_protocols

protocols = primary_protocols()
grid = np.linspace(0.90, 0.99, 150)

print("target   pair crossover  time crossover  beaten protocol")
for target in (1e-3, 1e-6, 1e-9, 1e-12):
    c = crossover_fidelity(target, protocols, grid)
    t = time_crossover_fidelity(target, protocols, grid)
    print(f"{target:6.0e}   {c.fidelity:14.4f}  {t.fidelity:14.4f}  {c.last_overtaken}")

print()
print("one point in detail, F0 = 0.9864, target 1e-3:")
for row in evaluate_point(0.9864, 1e-3, protocols):
    mark = "  <- cheapest" if row.optimal else ""
    print(f"  {row.protocol:14s} d = {row.distance}  pairs/cycle = {row.pairs_per_cycle:8.1f}{mark}")
