"""How many logical qubits fit in a module of 3000 physical qubits.

Distilling lowers the code distance, which shrinks every patch, but the
extra memory qubits holding pairs for distillation eat into the budget.
"""

from __future__ import annotations

import numpy as np

from seamplan import LinkParams, best_strategy_for_capacity
from seamplan.budget import strategy_reports

link = LinkParams(lam=1000, interfaces=2)

print("F0      raw  double-select  expedient  stringent   best")
for f0 in np.linspace(0.90, 0.99, 10):
    reps = strategy_reports(3000, float(f0), link=link)
    best = best_strategy_for_capacity(3000, float(f0), link=link)
    cells = "".join(f"{r.n_logical:>{w}d}" for r, w in zip(reps, (5, 15, 11, 11)))
    print(f"{f0:.2f} {cells}   {best.strategy if best.feasible else '-'}")

print()
print("a module needs at least two patches for a two-qubit operation;")
print("raw pairs leave too little room at the low end of the range.")
