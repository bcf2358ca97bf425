"""Can the link keep up, and what does waiting cost?

Pairs decay in memory while a round's worth is collected. The solver feeds
that decay back into the distance until it settles, then says whether
generation keeps pace with consumption (on-the-fly), merely keeps stored
pairs usable (no-expire), or fails (infeasible).
"""

from __future__ import annotations

from seamplan import LinkParams, Strategy, get_protocol, min_link_efficiency, self_consistent_distance

protocols = [None, get_protocol("double-select"), get_protocol("expedient"), get_protocol("stringent")]
names = ["raw", "double-select", "expedient", "stringent"]

for lam in (1e3, 3e4):
    link = LinkParams(lam=lam, tau_coh=10.0)
    print(f"link rate {lam:g}/s, coherence 10 s, round-by-round collection")
    print("  F0     " + "".join(f"{n:>16s}" for n in names))
    for f0 in (0.92, 0.94, 0.96, 0.98, 0.99):
        cells = []
        for proto in protocols:
            plan = self_consistent_distance(Strategy.ROUND_BY_ROUND, proto, link, f0)
            cells.append(f"{plan.regime.kind.value}" + (f"/{plan.distance}" if plan.feasible else ""))
        print(f"  {f0:.2f}  " + "".join(f"{c:>16s}" for c in cells))
    print()

print("trapped ions, F0 = 0.94, 250 pairs/s, 65 s coherence:")
plan = self_consistent_distance(Strategy.ROUND_BY_ROUND, None, LinkParams(lam=250, tau_coh=65), 0.94)
print(f"  {plan.regime.kind.value}, distance {plan.static_distance} -> {plan.distance} via {plan.trace}")

print()
print("smallest link efficiency (pairs per coherence time) at F0 = 0.95, target 1e-3:")
for strategy in Strategy:
    eff = min_link_efficiency(0.95, 1e-3, strategy)
    print(f"  {strategy.value:15s} eta >= {eff.eta_min:8.0f} at d = {eff.distance}")
