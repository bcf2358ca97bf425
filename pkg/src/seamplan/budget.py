"""Physical-qubit accounting for one module.

A module of ``N_phy`` qubits hosts ``N_comm`` communication qubits, ``N_mem``
Bell-pair memory qubits and a two-column grid of ``n_L`` distance-``d``
patches (``2 d^2 - 1`` qubits each) with ``3 n_L / 2 - 2`` shared
boundaries of ``d`` qubits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .distillation import ProtocolOutcome, ProtocolSpec, evaluate_protocol, get_protocol, multiplexing_factor
from .error_model import DEFAULT_PARAMS, FittedModelParams, NoisePoint, min_distance
from .errors import DegenerateProtocolError, InvalidInputError, InvariantViolation
from .temporal import LinkParams

RAW = "raw"
BUDGET_CSV_COLUMNS = ("fidelity", "strategy", "d", "n_comm", "n_mem", "n_logical", "total")


def patch_qubits(d: int) -> int:
    """Conservative rotated-patch count (data plus one ancilla per stabilizer)."""
    return 2 * d * d - 1


def comm_qubits(interfaces: int, tau_reset: float = 0.0, attempt_rate: float = 0.0) -> int:
    """Communication qubits: time-division multiplexing covers the reset dead time."""
    if interfaces < 1:
        raise InvalidInputError("interfaces must be >= 1")
    if tau_reset < 0 or attempt_rate < 0:
        raise InvalidInputError("tau_reset and attempt_rate must be non-negative")
    # tolerate float noise just above an integer
    slots = math.ceil(tau_reset * attempt_rate - 1e-12)
    return interfaces * max(1, slots)


def mem_qubits(d: int, protocol: ProtocolSpec | None = None, outcome: ProtocolOutcome | None = None,
               p_succ: float | None = None) -> int:
    """Memory qubits for one round's worth of seam pairs.

    Raw storage keeps one pair end per seam qubit, ``2d - 1``. Distillation
    multiplies this by ``k n_pairs`` for ``k`` parallel attempts; pass the
    evaluated ``outcome`` or a bare ``p_succ``.
    """
    if d < 1:
        raise InvalidInputError("d must be positive")
    base = 2 * d - 1
    if protocol is None:
        return base
    if outcome is not None:
        p_succ = outcome.p_succ
    if p_succ is None:
        raise InvalidInputError("a distilled memory count needs p_succ")
    if p_succ < 1e-12:
        raise DegenerateProtocolError(f"{protocol.name} has p_succ={p_succ:g}")
    return base * multiplexing_factor(p_succ) * protocol.n_pairs


def logical_capacity(n_phy: int, n_comm: int, n_mem: int, d: int) -> int:
    """Largest even ``n_L`` whose grid fits beside the overheads (0 if none)."""
    free = n_phy - n_comm - n_mem
    if free <= 0:
        return 0
    return max(0, 2 * ((free + 2 * d) // (4 * d * d + 3 * d - 2)))


def total_budget(n_l: int, d: int, n_comm: int, n_mem: int) -> int:
    """Qubits used by ``n_l`` patches on the two-column grid plus overheads."""
    if n_l < 0 or n_l % 2:
        raise InvalidInputError(f"n_l must be a non-negative even count, got {n_l}")
    if n_l == 0:
        return n_comm + n_mem
    return n_l * patch_qubits(d) + (3 * n_l // 2 - 2) * d + n_comm + n_mem


def capacity_gain_estimate(n_l_raw: int, rho: float) -> float:
    """First-order capacity gain from shrinking the distance by ``rho = d_dist / d_raw``."""
    if not 0 < rho <= 1:
        raise InvalidInputError("rho must lie in (0, 1]")
    return n_l_raw * (rho**-2 - 1.0)


@dataclass(frozen=True)
class BudgetReport:
    strategy: str
    distance: int | None
    n_comm: int
    n_mem: int
    n_logical: int
    grid_qubits: int
    total: int
    candidates: tuple[BudgetReport, ...] = field(default=(), compare=False, repr=False)

    @property
    def feasible(self) -> bool:
        """At least one two-qubit operation fits (``n_L >= 2``)."""
        return self.n_logical >= 2


def _report(strategy: str, d: int | None, n_phy: int, n_comm: int, n_mem: int) -> BudgetReport:
    if d is None:
        return BudgetReport(strategy, None, n_comm, 0, 0, 0, n_comm)
    n_l = logical_capacity(n_phy, n_comm, n_mem, d)
    total = total_budget(n_l, d, n_comm, n_mem)
    if total > n_phy and n_l > 0:
        raise InvariantViolation("capacity reconstruction exceeded the budget")
    return BudgetReport(strategy, d, n_comm, n_mem, n_l, total - n_comm - n_mem, total)


def link_comm_qubits(link: LinkParams | None) -> int:
    if link is None:
        return 1
    return comm_qubits(link.interfaces or 1, link.tau_reset, link.attempt_rate or 0.0)


def strategy_reports(
    n_phy: int,
    f0: float,
    p_phys: float = 1e-3,
    p_l_target: float = 1e-3,
    protocols: Sequence[ProtocolSpec | str] | None = None,
    link: LinkParams | None = None,
    params: FittedModelParams = DEFAULT_PARAMS,
) -> list[BudgetReport]:
    """One report for raw consumption and one per distillation protocol."""
    if protocols is None:
        protocols = ("double-select", "expedient", "stringent")
    n_comm = link_comm_qubits(link)
    p_raw = 1.0 - f0
    static = min_distance(NoisePoint(p_raw, p_phys), p_l_target, params)
    reports = [_report(RAW, static.distance, n_phy, n_comm, mem_qubits(static.distance) if static.feasible else 0)]
    for proto in protocols:
        proto = get_protocol(proto) if isinstance(proto, str) else proto
        try:
            out = evaluate_protocol(proto, p_raw, p_phys)
        except DegenerateProtocolError:
            reports.append(_report(proto.name, None, n_phy, n_comm, 0))
            continue
        res = min_distance(NoisePoint(out.p_eff, p_phys), p_l_target, params)
        n_mem = mem_qubits(res.distance, proto, out) if res.feasible else 0
        reports.append(_report(proto.name, res.distance, n_phy, n_comm, n_mem))
    return reports


def best_strategy_for_capacity(
    n_phy: int,
    f0: float,
    p_phys: float = 1e-3,
    p_l_target: float = 1e-3,
    protocols: Sequence[ProtocolSpec | str] | None = None,
    link: LinkParams | None = None,
    params: FittedModelParams = DEFAULT_PARAMS,
) -> BudgetReport:
    """Strategy maximising ``n_L``; raw wins ties.

    Check ``.feasible`` on the result: when every strategy leaves fewer than
    two patches the best of them is still returned, flagged infeasible.
    """
    reports = strategy_reports(n_phy, f0, p_phys, p_l_target, protocols, link, params)
    best = reports[0]
    for rep in reports[1:]:
        if rep.n_logical > best.n_logical:
            best = rep
    return BudgetReport(best.strategy, best.distance, best.n_comm, best.n_mem, best.n_logical,
                        best.grid_qubits, best.total, tuple(reports))


def budget_sweep(
    n_phy: int,
    fidelities: Sequence[float],
    p_phys: float = 1e-3,
    p_l_target: float = 1e-3,
    protocols: Sequence[ProtocolSpec | str] | None = None,
    link: LinkParams | None = None,
    params: FittedModelParams = DEFAULT_PARAMS,
) -> list[dict]:
    """Rows in :data:`BUDGET_CSV_COLUMNS` order, one per fidelity and strategy."""
    rows = []
    for f0 in fidelities:
        for rep in strategy_reports(n_phy, f0, p_phys, p_l_target, protocols, link, params):
            rows.append({
                "fidelity": f0, "strategy": rep.strategy, "d": rep.distance, "n_comm": rep.n_comm,
                "n_mem": rep.n_mem, "n_logical": rep.n_logical, "total": rep.total,
            })
    return rows
