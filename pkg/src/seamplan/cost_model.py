"""Static Bell-pair and execution-time accounting for raw versus distilled seams.

Without storage decay, one lattice-surgery operation at distance ``d``
spans ``d`` rounds of ``a d - c`` seam Bell pairs. Distillation lowers the
distance but multiplies consumption by ``n_pairs / p_succ``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .distillation import (
    DEFAULT_P_LOCAL,
    ProtocolOutcome,
    ProtocolSpec,
    evaluate_protocol,
    overhead_factor,
    primary_protocols,
)
from .error_model import (
    DEFAULT_D_MAX,
    DEFAULT_PARAMS,
    FittedModelParams,
    NoisePoint,
    distance_ratio,
    min_distance,
)
from .errors import DegenerateProtocolError, InvalidInputError

RAW = "raw"
DEFAULT_A = 2
DEFAULT_C = 1
# timesteps of two-qubit operations per syndrome round; 18 ops ~ 3.75 rounds
OPS_PER_SYNDROME_ROUND = 18 / 3.75


def pairs_per_round(d_s: int, a: int = DEFAULT_A, c: int = DEFAULT_C) -> int:
    """Seam Bell pairs per syndrome round, ``a d - c``."""
    if d_s < 3 or d_s % 2 == 0:
        raise InvalidInputError(f"code distance must be an odd integer >= 3, got {d_s!r}")
    n = a * d_s - c
    if n <= 0:
        raise InvalidInputError(f"a*d - c must be positive (a={a}, c={c}, d={d_s})")
    return n


def raw_cycle_cost(d_raw: int | None, a: int = DEFAULT_A, c: int = DEFAULT_C) -> float:
    """Bell pairs for one operation consuming raw pairs; infinite when ``d_raw`` is infeasible."""
    if d_raw is None:
        return math.inf
    return float(d_raw * pairs_per_round(d_raw, a, c))


def distilled_cycle_cost(
    protocol: ProtocolSpec,
    outcome: ProtocolOutcome,
    d_dist: int | None,
    a: int = DEFAULT_A,
    c: int = DEFAULT_C,
) -> float:
    """Raw Bell pairs for one operation fed by ``protocol``."""
    if d_dist is None:
        return math.inf
    return overhead_factor(protocol, outcome) * d_dist * pairs_per_round(d_dist, a, c)


@dataclass(frozen=True)
class CostRatio:
    exact: float
    approx: float
    raw_infeasible: bool = False

    @property
    def relative_gap(self) -> float:
        if self.raw_infeasible:
            return math.nan
        return abs(self.approx - self.exact) / self.exact

    @property
    def raw_optimal(self) -> bool:
        # ties go to raw consumption
        return not self.raw_infeasible and self.exact >= 1.0


def cost_ratio(
    protocol: ProtocolSpec,
    outcome: ProtocolOutcome,
    d_raw: int | None,
    d_dist: int | None,
    a: int = DEFAULT_A,
    c: int = DEFAULT_C,
) -> CostRatio:
    """Distilled over raw cycle cost, exactly and as ``(n_pairs / p_succ) rho^2``.

    When the raw distance is infeasible the exact ratio is 0 and
    ``raw_infeasible`` is set: distillation wins by default.
    """
    if d_raw is None:
        return CostRatio(0.0, 0.0, raw_infeasible=True)
    if d_dist is None:
        return CostRatio(math.inf, math.inf)
    rho = distance_ratio(d_dist, d_raw)
    exact = distilled_cycle_cost(protocol, outcome, d_dist, a, c) / raw_cycle_cost(d_raw, a, c)
    return CostRatio(exact, overhead_factor(protocol, outcome) * rho * rho)


def cycle_time(d: int, tau_se: float, tau_d: float = 0.0) -> float:
    """Circuit time of one operation: ``(tau_d + tau_se) d``; ``tau_d = 0`` for raw pairs."""
    if tau_se <= 0 or tau_d < 0:
        raise InvalidInputError("durations must satisfy tau_se > 0 and tau_d >= 0")
    return (tau_d + tau_se) * d


def time_threshold_ratio(tau_d: float, tau_se: float) -> float:
    """Distillation is faster iff ``d_dist / d_raw`` is below this value."""
    if tau_se <= 0 or tau_d < 0:
        raise InvalidInputError("durations must satisfy tau_se > 0 and tau_d >= 0")
    return 1.0 / (1.0 + tau_d / tau_se)


def distillation_depth(protocol: ProtocolSpec, tau_se: float = 1.0) -> float:
    """Circuit duration ``tau_D`` of ``protocol`` in the units of ``tau_se``."""
    return protocol.op_count / OPS_PER_SYNDROME_ROUND * tau_se


# ---------------------------------------------------------------------------
# fidelity sweeps


@dataclass(frozen=True)
class CostRow:
    fidelity: float
    protocol: str
    distance: int | None
    pairs_per_round: int | None
    pairs_per_cycle: float
    cycle_time: float
    overhead_factor: float
    p_eff: float
    p_succ: float
    optimal: bool = False

    @property
    def breakdown(self) -> "CostBreakdown | None":
        if self.distance is None:
            return None
        return CostBreakdown(self.distance, self.pairs_per_round, self.pairs_per_cycle,
                             self.overhead_factor, self.cycle_time)


@dataclass(frozen=True)
class CostBreakdown:
    distance: int
    pairs_per_round: int
    pairs_per_cycle: float
    overhead_factor: float
    cycle_time: float


def evaluate_point(
    fidelity: float,
    p_l_target: float,
    protocols: Sequence[ProtocolSpec],
    p_local: float = DEFAULT_P_LOCAL,
    params: FittedModelParams = DEFAULT_PARAMS,
    tau_se: float = 1.0,
    a: int = DEFAULT_A,
    c: int = DEFAULT_C,
    d_max: int = DEFAULT_D_MAX,
) -> list[CostRow]:
    """Cost rows for raw consumption and each protocol at one raw fidelity.

    Exactly one row is flagged optimal (minimum cycle cost, ties to raw) unless
    every strategy is infeasible.
    """
    p_raw = 1.0 - fidelity
    rows = []
    d_raw = min_distance(NoisePoint(p_raw, p_local), p_l_target, params, d_max).distance
    rows.append(
        CostRow(
            fidelity, RAW, d_raw,
            None if d_raw is None else pairs_per_round(d_raw, a, c),
            raw_cycle_cost(d_raw, a, c),
            math.inf if d_raw is None else cycle_time(d_raw, tau_se),
            1.0, p_raw, 1.0,
        )
    )
    for proto in protocols:
        try:
            out = evaluate_protocol(proto, p_raw, p_local)
        except DegenerateProtocolError:
            rows.append(CostRow(fidelity, proto.name, None, None, math.inf, math.inf, math.inf, math.nan, 0.0))
            continue
        d = min_distance(NoisePoint(out.p_eff, p_local), p_l_target, params, d_max).distance
        rows.append(
            CostRow(
                fidelity, proto.name, d,
                None if d is None else pairs_per_round(d, a, c),
                distilled_cycle_cost(proto, out, d, a, c),
                math.inf if d is None else cycle_time(d, tau_se, distillation_depth(proto, tau_se)),
                overhead_factor(proto, out), out.p_eff, out.p_succ,
            )
        )
    costs = [r.pairs_per_cycle for r in rows]
    best = min(costs)
    if math.isfinite(best):
        k = costs.index(best)  # first index wins, raw is first
        rows[k] = _replace_optimal(rows[k])
    return rows


def _replace_optimal(row: CostRow) -> CostRow:
    from dataclasses import replace

    return replace(row, optimal=True)


def fidelity_grid(lo: float = 0.90, hi: float = 0.99, step: float = 1e-4) -> np.ndarray:
    """Uniform ascending grid including both ends."""
    if not hi > lo or step <= 0:
        raise InvalidInputError("need lo < hi and a positive step")
    n = int(round((hi - lo) / step))
    return np.round(np.linspace(lo, hi, n + 1), 12)


@dataclass(frozen=True)
class Crossover:
    """Lowest fidelity above which raw consumption wins at every sampled point.

    ``fidelity`` is ``None`` when distillation wins somewhere at the top of
    the range (no crossover). ``raw_everywhere`` flags that raw wins over
    the whole range, in which case ``fidelity`` is the bottom of the grid.
    ``last_overtaken`` names the protocol that was best just below the
    crossover.
    """

    fidelity: float | None
    last_overtaken: str | None
    raw_everywhere: bool = False
    tie_everywhere: bool = False


def _crossover(
    raw_wins,
    best_protocol,
    grid: Sequence[float],
    refine_to: float,
) -> Crossover:
    grid = [float(f) for f in grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidInputError("fidelity grid must be strictly ascending")
    wins = [raw_wins(f) for f in grid]
    if not wins[-1]:
        return Crossover(None, best_protocol(grid[-1]))
    k = len(grid) - 1
    while k > 0 and wins[k - 1]:
        k -= 1
    if k == 0:
        return Crossover(grid[0], None, raw_everywhere=True)
    lo, hi = grid[k - 1], grid[k]
    # bisect between the last losing and first winning grid point
    while hi - lo > refine_to:
        mid = 0.5 * (lo + hi)
        if raw_wins(mid):
            hi = mid
        else:
            lo = mid
    return Crossover(hi, best_protocol(lo))


def crossover_fidelity(
    p_l_target: float,
    protocols: Sequence[ProtocolSpec] | None = None,
    grid: Sequence[float] | None = None,
    p_local: float = DEFAULT_P_LOCAL,
    params: FittedModelParams = DEFAULT_PARAMS,
    refine_to: float = 1e-5,
) -> Crossover:
    """Fidelity above which raw cycle cost never exceeds the cheapest distilled cost."""
    protocols = list(protocols) if protocols is not None else primary_protocols()
    if not protocols:
        raise InvalidInputError("at least one protocol is required")
    grid = fidelity_grid() if grid is None else grid

    def rows(f):
        return evaluate_point(f, p_l_target, protocols, p_local, params)

    def raw_wins(f):
        r = rows(f)
        return r[0].pairs_per_cycle <= min(x.pairs_per_cycle for x in r[1:]) and math.isfinite(r[0].pairs_per_cycle)

    def best(f):
        r = rows(f)[1:]
        return min(r, key=lambda x: x.pairs_per_cycle).protocol

    return _crossover(raw_wins, best, grid, refine_to)


def time_crossover_fidelity(
    p_l_target: float,
    protocols: Sequence[ProtocolSpec] | None = None,
    grid: Sequence[float] | None = None,
    p_local: float = DEFAULT_P_LOCAL,
    params: FittedModelParams = DEFAULT_PARAMS,
    tau_d: dict[str, float] | None = None,
    refine_to: float = 1e-5,
) -> Crossover:
    """Fidelity above which raw consumption has the shortest operation time.

    ``tau_d`` overrides the per-protocol circuit depth (in units of the
    syndrome round); by default it follows the operation count. When every
    strategy takes the same time everywhere a tie is reported.
    """
    protocols = list(protocols) if protocols is not None else primary_protocols()
    if not protocols:
        raise InvalidInputError("at least one protocol is required")
    grid = fidelity_grid() if grid is None else grid
    tau_d = tau_d or {}

    def times(f):
        r = evaluate_point(f, p_l_target, protocols, p_local, params)
        t_raw = math.inf if r[0].distance is None else cycle_time(r[0].distance, 1.0)
        t = {}
        for proto, row in zip(protocols, r[1:]):
            depth = tau_d.get(proto.name, distillation_depth(proto))
            t[proto.name] = math.inf if row.distance is None else cycle_time(row.distance, 1.0, depth)
        return t_raw, t

    def raw_wins(f):
        t_raw, t = times(f)
        return math.isfinite(t_raw) and t_raw <= min(t.values())

    def best(f):
        _, t = times(f)
        return min(t, key=t.get)

    result = _crossover(raw_wins, best, grid, refine_to)
    if result.raw_everywhere:
        ties = all(times(float(f))[0] == min(times(float(f))[1].values()) for f in grid)
        if ties:
            return Crossover(result.fidelity, None, raw_everywhere=True, tie_everywhere=True)
    return result


COST_CSV_COLUMNS = (
    "fidelity", "protocol", "distance", "pairs_per_round", "pairs_per_cycle", "cycle_time", "optimal_flag",
)


def cost_table(
    grid: Iterable[float],
    p_l_target: float,
    protocols: Sequence[ProtocolSpec] | None = None,
    p_local: float = DEFAULT_P_LOCAL,
    params: FittedModelParams = DEFAULT_PARAMS,
    tau_se: float = 1.0,
) -> list[CostRow]:
    protocols = list(protocols) if protocols is not None else primary_protocols()
    out = []
    for f in grid:
        out.extend(evaluate_point(float(f), p_l_target, protocols, p_local, params, tau_se))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def cost_rows_to_csv(rows: Iterable[CostRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COST_CSV_COLUMNS)
    for r in rows:
        w.writerow([
            _fmt(r.fidelity), r.protocol, _fmt(r.distance), _fmt(r.pairs_per_round),
            _fmt(r.pairs_per_cycle), _fmt(r.cycle_time), int(r.optimal),
        ])
    return buf.getvalue()
