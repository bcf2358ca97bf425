"""Finite-rate Bell-pair supply: collection statistics, storage decay and regimes.

Heralded generation is a Poisson process of rate ``lam``. A round needing
``C`` pairs waits an Erlang(C, lam) time, during which stored pairs decay
as ``F0 exp(-t / tau_coh)``. The distance needed to meet the target then
depends on the decay, and the decay on the distance; the solver here
iterates that loop to its fixed point for two schedules:

* round-by-round: each round's pairs are collected just before the round;
  the data qubits idle while waiting.
* pre-buffered: all pairs of the operation are collected first, then the
  rounds run back to back without idling.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from .cost_model import DEFAULT_A, DEFAULT_C, distillation_depth, pairs_per_round
from .distillation import ProtocolSpec, evaluate_protocol, overhead_factor
from .error_model import (
    DEFAULT_D_MAX,
    DEFAULT_PARAMS,
    FittedModelParams,
    NoisePoint,
    min_distance,
)
from .errors import ConvergenceError, DegenerateProtocolError, InvalidInputError

# 99th percentile of the standard normal, pinned (not recomputed)
Z99 = 2.33
DEFAULT_F_DISCARD = 0.867
MAX_ITERATIONS = 100


class Strategy(str, enum.Enum):
    ROUND_BY_ROUND = "round-by-round"
    PRE_BUFFERED = "pre-buffered"


class RegimeKind(str, enum.Enum):
    ON_THE_FLY = "on-the-fly"
    NO_EXPIRE = "no-expire"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class LinkParams:
    """Generation and memory parameters of one inter-module link.

    Give either ``lam`` directly or all of ``interfaces``, ``attempt_rate``
    and ``p_herald`` (then ``lam = interfaces * attempt_rate * p_herald``).
    Times are in seconds.
    """

    lam: float | None = None
    interfaces: int | None = None
    attempt_rate: float | None = None
    p_herald: float | None = None
    tau_coh: float = 10.0
    mu: float = 5.0
    tau_se: float = 1e-3
    tau_reset: float = 0.0

    def __post_init__(self):
        parts = (self.interfaces, self.attempt_rate, self.p_herald)
        if all(p is not None for p in parts):
            derived = self.interfaces * self.attempt_rate * self.p_herald
            if self.lam is None:
                object.__setattr__(self, "lam", derived)
            elif not math.isclose(self.lam, derived, rel_tol=1e-9):
                raise InvalidInputError(f"lam={self.lam} disagrees with I*r*p_herald={derived}")
        if self.lam is None or not self.lam > 0:
            raise InvalidInputError("the generation rate lam must be positive")
        if self.interfaces is not None and self.interfaces < 1:
            raise InvalidInputError("interfaces must be >= 1")
        if not self.tau_coh > 0 or not self.tau_se > 0 or self.tau_reset < 0:
            raise InvalidInputError("need tau_coh > 0, tau_se > 0, tau_reset >= 0")
        if self.mu < 1:
            raise InvalidInputError(f"mu must be >= 1, got {self.mu}")

    @property
    def eta_link(self) -> float:
        """Pairs generated per coherence time, ``lam * tau_coh``."""
        return self.lam * self.tau_coh

    def with_eta(self, eta: float) -> LinkParams:
        """Same link with ``lam`` rescaled so that ``eta_link == eta``."""
        return replace(self, lam=eta / self.tau_coh, interfaces=None, attempt_rate=None, p_herald=None)


# ---------------------------------------------------------------------------
# closed-form statistics


@dataclass(frozen=True)
class CollectionStats:
    mean: float
    variance: float
    t99: float


def collection_time_stats(n: int, lam: float) -> CollectionStats:
    """Mean, variance and Gaussian 99th percentile of the time to collect ``n`` pairs."""
    if n < 1 or not lam > 0:
        raise InvalidInputError("need n >= 1 and lam > 0")
    mean = n / lam
    return CollectionStats(mean, n / lam**2, mean * (1.0 + Z99 / math.sqrt(n)))


def decayed_fidelity(f0: float, t: float, tau_coh: float, exact: bool = False) -> float:
    """Fidelity after storing for ``t``.

    The default ``F0 exp(-t/tau)`` is the high-fidelity form;
    ``exact=True`` gives the depolarizing ``1/4 + (F0 - 1/4) exp(-t/tau)``.
    """
    if t < 0 or not tau_coh > 0:
        raise InvalidInputError("need t >= 0 and tau_coh > 0")
    if exact:
        return 0.25 + (f0 - 0.25) * math.exp(-t / tau_coh)
    return f0 * math.exp(-t / tau_coh)


def discard_time(f0: float, tau_coh: float, f_discard: float = DEFAULT_F_DISCARD) -> float:
    """Longest storage before a pair drops below ``f_discard``; 0 if it already has."""
    if not f_discard > 0 or not tau_coh > 0:
        raise InvalidInputError("need f_discard > 0 and tau_coh > 0")
    if f0 < f_discard:
        return 0.0
    return tau_coh * math.log(f0 / f_discard)


def otf_condition(lam: float, t_round: float, c_round: float) -> bool:
    """Whether generation covers one round's consumption at 99% confidence."""
    n_gen = lam * t_round
    return n_gen - Z99 * math.sqrt(n_gen) >= c_round


def otf_threshold_rate(t_round: float, c_round: float) -> float:
    """Smallest ``lam`` satisfying :func:`otf_condition`."""
    root = 0.5 * (Z99 + math.sqrt(Z99 * Z99 + 4.0 * c_round))
    return root * root / t_round


@dataclass(frozen=True)
class OtfFidelity:
    fidelity: float
    nu: float
    first_order: float


def otf_stored_fidelity_bound(f0: float, t_round: float, tau_coh: float) -> OtfFidelity:
    """Worst-case stored fidelity when pairs wait at most one round."""
    nu = t_round / tau_coh
    return OtfFidelity(f0 * math.exp(-nu), nu, f0 * (1.0 - nu))


def strategy1_stored_fidelity(f0: float, c_round: float, eta_link: float) -> float:
    """Earliest pair of a round-by-round batch: ``F0 exp(-C / eta)``."""
    if not eta_link > 0:
        raise InvalidInputError("eta_link must be positive")
    return f0 * math.exp(-c_round / eta_link)


def strategy2_stored_fidelity(f0: float, d_s: int, c_round: float, eta_link: float) -> float:
    """Earliest pair of a pre-buffered operation waits ``d_s`` rounds' worth of collection."""
    if not eta_link > 0:
        raise InvalidInputError("eta_link must be positive")
    return f0 * math.exp(-d_s * c_round / eta_link)


def idle_error(c_round: float, mu: float, eta_link: float) -> float:
    """Per-round data-qubit idle error while a round-by-round batch is collected."""
    if mu < 1 or not eta_link > 0:
        raise InvalidInputError("need mu >= 1 and eta_link > 0")
    return -math.expm1(-c_round / (mu * eta_link))


def no_expire_bound(
    strategy: Strategy, d_s: int, f0: float, f_discard: float = DEFAULT_F_DISCARD,
    c_round: float | None = None,
) -> float:
    """Smallest ``eta_link`` keeping the earliest pair above ``f_discard`` at distance ``d_s``.

    Pre-buffering stores ``d_s`` times as many pairs, so its bound is exactly
    ``d_s`` times the round-by-round one.
    """
    c_round = pairs_per_round(d_s) if c_round is None else c_round
    window = math.log(f0 / f_discard) if f0 > f_discard else 0.0
    if window == 0.0:
        return math.inf
    if Strategy(strategy) is Strategy.PRE_BUFFERED:
        return d_s * c_round / window
    return c_round / window


def production_bound(c_round: float, f0: float, f_discard: float = DEFAULT_F_DISCARD) -> float:
    """``eta_link`` needed to collect ``C`` pairs at 99% confidence before expiry."""
    if f0 <= f_discard:
        return math.inf
    return c_round / math.log(f0 / f_discard) * (1.0 + Z99 / math.sqrt(c_round))


# ---------------------------------------------------------------------------
# self-consistent distance


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    eta_link: float
    n_gen: float
    c_round: float | None


@dataclass(frozen=True)
class ConvergedPlan:
    """Fixed point of distance and decay-degraded error rates."""

    distance: int
    static_distance: int
    stored_fidelity: float
    p_bell: float
    idle_error: float
    effective_local: float
    pairs_per_round: float
    pairs_per_cycle: float
    t_round: float
    regime: Regime
    iterations: int
    strategy: Strategy
    protocol: str
    nu: float
    trace: tuple[int, ...] = field(default=(), compare=False)

    @property
    def feasible(self) -> bool:
        return True


@dataclass(frozen=True)
class Infeasible:
    reason: str
    regime: Regime
    strategy: Strategy
    protocol: str
    static_distance: int | None = None
    trace: tuple[int, ...] = ()

    @property
    def feasible(self) -> bool:
        return False

    distance = None


@dataclass(frozen=True)
class _Decay:
    stored_fidelity: float
    p_bell: float
    p_idle: float
    p_local: float
    c_round: float


def _decay_at(
    d: int, strategy: Strategy, protocol: ProtocolSpec | None, overhead: float,
    link: LinkParams, f0: float, p_phys: float, a: int, c: int, exact_decay: bool,
) -> _Decay:
    eta = link.eta_link
    c_round = overhead * pairs_per_round(d, a, c)
    if strategy is Strategy.ROUND_BY_ROUND:
        wait = c_round / eta
        p_idle = idle_error(c_round, link.mu, eta)
    else:
        wait = d * c_round / eta
        p_idle = 0.0
    f_stored = 0.25 + (f0 - 0.25) * math.exp(-wait) if exact_decay else f0 * math.exp(-wait)
    p_stored = 1.0 - f_stored
    if protocol is None:
        p_bell = p_stored
    else:
        # raw inputs decay during collection, then the circuit runs
        p_bell = evaluate_protocol(protocol, min(p_stored, 0.75), p_phys).p_eff
    return _Decay(f_stored, p_bell, p_idle, p_phys + p_idle, c_round)


def _collected(strategy: Strategy, d: int, c_round: float) -> float:
    """Pairs that must arrive before the earliest one expires."""
    return c_round if strategy is Strategy.ROUND_BY_ROUND else d * c_round


def _round_time(protocol: ProtocolSpec | None, tau_se: float) -> float:
    return tau_se if protocol is None else tau_se + distillation_depth(protocol, tau_se)


def self_consistent_distance(
    strategy: Strategy | str,
    protocol: ProtocolSpec | None,
    link: LinkParams,
    f0: float,
    p_phys: float = 1e-3,
    p_l_target: float = 1e-3,
    d_max: int = DEFAULT_D_MAX,
    params: FittedModelParams = DEFAULT_PARAMS,
    f_discard: float = DEFAULT_F_DISCARD,
    a: int = DEFAULT_A,
    c: int = DEFAULT_C,
    exact_decay: bool = False,
) -> ConvergedPlan | Infeasible:
    """Iterate ``d <- d*(p_bell(d), p_local(d))`` from the static distance.

    ``protocol=None`` consumes raw pairs. A distilled seam needs
    ``(n_pairs / p_succ) (a d - c)`` raw pairs per round, with ``p_succ``
    taken at the undecayed fidelity. The loop stops at a fixed point, or
    reports :class:`Infeasible` when the distance leaves ``[3, d_max]``,
    the stored fidelity drops below ``f_discard``, the pairs needed before
    the earliest expires cannot be collected at 99% confidence (the
    production bound), or the local rate reaches the bulk threshold. More than ``MAX_ITERATIONS`` updates raise
    :class:`ConvergenceError` with the iterate trace.
    """
    strategy = Strategy(strategy)
    name = "raw" if protocol is None else protocol.name
    t_round = _round_time(protocol, link.tau_se)
    eta = link.eta_link

    def infeasible(reason, trace=(), c_round=None):
        regime = Regime(RegimeKind.INFEASIBLE, eta, link.lam * t_round, c_round)
        static_d = trace[0] if trace else None
        return Infeasible(reason, regime, strategy, name, static_d, tuple(trace))

    p_raw = 1.0 - f0
    if protocol is None:
        overhead = 1.0
        p_static = p_raw
    else:
        try:
            out = evaluate_protocol(protocol, p_raw, p_phys)
        except DegenerateProtocolError as exc:
            return infeasible(f"degenerate protocol: {exc}")
        overhead = overhead_factor(protocol, out)
        p_static = out.p_eff
    static = min_distance(NoisePoint(p_static, p_phys), p_l_target, params, d_max)
    if not static.feasible:
        return infeasible(f"static distance infeasible: {static.reason}")
    d = static.distance
    trace = [d]
    for it in range(MAX_ITERATIONS + 1):
        dec = _decay_at(d, strategy, protocol, overhead, link, f0, p_phys, a, c, exact_decay)
        if dec.stored_fidelity < f_discard:
            return infeasible("stored pairs fall below the discard fidelity", trace, dec.c_round)
        if eta < production_bound(_collected(strategy, d, dec.c_round), f0, f_discard):
            return infeasible("99% collection time exceeds the discard window", trace, dec.c_round)
        if dec.p_local >= params.p_th_local:
            return infeasible("idle error pushes the local rate past threshold", trace, dec.c_round)
        nxt = min_distance(NoisePoint(dec.p_bell, dec.p_local), p_l_target, params, d_max)
        if not nxt.feasible:
            return infeasible(f"no distance <= {d_max} meets the target", trace, dec.c_round)
        if nxt.distance == d:
            n_gen = link.lam * t_round
            kind = RegimeKind.ON_THE_FLY if otf_condition(link.lam, t_round, dec.c_round) else RegimeKind.NO_EXPIRE
            return ConvergedPlan(
                distance=d,
                static_distance=static.distance,
                stored_fidelity=dec.stored_fidelity,
                p_bell=dec.p_bell,
                idle_error=dec.p_idle,
                effective_local=dec.p_local,
                pairs_per_round=dec.c_round,
                pairs_per_cycle=dec.c_round * d,
                t_round=t_round,
                regime=Regime(kind, eta, n_gen, dec.c_round),
                iterations=it,
                strategy=strategy,
                protocol=name,
                nu=t_round / link.tau_coh,
                trace=tuple(trace),
            )
        d = nxt.distance
        trace.append(d)
    raise ConvergenceError(f"no fixed point after {MAX_ITERATIONS} iterations", trace)


def is_fixed_point(plan: ConvergedPlan, link: LinkParams, f0: float, p_phys: float, p_l_target: float,
                   protocol: ProtocolSpec | None = None, params: FittedModelParams = DEFAULT_PARAMS,
                   a: int = DEFAULT_A, c: int = DEFAULT_C) -> bool:
    """Re-evaluate the distance at the plan's own error rates."""
    if protocol is None:
        overhead = 1.0
    else:
        overhead = overhead_factor(protocol, evaluate_protocol(protocol, 1.0 - f0, p_phys))
    dec = _decay_at(plan.distance, plan.strategy, protocol, overhead, link, f0, p_phys, a, c, False)
    again = min_distance(NoisePoint(dec.p_bell, dec.p_local), p_l_target, params)
    return again.distance == plan.distance and dec.c_round == plan.pairs_per_round


def classify_regime(
    strategy: Strategy | str,
    protocol: ProtocolSpec | None,
    link: LinkParams,
    f0: float,
    p_phys: float = 1e-3,
    p_l_target: float = 1e-3,
    **kwargs,
) -> Regime:
    """On-the-fly if the converged plan's round is covered at 99% confidence,
    no-expire if the plan merely converges, infeasible otherwise."""
    return self_consistent_distance(strategy, protocol, link, f0, p_phys, p_l_target, **kwargs).regime


# ---------------------------------------------------------------------------
# minimum link efficiency


@dataclass(frozen=True)
class LinkEfficiency:
    eta_min: float
    distance: int
    pairs_per_round: float
    production_bound: float
    no_expire_bound: float


def min_link_efficiency(
    f0: float,
    p_l_target: float,
    strategy: Strategy | str = Strategy.ROUND_BY_ROUND,
    protocol: ProtocolSpec | None = None,
    link: LinkParams | None = None,
    p_phys: float = 1e-3,
    f_discard: float = DEFAULT_F_DISCARD,
    rel_tol: float = 1e-6,
    **kwargs,
) -> LinkEfficiency:
    """Smallest ``eta_link`` at which the self-consistent solver converges.

    Found by bisection in ``log(eta)``; assumes convergence is monotone in
    ``eta`` (less decay never hurts). The production bound and the
    no-expire bound at the resulting distance are reported alongside.
    """
    link = link or LinkParams(lam=1e3)
    strategy = Strategy(strategy)
    if f0 <= f_discard:
        return LinkEfficiency(math.inf, 0, math.nan, math.inf, math.inf)

    def solve(eta):
        return self_consistent_distance(
            strategy, protocol, link.with_eta(eta), f0, p_phys, p_l_target, f_discard=f_discard, **kwargs
        )

    hi = 1e15
    top = solve(hi)
    if not top.feasible:
        raise InvalidInputError(f"scenario infeasible even without decay: {top.reason}")
    lo = 1e-3
    if solve(lo).feasible:
        hi = lo
    while math.log(hi / lo) > rel_tol and hi > lo:
        mid = math.sqrt(lo * hi)
        if solve(mid).feasible:
            hi = mid
        else:
            lo = mid
    plan = solve(hi)
    return LinkEfficiency(
        eta_min=hi,
        distance=plan.distance,
        pairs_per_round=plan.pairs_per_round,
        production_bound=production_bound(_collected(strategy, plan.distance, plan.pairs_per_round), f0, f_discard),
        no_expire_bound=no_expire_bound(strategy, plan.distance, f0, f_discard, plan.pairs_per_round),
    )


REGIME_CSV_COLUMNS = (
    "fidelity", "lambda", "strategy", "protocol", "regime", "distance",
    "pairs_per_cycle_static", "pairs_per_cycle_converged",
)
