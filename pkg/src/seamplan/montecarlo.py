"""Stochastic simulation of Bell-pair supply and consumption.

Every random stream is a Philox generator keyed by ``(seed, *counters)``, so
results depend only on the master seed and the position of a run or grid
point, never on evaluation order.
"""

from __future__ import annotations

import math
import zlib
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cost_model import DEFAULT_A, DEFAULT_C, distillation_depth, pairs_per_round
from .distillation import (
    ProtocolSpec,
    evaluate_protocol,
    get_protocol,
    primary_protocols,
    werner_state,
)
from .error_model import DEFAULT_PARAMS, FittedModelParams, NoisePoint, min_distance
from .errors import DegenerateProtocolError, InvalidInputError, InvariantViolation
from .temporal import DEFAULT_F_DISCARD, LinkParams, Strategy, discard_time, self_consistent_distance

BAND_CSV_COLUMNS = (
    "fidelity", "protocol", "distance", "pairs_per_round", "pairs_per_cycle", "cycle_time",
    "optimal_flag", "mean", "std", "runs", "seed",
)


def make_rng(seed: int, *counters: int) -> np.random.Generator:
    """Counter-based generator for stream ``counters`` under master ``seed``."""
    if seed < 0 or any(c < 0 for c in counters):
        raise InvalidInputError("seeds and stream counters must be non-negative")
    # spawn_key keeps (s, 1) and (s, 1, 0) apart, unlike padding the entropy
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(c) for c in counters))
    return np.random.Generator(np.random.Philox(ss))


def simulate_collection(n: int, lam: float, runs: int = 1000, seed: int = 0) -> np.ndarray:
    """Time to collect ``n`` heralded pairs, one sample per run."""
    if n < 1 or runs < 1 or not lam > 0:
        raise InvalidInputError("need n >= 1, runs >= 1 and lam > 0")
    rng = make_rng(seed, 0)
    return rng.exponential(1.0 / lam, size=(runs, n)).sum(axis=1)


# ---------------------------------------------------------------------------
# operation simulator


@dataclass(frozen=True)
class SimConfig:
    """One lattice-surgery operation fed by a stochastic link.

    ``rounds`` defaults to the code distance (one merge). ``distance``
    overrides the distance taken from the analytical plan. Runs that need
    more than ``max_arrivals_per_round`` arrivals before a round (or, when
    pre-buffering, the whole operation) can fire are abandoned and counted
    as stalled.
    """

    link: LinkParams
    strategy: Strategy | str = Strategy.ROUND_BY_ROUND
    protocol: ProtocolSpec | None = None
    f0: float = 0.97
    p_phys: float = 1e-3
    p_l_target: float = 1e-3
    rounds: int | None = None
    runs: int = 1000
    seed: int = 0
    distance: int | None = None
    f_discard: float = DEFAULT_F_DISCARD
    max_arrivals_per_round: int = 200_000
    a: int = DEFAULT_A
    c: int = DEFAULT_C

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if isinstance(self.protocol, str):
            object.__setattr__(self, "protocol", get_protocol(self.protocol))
        if self.runs < 1:
            raise InvalidInputError("runs must be >= 1")
        if self.seed < 0:
            raise InvalidInputError("seed must be non-negative")
        if self.rounds is not None and self.rounds < 1:
            raise InvalidInputError("rounds must be >= 1")
        if not 0.25 < self.f0 <= 1.0:
            raise InvalidInputError("f0 must lie in (1/4, 1]")


@dataclass(frozen=True, eq=False)
class SimResult:
    """Aggregates of :func:`simulate_operation`.

    ``pairs_per_cycle`` holds the raw pairs consumed by each completed run,
    scaled to ``distance`` rounds. ``window_fidelity`` is the fidelity of a
    pair that arrived when a collection window opened, at the moment the
    round fires; ``oldest_fidelity`` uses the true age of the oldest pair
    actually consumed.
    """

    distance: int
    rounds: int
    runs: int
    seed: int
    pairs_per_cycle: np.ndarray
    collection_times: np.ndarray
    window_fidelity: np.ndarray
    oldest_fidelity: np.ndarray
    discards: np.ndarray
    attempts: int
    successes: int
    raw_in_attempts: int
    stalled_runs: int
    analytical: object = field(default=None, repr=False)

    @property
    def mean_pairs_per_cycle(self) -> float:
        return float(self.pairs_per_cycle.mean()) if self.pairs_per_cycle.size else math.nan

    @property
    def std_pairs_per_cycle(self) -> float:
        n = self.pairs_per_cycle.size
        return float(self.pairs_per_cycle.std(ddof=1)) if n > 1 else 0.0

    @property
    def success_rate(self) -> float:
        return self.successes / self.attempts if self.attempts else math.nan

    @property
    def raw_per_success(self) -> float:
        return self.raw_in_attempts / self.successes if self.successes else math.inf

    def summary(self) -> dict:
        return {
            "distance": self.distance,
            "rounds": self.rounds,
            "runs": self.runs,
            "seed": self.seed,
            "mean_pairs_per_cycle": self.mean_pairs_per_cycle,
            "std_pairs_per_cycle": self.std_pairs_per_cycle,
            "mean_collection_time": float(self.collection_times.mean()) if self.collection_times.size else math.nan,
            "mean_window_fidelity": float(self.window_fidelity.mean()) if self.window_fidelity.size else math.nan,
            "min_oldest_fidelity": float(self.oldest_fidelity.min()) if self.oldest_fidelity.size else math.nan,
            "discards": int(self.discards.sum()),
            "attempts": self.attempts,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "raw_per_success": self.raw_per_success,
            "stalled_runs": self.stalled_runs,
        }


class _Arrivals:
    """Poisson arrival times drawn in blocks."""

    def __init__(self, rng: np.random.Generator, lam: float, block: int = 512):
        self._rng, self._scale, self._block = rng, 1.0 / lam, block
        self._t = 0.0
        self._buf: list[float] = []
        self._i = 0

    def next(self) -> float:
        if self._i == len(self._buf):
            times = self._t + np.cumsum(self._rng.exponential(self._scale, self._block))
            self._buf = times.tolist()
            self._t = self._buf[-1]
            self._i = 0
        t = self._buf[self._i]
        self._i += 1
        return t


class _SuccessTable:
    """``p_succ`` against input error, interpolated on a fixed grid."""

    def __init__(self, protocol: ProtocolSpec, p_lo: float, p_hi: float, p_local: float, points: int = 97):
        p_hi = min(max(p_hi, p_lo + 1e-9), 0.75)
        self.grid = np.linspace(p_lo, p_hi, points)
        vals = []
        for p in self.grid:
            try:
                vals.append(evaluate_protocol(protocol, float(p), p_local).p_succ)
            except DegenerateProtocolError:
                vals.append(0.0)
        self.vals = np.asarray(vals)

    def __call__(self, p: float) -> float:
        return float(np.interp(p, self.grid, self.vals))


def _plan_distance(cfg: SimConfig):
    plan = self_consistent_distance(
        cfg.strategy, cfg.protocol, cfg.link, cfg.f0, cfg.p_phys, cfg.p_l_target, f_discard=cfg.f_discard,
        a=cfg.a, c=cfg.c,
    )
    if cfg.distance is not None:
        return cfg.distance, plan
    if plan.feasible:
        return plan.distance, plan
    if plan.static_distance is not None:
        return plan.static_distance, plan
    if cfg.protocol is None:
        res = min_distance(NoisePoint(1.0 - cfg.f0, cfg.p_phys), cfg.p_l_target)
    else:
        out = evaluate_protocol(cfg.protocol, 1.0 - cfg.f0, cfg.p_phys)
        res = min_distance(NoisePoint(out.p_eff, cfg.p_phys), cfg.p_l_target)
    if not res.feasible:
        raise InvalidInputError("no code distance meets the target even without decay")
    return res.distance, plan


def simulate_operation(config: SimConfig) -> SimResult:
    """Event-driven simulation of one operation, repeated ``config.runs`` times.

    Pairs arrive as a Poisson process. Pairs older than the discard time
    are dropped from the front of the first-in-first-out buffer. With a
    protocol, each batch of ``n_pairs`` oldest raw pairs is one attempt that
    succeeds with the ``p_succ`` of its oldest input's decayed fidelity.
    Round-by-round scheduling fires a round once its quota of (distilled)
    pairs is present and the previous round has finished; pre-buffering
    waits for the whole operation's quota and then fires every round.
    """
    cfg = config
    link = cfg.link
    d, plan = _plan_distance(cfg)
    rounds = cfg.rounds or d
    n_round = pairs_per_round(d, cfg.a, cfg.c)
    proto = cfg.protocol
    t_round = link.tau_se + (distillation_depth(proto, link.tau_se) if proto is not None else 0.0)
    t_disc = discard_time(cfg.f0, link.tau_coh, cfg.f_discard)
    tau = link.tau_coh
    table = None
    if proto is not None:
        table = _SuccessTable(proto, 1.0 - cfg.f0, 1.0 - cfg.f_discard, cfg.p_phys)

    per_run_pairs: list[float] = []
    coll: list[float] = []
    window_f: list[float] = []
    oldest_f: list[float] = []
    discards = np.zeros(cfg.runs, dtype=np.int64)
    attempts = successes = raw_in_attempts = 0
    stalled = 0

    for run in range(cfg.runs):
        rng = make_rng(cfg.seed, 1, run)
        arrivals = _Arrivals(rng, link.lam)
        buf: deque[float] = deque()
        ready = 0  # distilled pairs waiting for a round
        consumed = 0
        next_allowed = 0.0
        window_open = 0.0
        now = 0.0
        ok = True
        r = 0
        run_attempts = run_successes = run_raw = 0

        def purge(t):
            cutoff = t - t_disc
            dropped = 0
            while buf and buf[0] < cutoff:
                buf.popleft()
                dropped += 1
            return dropped

        while r < rounds:
            if cfg.strategy is Strategy.PRE_BUFFERED:
                quota = n_round * (rounds if r == 0 else 0)
            else:
                quota = n_round
            have = (lambda: ready) if proto is not None else (lambda: len(buf))
            budget = cfg.max_arrivals_per_round
            while True:
                while have() < quota:
                    if budget == 0:
                        ok = False
                        break
                    budget -= 1
                    now = arrivals.next()
                    buf.append(now)
                    discards[run] += purge(now)
                    if proto is not None:
                        while len(buf) >= proto.n_pairs:
                            age = now - buf[0]
                            if age > t_disc + 1e-12:
                                raise InvariantViolation(f"distilled a pair stored {age:.6g}s > discard time")
                            f_in = cfg.f0 * math.exp(-age / tau)
                            oldest_f.append(f_in)
                            p_s = table(1.0 - f_in)
                            for _ in range(proto.n_pairs):
                                buf.popleft()
                            run_attempts += 1
                            run_raw += proto.n_pairs
                            consumed += proto.n_pairs
                            if rng.random() < p_s:
                                run_successes += 1
                                ready += 1
                if not ok:
                    break
                fire = max(now, next_allowed)
                discards[run] += purge(fire)
                if have() >= quota:
                    break
                now = fire
            if not ok:
                break
            n_fire = rounds if (cfg.strategy is Strategy.PRE_BUFFERED and r == 0) else 1
            if quota:
                coll.append(fire - window_open)
                window_f.append(cfg.f0 * math.exp(-(fire - window_open) / tau))
            if proto is None:
                if quota:
                    age = fire - buf[0]
                    if age > t_disc + 1e-12:
                        raise InvariantViolation(f"consumed a pair stored {age:.6g}s > discard time")
                    oldest_f.append(cfg.f0 * math.exp(-age / tau))
                for _ in range(quota):
                    buf.popleft()
                consumed += quota
            else:
                ready -= quota
            r += n_fire
            window_open = fire
            next_allowed = fire + n_fire * t_round
            now = fire

        if ok:
            per_run_pairs.append(consumed * d / rounds)
            attempts += run_attempts
            successes += run_successes
            raw_in_attempts += run_raw
        else:
            stalled += 1

    return SimResult(
        distance=d,
        rounds=rounds,
        runs=cfg.runs,
        seed=cfg.seed,
        pairs_per_cycle=np.asarray(per_run_pairs, dtype=float),
        collection_times=np.asarray(coll, dtype=float),
        window_fidelity=np.asarray(window_f, dtype=float),
        oldest_fidelity=np.asarray(oldest_f, dtype=float),
        discards=discards,
        attempts=attempts,
        successes=successes,
        raw_in_attempts=raw_in_attempts,
        stalled_runs=stalled,
        analytical=plan,
    )


# ---------------------------------------------------------------------------
# static cost bands


@dataclass(frozen=True)
class BandRow:
    fidelity: float
    protocol: str
    distance: int | None
    pairs_per_round: int | None
    analytical: float
    mean: float
    std: float
    runs: int
    seed: int


def cost_bands(
    grid: Sequence[float],
    protocols: Sequence[ProtocolSpec | str] | None = None,
    runs: int = 1000,
    seed: int = 0,
    p_l_target: float = 1e-3,
    p_local: float = 1e-3,
    params: FittedModelParams = DEFAULT_PARAMS,
    include_raw: bool = True,
) -> list[BandRow]:
    """Spread of raw pairs per cycle under repeat-until-success distillation.

    A cycle needs ``N = d (a d - c)`` distilled pairs; the attempts needed
    are ``N`` plus a negative-binomial number of failures, each attempt
    costing ``n_pairs`` raw pairs. Raw consumption is deterministic.
    """
    if len(grid) == 0:
        raise InvalidInputError("the fidelity grid is empty")
    if runs < 1:
        raise InvalidInputError("runs must be >= 1")
    protos = primary_protocols() if protocols is None else [
        get_protocol(p) if isinstance(p, str) else p for p in protocols
    ]
    rows = []
    for i, f in enumerate(grid):
        f = float(f)
        if include_raw:
            res = min_distance(NoisePoint(1.0 - f, p_local), p_l_target, params)
            if res.feasible:
                n = pairs_per_round(res.distance)
                cost = float(res.distance * n)
                rows.append(BandRow(f, "raw", res.distance, n, cost, cost, 0.0, runs, seed))
            else:
                rows.append(BandRow(f, "raw", None, None, math.inf, math.inf, 0.0, runs, seed))
        for proto in protos:
            try:
                out = evaluate_protocol(proto, 1.0 - f, p_local)
            except DegenerateProtocolError:
                rows.append(BandRow(f, proto.name, None, None, math.inf, math.inf, 0.0, runs, seed))
                continue
            res = min_distance(NoisePoint(out.p_eff, p_local), p_l_target, params)
            if not res.feasible:
                rows.append(BandRow(f, proto.name, None, None, math.inf, math.inf, 0.0, runs, seed))
                continue
            n = pairs_per_round(res.distance)
            needed = res.distance * n
            # keyed by name so a protocol's stream does not depend on its position
            rng = make_rng(seed, 2, i, zlib.crc32(proto.name.encode()))
            fails = rng.negative_binomial(needed, min(out.p_succ, 1.0), size=runs)
            raw = proto.n_pairs * (needed + fails).astype(float)
            std = float(raw.std(ddof=1)) if runs > 1 else 0.0
            rows.append(BandRow(
                f, proto.name, res.distance, n, proto.n_pairs * needed / out.p_succ, float(raw.mean()), std, runs, seed,
            ))
    return rows


# ---------------------------------------------------------------------------
# sampling oracle for distillation circuits


@dataclass(frozen=True)
class SampledOutcome:
    p_eff: float
    p_eff_se: float
    p_succ: float
    p_succ_se: float
    samples: int


def _rotate_frames(f: np.ndarray) -> np.ndarray:
    x, z = f & 1, f >> 1
    return (x ^ z) | (z << 1)


def _swap_frames(f: np.ndarray) -> np.ndarray:
    return (f >> 1) | ((f & 1) << 1)


def _gate_noise(rng, a: np.ndarray, b: np.ndarray, p: float) -> None:
    if p == 0.0:
        return
    hit = rng.random(a.size) < p
    mask = rng.integers(1, 16, size=a.size)
    a ^= np.where(hit, mask & 3, 0)
    b ^= np.where(hit, mask >> 2, 0)


def _bcnot(rng, ctrl: np.ndarray, tgt: np.ndarray, p: float) -> None:
    # x error copies control -> target, z error copies target -> control
    tgt ^= ctrl & 1
    ctrl ^= tgt & 2
    _gate_noise(rng, ctrl, tgt, p)
    _gate_noise(rng, ctrl, tgt, p)


def _readout_agrees(rng, err_bit: np.ndarray, p: float) -> np.ndarray:
    flips = (rng.random(err_bit.size) < p) ^ (rng.random(err_bit.size) < p)
    return (err_bit ^ flips) == 0


def _sample(protocol: ProtocolSpec, weights: np.ndarray, p: float, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    def fresh():
        return rng.choice(4, size=n, p=weights).astype(np.int64)

    target = fresh()
    ok = np.ones(n, dtype=bool)
    for step in protocol.steps:
        ancs = []
        for a in step.ancillas:
            if a is None:
                ancs.append(fresh())
            else:
                frames, good = _sample(a, weights, p, n, rng)
                ancs.append(frames)
                ok &= good
        pairs = [target, *ancs]
        if step.rotate:
            pairs = [_rotate_frames(f) for f in pairs]
        if step.basis == "X":
            pairs = [_swap_frames(f) for f in pairs]
        t, a1 = pairs[0], pairs[1]
        _bcnot(rng, t, a1, p)
        if step.kind == "double":
            a2 = pairs[2]
            _bcnot(rng, a2, a1, p)
            ok &= _readout_agrees(rng, a2 >> 1, p)
        # a1 is read after every gate touching it
        ok &= _readout_agrees(rng, a1 & 1, p)
        target = _swap_frames(t) if step.basis == "X" else t
    return target, ok


def sample_protocol_outcome(
    protocol: ProtocolSpec | str, p_raw: float, p_local: float = 1e-3, samples: int = 10**6, seed: int = 0,
    chunk: int = 250_000,
) -> SampledOutcome:
    """Monte Carlo estimate of ``(p_eff, p_succ)`` by sampling Pauli frames.

    Each raw pair starts in a Werner frame, gates spread frames as bilateral
    CNOTs do, every two-qubit gate is followed by a uniformly random
    non-identity two-pair Pauli with probability ``p_local``, and each
    one-sided readout flips with probability ``p_local``.
    """
    if isinstance(protocol, str):
        protocol = get_protocol(protocol)
    w = werner_state(1.0 - p_raw).frame_vector()
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    rng = make_rng(seed, 3)
    kept = bad = 0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        frames, ok = _sample(protocol, w, p_local, n, rng)
        kept += int(ok.sum())
        bad += int((ok & (frames != 0)).sum())
        done += n
    p_succ = kept / samples
    p_eff = bad / kept if kept else math.nan
    return SampledOutcome(
        p_eff=p_eff,
        p_eff_se=math.sqrt(max(p_eff * (1 - p_eff), 1e-300) / kept) if kept else math.inf,
        p_succ=p_succ,
        p_succ_se=math.sqrt(p_succ * (1 - p_succ) / samples),
        samples=samples,
    )
