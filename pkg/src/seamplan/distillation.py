"""Entanglement distillation over Bell-diagonal states with noisy local operations.

A Bell-diagonal state is tracked as a distribution over the Pauli error
frame ``(x, z)`` of one pair relative to ``|Phi+>``; the weights are stored
in the order ``(I, X, Y, Z)``. A frame index packs the two bits as
``x + 2 z``, so ``I=0, X=1, Z=2, Y=3`` internally.

Protocols are sequences of pairwise purification steps acting on a single
target pair:

``single``
    bilateral CNOT target -> ancilla, ancilla measured in the step basis on
    both sides; the step passes when the two outcomes agree.
``double``
    double selection: bilateral CNOT target -> ancilla, bilateral CNOT
    second ancilla -> ancilla, then the first ancilla is measured in the
    step basis and the second in the conjugate basis. Phase errors that the
    first ancilla would copy back onto the target are caught by the second.

A ``Z`` step catches bit-flip components of the target, an ``X`` step catches
phase-flip components (the same circuit conjugated by bilateral Hadamards).
Ancillas are raw pairs or the output of a nested protocol.

Noise: every two-qubit gate is followed by two-qubit depolarizing noise
(each of the 15 non-identity Paulis with probability ``p_local / 15``);
each single-qubit measurement outcome flips with probability ``p_local``.
A bilateral CNOT is two gates, one in each module.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import CatalogError, DegenerateProtocolError, InvalidInputError

P_SUCC_FLOOR = 1e-12
MAX_P_RAW = 0.75
DEFAULT_P_LOCAL = 1e-3
# Local error rate must stay below the bulk threshold of the fitted model.
P_LOCAL_LIMIT = 0.0102

FULL_RESTART = "full-restart"
SELECTIVE_RETRY = "selective-retry"

# public weight order (I, X, Y, Z) -> internal frame index x + 2z
_PUBLIC_TO_FRAME = (0, 1, 3, 2)


@dataclass(frozen=True)
class BellDiagonalState:
    """Weights ``(p_I, p_X, p_Y, p_Z)`` of a two-qubit Bell-diagonal state."""

    weights: tuple[float, float, float, float]

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if len(w) != 4:
            raise InvalidInputError("a Bell-diagonal state has exactly four weights")
        if min(w) < -1e-15 or abs(sum(w) - 1.0) > 1e-12:
            raise InvalidInputError(f"weights {w} are not a probability vector")
        object.__setattr__(self, "weights", tuple(max(v, 0.0) for v in w))

    @property
    def fidelity(self) -> float:
        return self.weights[0]

    @property
    def error(self) -> float:
        return 1.0 - self.weights[0]

    def frame_vector(self) -> np.ndarray:
        vec = np.zeros(4)
        for public, frame in enumerate(_PUBLIC_TO_FRAME):
            vec[frame] = self.weights[public]
        return vec

    @classmethod
    def from_frame_vector(cls, vec: np.ndarray) -> BellDiagonalState:
        vec = np.asarray(vec, dtype=float)
        vec = vec / vec.sum()
        return cls(tuple(float(vec[f]) for f in _PUBLIC_TO_FRAME))


def werner_state(fidelity: float) -> BellDiagonalState:
    """Werner state: fidelity ``F`` with the remaining weight spread evenly."""
    if not 0.0 <= fidelity <= 1.0:
        raise InvalidInputError(f"fidelity must lie in [0, 1], got {fidelity!r}")
    e = (1.0 - fidelity) / 3.0
    return BellDiagonalState((fidelity, e, e, e))


# ---------------------------------------------------------------------------
# protocol description


@dataclass(frozen=True)
class Step:
    """One purification round applied to the target pair.

    ``ancillas`` holds one entry for ``single`` and two for ``double``; each
    entry is ``None`` for a raw pair or a nested :class:`ProtocolSpec`.
    ``rotate`` applies the bilateral pi/2 rotation (Y <-> Z frame swap) to
    target and ancilla before a single-selection check.
    """

    kind: str
    basis: str
    ancillas: tuple["ProtocolSpec | None", ...]
    rotate: bool = False

    def __post_init__(self):
        if self.kind not in ("single", "double"):
            raise CatalogError(f"unknown step kind {self.kind!r}")
        if self.basis not in ("X", "Z"):
            raise CatalogError(f"step basis must be 'X' or 'Z', got {self.basis!r}")
        expected = 1 if self.kind == "single" else 2
        if len(self.ancillas) != expected:
            raise CatalogError(f"{self.kind} step needs {expected} ancilla(s)")
        if self.rotate and self.kind != "single":
            raise CatalogError("rotation is only defined for single-selection steps")

    @property
    def raw_inputs(self) -> int:
        return sum(1 if a is None else a.n_pairs for a in self.ancillas)

    @property
    def ops(self) -> int:
        # two-qubit layers plus one measurement layer, after ancilla preparation
        own = 2 if self.kind == "single" else 3
        return own + sum(0 if a is None else a.op_count for a in self.ancillas)


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    n_pairs: int
    op_count: int
    steps: tuple[Step, ...]
    restart_policy: str = FULL_RESTART
    description: str = field(default="", compare=False)

    def __post_init__(self):
        if self.n_pairs < 1 or self.op_count < 1:
            raise CatalogError(f"{self.name}: n_pairs and op_count must be positive")
        if self.restart_policy not in (FULL_RESTART, SELECTIVE_RETRY):
            raise CatalogError(f"{self.name}: unknown restart policy {self.restart_policy!r}")
        implied = 1 + sum(s.raw_inputs for s in self.steps)
        if implied != self.n_pairs:
            raise CatalogError(f"{self.name}: steps consume {implied} raw pairs, declared {self.n_pairs}")
        ops = sum(s.ops for s in self.steps)
        if ops != self.op_count:
            raise CatalogError(f"{self.name}: steps take {ops} operations, declared {self.op_count}")

    def to_dict(self) -> dict:
        out = {"name": self.name, "n_pairs": self.n_pairs, "op_count": self.op_count}
        if self.description:
            out["description"] = self.description
        out["restart_policy"] = self.restart_policy
        out["steps"] = [_step_to_dict(s) for s in self.steps]
        return out


def _step_to_dict(step: Step) -> dict:
    d = {"kind": step.kind, "basis": step.basis}
    d["ancillas"] = ["raw" if a is None else a.to_dict() for a in step.ancillas]
    if step.rotate:
        d["rotate"] = True
    return d


def protocol_from_dict(data: dict, known: dict[str, ProtocolSpec] | None = None) -> ProtocolSpec:
    """Build a :class:`ProtocolSpec` from its JSON form.

    Ancilla entries are ``"raw"``, the name of an already known protocol, or
    an inline protocol object.
    """
    known = known or {}
    allowed = {"name", "n_pairs", "op_count", "steps", "restart_policy", "description"}
    extra = set(data) - allowed
    if extra:
        raise CatalogError(f"unknown protocol keys: {sorted(extra)}")
    try:
        steps = []
        for sd in data["steps"]:
            ancillas = []
            for a in sd["ancillas"]:
                if a == "raw":
                    ancillas.append(None)
                elif isinstance(a, str):
                    if a not in known:
                        raise CatalogError(f"ancilla refers to unknown protocol {a!r}")
                    ancillas.append(known[a])
                else:
                    ancillas.append(protocol_from_dict(a, known))
            steps.append(Step(sd["kind"], sd["basis"], tuple(ancillas), bool(sd.get("rotate", False))))
        return ProtocolSpec(
            name=data["name"],
            n_pairs=int(data["n_pairs"]),
            op_count=int(data["op_count"]),
            steps=tuple(steps),
            restart_policy=data.get("restart_policy", FULL_RESTART),
            description=data.get("description", ""),
        )
    except KeyError as exc:
        raise CatalogError(f"protocol entry missing field {exc}") from None


def load_catalog(source: str | None = None) -> dict[str, ProtocolSpec]:
    """Load a protocol catalog from a JSON document (the bundled one by default).

    Entries are resolved in order, so later protocols may nest earlier ones
    by name.
    """
    if source is None:
        text = resources.files("seamplan.data").joinpath("protocols.json").read_text()
    else:
        with open(source) as fh:
            text = fh.read()
    doc = json.loads(text)
    catalog: dict[str, ProtocolSpec] = {}
    for entry in doc["protocols"]:
        spec = protocol_from_dict(entry, catalog)
        catalog[spec.name] = spec
    return catalog


def dump_catalog(protocols: Iterable[ProtocolSpec]) -> str:
    return json.dumps({"version": 1, "protocols": [p.to_dict() for p in protocols]}, indent=2)


@lru_cache(maxsize=None)
def _bundled() -> dict[str, ProtocolSpec]:
    return load_catalog()


def get_protocol(name: str) -> ProtocolSpec:
    try:
        return _bundled()[name]
    except KeyError:
        raise CatalogError(f"unknown protocol {name!r}; known: {sorted(_bundled())}") from None


# the three protocols compared against raw consumption throughout
PRIMARY_PROTOCOLS = ("double-select", "expedient", "stringent")


def primary_protocols() -> list[ProtocolSpec]:
    return [get_protocol(n) for n in PRIMARY_PROTOCOLS]


# ---------------------------------------------------------------------------
# exact evaluation


@dataclass(frozen=True)
class ProtocolOutcome:
    """Output error rate and success probability of one protocol attempt.

    ``step_pass`` holds the pass probability of each top-level step
    conditioned on all earlier steps having passed and on its ancillas
    having been prepared successfully; ``ancilla_outcomes`` mirrors the step
    ancillas (``None`` for raw pairs).
    """

    p_eff: float
    p_succ: float
    output: BellDiagonalState | None = None
    step_pass: tuple[float, ...] = ()
    ancilla_outcomes: tuple[tuple["ProtocolOutcome | None", ...], ...] = ()

    @property
    def overhead(self) -> float:
        return 1.0 / self.p_succ


RAW_OUTCOME_NAME = "raw"


def _bits(idx: np.ndarray, pair: int) -> tuple[np.ndarray, np.ndarray]:
    return (idx >> (2 * pair)) & 1, (idx >> (2 * pair + 1)) & 1


@lru_cache(maxsize=None)
def _cnot_perm(n: int, ctrl: int, tgt: int) -> np.ndarray:
    idx = np.arange(4**n)
    xc, _ = _bits(idx, ctrl)
    _, zt = _bits(idx, tgt)
    new = idx ^ (xc << (2 * tgt)) ^ (zt << (2 * ctrl + 1))
    return new


@lru_cache(maxsize=None)
def _noise_masks(n: int, a: int, b: int) -> tuple[int, ...]:
    masks = []
    for pa in range(4):
        for pb in range(4):
            if pa or pb:
                masks.append((pa << (2 * a)) | (pb << (2 * b)))
    return tuple(masks)


def _apply_cnot(vec: np.ndarray, n: int, ctrl: int, tgt: int) -> np.ndarray:
    out = np.empty_like(vec)
    out[_cnot_perm(n, ctrl, tgt)] = vec
    return out


def _apply_gate_noise(vec: np.ndarray, n: int, a: int, b: int, p: float) -> np.ndarray:
    if p == 0.0:
        return vec
    idx = np.arange(4**n)
    acc = np.zeros_like(vec)
    for m in _noise_masks(n, a, b):
        acc += vec[idx ^ m]
    return (1.0 - p) * vec + (p / 15.0) * acc


def _noisy_bilateral_cnot(vec: np.ndarray, n: int, ctrl: int, tgt: int, p: float) -> np.ndarray:
    vec = _apply_cnot(vec, n, ctrl, tgt)
    vec = _apply_gate_noise(vec, n, ctrl, tgt, p)
    return _apply_gate_noise(vec, n, ctrl, tgt, p)


def _postselect(vec: np.ndarray, n: int, pair: int, basis: str, p: float) -> np.ndarray:
    """Keep the weight where both sides' outcomes agree (after readout flips)."""
    idx = np.arange(4**n)
    x, z = _bits(idx, pair)
    syndrome = x if basis == "Z" else z
    q = 2.0 * p * (1.0 - p)  # exactly one of the two readouts flips
    return vec * np.where(syndrome == 0, 1.0 - q, q)


def _marginal_target(vec: np.ndarray, n: int) -> np.ndarray:
    return vec.reshape((4,) * n).sum(axis=tuple(range(n - 1)))


def _swap_xz(v: np.ndarray) -> np.ndarray:
    # I, X, Z, Y -> I, Z, X, Y
    return v[[0, 2, 1, 3]]


def _rotate(v: np.ndarray) -> np.ndarray:
    # x ^= z: Y <-> Z
    return v[[0, 1, 3, 2]]


def _run_step(step: Step, target: np.ndarray, ancillas: Sequence[np.ndarray], p: float) -> tuple[np.ndarray, float]:
    """Return (normalised target vector, pass probability)."""
    states = [target, *ancillas]
    if step.rotate:
        states = [_rotate(s) for s in states]
    if step.basis == "X":
        states = [_swap_xz(s) for s in states]
    n = len(states)
    vec = states[0]
    for s in states[1:]:
        vec = np.multiply.outer(s, vec).ravel()
    vec = _noisy_bilateral_cnot(vec, n, 0, 1, p)
    if step.kind == "single":
        vec = _postselect(vec, n, 1, "Z", p)
    else:
        vec = _noisy_bilateral_cnot(vec, n, 2, 1, p)
        vec = _postselect(vec, n, 1, "Z", p)
        vec = _postselect(vec, n, 2, "X", p)
    out = _marginal_target(vec, n)
    passed = float(out.sum())
    if passed < P_SUCC_FLOOR:
        raise DegenerateProtocolError("step pass probability underflowed")
    out = out / passed
    if step.basis == "X":
        out = _swap_xz(out)
    return out, passed


def _evaluate(protocol: ProtocolSpec, raw: np.ndarray, p: float) -> tuple[np.ndarray, float, ProtocolOutcome]:
    target = raw
    p_succ = 1.0
    passes = []
    children = []
    for step in protocol.steps:
        anc_vecs = []
        anc_out = []
        for a in step.ancillas:
            if a is None:
                anc_vecs.append(raw)
                anc_out.append(None)
            else:
                vec, ps, sub = _evaluate(a, raw, p)
                anc_vecs.append(vec)
                anc_out.append(sub)
                p_succ *= ps
        target, passed = _run_step(step, target, anc_vecs, p)
        p_succ *= passed
        passes.append(passed)
        children.append(tuple(anc_out))
    if p_succ < P_SUCC_FLOOR:
        raise DegenerateProtocolError(f"{protocol.name}: success probability below {P_SUCC_FLOOR}")
    state = BellDiagonalState.from_frame_vector(target)
    outcome = ProtocolOutcome(state.error, p_succ, state, tuple(passes), tuple(children))
    return target, p_succ, outcome


def _check_rates(p_raw: float, p_local: float) -> None:
    if not 0.0 <= p_raw <= MAX_P_RAW:
        raise InvalidInputError(f"p_raw must lie in [0, {MAX_P_RAW}], got {p_raw!r}")
    if not 0.0 <= p_local < P_LOCAL_LIMIT:
        raise InvalidInputError(f"p_local must lie in [0, {P_LOCAL_LIMIT}), got {p_local!r}")


def evaluate_protocol_state(
    protocol: ProtocolSpec | str, raw: BellDiagonalState, p_local: float = DEFAULT_P_LOCAL
) -> ProtocolOutcome:
    """Exact outcome of ``protocol`` when every raw input is the state ``raw``."""
    if isinstance(protocol, str):
        protocol = get_protocol(protocol)
    _check_rates(raw.error, p_local)
    return _evaluate(protocol, raw.frame_vector(), p_local)[2]


@lru_cache(maxsize=65536)
def _evaluate_werner(protocol: ProtocolSpec, p_raw: float, p_local: float) -> ProtocolOutcome:
    return _evaluate(protocol, werner_state(1.0 - p_raw).frame_vector(), p_local)[2]


def evaluate_protocol(
    protocol: ProtocolSpec | str, p_raw: float, p_local: float = DEFAULT_P_LOCAL
) -> ProtocolOutcome:
    """``(p_eff, p_succ)`` of ``protocol`` fed Werner pairs with error ``p_raw``."""
    if isinstance(protocol, str):
        protocol = get_protocol(protocol)
    _check_rates(p_raw, p_local)
    return _evaluate_werner(protocol, float(p_raw), float(p_local))


# ---------------------------------------------------------------------------
# execution overheads


def _require_success(outcome: ProtocolOutcome) -> float:
    if not outcome.p_succ > 0.0:
        raise DegenerateProtocolError("protocol never succeeds")
    return outcome.p_succ


def overhead_factor(protocol: ProtocolSpec, outcome: ProtocolOutcome) -> float:
    """Expected raw pairs per distilled pair, ``n_pairs / p_succ`` (full restart)."""
    return protocol.n_pairs / _require_success(outcome)


def selective_retry_factor(protocol: ProtocolSpec, outcome: ProtocolOutcome) -> float:
    """Expected raw pairs per distilled pair when only failed sub-circuits are redone.

    A nested ancilla is re-prepared on its own until it succeeds, without
    discarding the target. A failed top-level check still discards the
    target, and steps after the failure are never started, so their
    ancillas are not charged.
    """

    def cost(spec: ProtocolSpec, out: ProtocolOutcome) -> float:
        per_attempt = 1.0
        reach = 1.0
        for step, q, anc in zip(spec.steps, out.step_pass, out.ancilla_outcomes):
            c_step = sum(1.0 if s is None else cost(s, o) for s, o in zip(step.ancillas, anc))
            per_attempt += reach * c_step
            reach *= q
        return per_attempt / reach

    _require_success(outcome)
    return cost(protocol, outcome)


def serial_raw_cost(protocol: ProtocolSpec, outcome: ProtocolOutcome, n_round: int) -> float:
    """Expected raw pairs per syndrome round when attempts run one after another."""
    if n_round < 1:
        raise InvalidInputError("n_round must be a positive integer")
    if protocol.restart_policy == SELECTIVE_RETRY:
        return selective_retry_factor(protocol, outcome) * n_round
    return overhead_factor(protocol, outcome) * n_round


def multiplexing_factor(p_succ: float) -> int:
    """Parallel attempts ``k`` such that at least one succeeds with probability >= 0.99."""
    if not 0.0 < p_succ <= 1.0:
        raise DegenerateProtocolError(f"p_succ must lie in (0, 1], got {p_succ!r}")
    if p_succ >= 0.99:
        return 1
    k = math.log(0.01) / math.log1p(-p_succ)
    # guard against log round-off at exact integers, e.g. p_succ = 0.9
    return max(1, math.ceil(k - 1e-9))


def parallel_raw_cost(protocol: ProtocolSpec, outcome: ProtocolOutcome, n_round: int) -> int:
    """Raw pairs per round with ``k`` attempts run side by side for each purified pair.

    When successes are buffered across rounds the long-run consumption
    falls back to :func:`serial_raw_cost`.
    """
    if n_round < 1:
        raise InvalidInputError("n_round must be a positive integer")
    return n_round * protocol.n_pairs * multiplexing_factor(_require_success(outcome))


ProtocolOrRaw = Union[ProtocolSpec, None]
