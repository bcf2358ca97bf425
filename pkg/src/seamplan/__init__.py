"""Resource planning for lattice surgery across networked quantum modules.

The package answers one question at several levels of detail: given a
Bell-pair source of some fidelity and rate, what code distance, how many raw
pairs, how much time and how many physical qubits does a logical operation
across the link need, and should the pairs be distilled first?
"""

from .budget import (
    BudgetReport,
    best_strategy_for_capacity,
    comm_qubits,
    logical_capacity,
    mem_qubits,
    total_budget,
)
from .cost_model import (
    cost_ratio,
    crossover_fidelity,
    distilled_cycle_cost,
    pairs_per_round,
    raw_cycle_cost,
    time_crossover_fidelity,
)
from .distillation import (
    BellDiagonalState,
    ProtocolOutcome,
    ProtocolSpec,
    evaluate_protocol,
    get_protocol,
    load_catalog,
    multiplexing_factor,
    overhead_factor,
    werner_state,
)
from .error_model import (
    DistanceResult,
    FittedModelParams,
    NoisePoint,
    effective_bell_threshold,
    logical_error_rate,
    min_distance,
)
from .errors import (
    CatalogError,
    ConvergenceError,
    DegenerateProtocolError,
    InvalidInputError,
    InvariantViolation,
    ModelDomainError,
    SeamPlanError,
)
from .montecarlo import SimConfig, SimResult, cost_bands, sample_protocol_outcome, simulate_collection, simulate_operation
from .temporal import (
    ConvergedPlan,
    Infeasible,
    LinkParams,
    Regime,
    RegimeKind,
    Strategy,
    classify_regime,
    min_link_efficiency,
    self_consistent_distance,
)

__version__ = "0.1.0"
