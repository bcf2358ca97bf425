"""Command-line front end: ``seamplan <command> [--preset NAME | --scenario FILE]``.

Commands emit one table each, as CSV or as JSON
(``{"command", "columns", "rows"}``). Exit status is 0 on success, 2 when
every row of the result is infeasible and 1 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib import resources
from typing import Sequence

import jsonschema
import numpy as np

from . import budget as budget_mod
from . import cost_model, montecarlo, temporal
from .distillation import get_protocol
from .error_model import DEFAULT_D_MAX, FittedModelParams, NoisePoint, min_distance
from .errors import SeamPlanError

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2

DEFAULTS = {
    "p_local": 1e-3,
    "fidelity": {"start": 0.90, "stop": 0.99, "points": 150},
    "targets": [1e-3],
    "protocols": ["double-select", "expedient", "stringent"],
    "strategy": "round-by-round",
    "d_max": DEFAULT_D_MAX,
    "f_discard": temporal.DEFAULT_F_DISCARD,
    "link": {"lam": 1000.0, "tau_coh": 10.0, "mu": 5.0, "tau_se": 1e-3, "tau_reset": 0.0},
    "n_phy": 3000,
    "simulation": {"mode": "bands", "runs": 1000},
    "format": "csv",
    "seed": 0,
}

DISTANCE_COLUMNS = ("fidelity", "p_l_target", "strategy", "distance", "p_eff", "floor_distance")
COST_COLUMNS = ("p_l_target",) + cost_model.COST_CSV_COLUMNS
CROSSOVER_COLUMNS = (
    "p_l_target", "cost_crossover", "cost_last_overtaken", "time_crossover", "time_last_overtaken",
)
REGIME_COLUMNS = temporal.REGIME_CSV_COLUMNS + ("p_l_target",)
BUDGET_COLUMNS = budget_mod.BUDGET_CSV_COLUMNS + ("p_l_target",)
BANDS_COLUMNS = montecarlo.BAND_CSV_COLUMNS + ("p_l_target",)
OPERATION_COLUMNS = (
    "fidelity", "p_l_target", "strategy", "protocol", "distance", "mean", "std", "discards",
    "stalled_runs", "success_rate", "runs", "seed",
)


class UsageError(Exception):
    pass


def _data(name: str) -> str:
    return resources.files("seamplan.data").joinpath(name).read_text(encoding="utf-8")


def scenario_schema() -> dict:
    return json.loads(_data("scenario.schema.json"))


def presets() -> dict[str, dict]:
    return json.loads(_data("presets.json"))


def validate_scenario(doc: dict) -> None:
    """Raise :class:`UsageError` unless ``doc`` matches the scenario schema."""
    try:
        jsonschema.validate(doc, scenario_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"invalid scenario at {where}: {exc.message}") from None


def resolve_scenario(doc: dict) -> dict:
    """Validate ``doc`` and fill every omitted field from the pinned defaults."""
    validate_scenario(doc)
    out = json.loads(json.dumps(DEFAULTS))
    for key, val in doc.items():
        if key in ("link", "simulation") and isinstance(val, dict):
            out[key].update(val)
        else:
            out[key] = val
    # a link given by its components should not inherit the default rate
    link = doc.get("link", {})
    if "lam" not in link and any(k in link for k in ("attempt_rate", "p_herald")):
        out["link"].pop("lam", None)
    return out


def fidelities(spec) -> list[float]:
    if isinstance(spec, list):
        vals = [float(v) for v in spec]
    else:
        lo, hi = spec["start"], spec["stop"]
        if hi < lo:
            raise UsageError("fidelity sweep has stop < start")
        if "step" in spec and "points" in spec:
            raise UsageError("give either step or points, not both")
        if hi == lo:
            vals = [float(lo)]
        elif "step" in spec:
            vals = [float(v) for v in cost_model.fidelity_grid(lo, hi, spec["step"])]
        else:
            vals = [float(v) for v in np.round(np.linspace(lo, hi, spec.get("points", 150)), 12)]
    if not vals:
        raise UsageError("the fidelity sweep is empty")
    return sorted(vals)


def _params(sc: dict) -> FittedModelParams:
    return FittedModelParams(**sc.get("model", {}))


def _link(sc: dict) -> temporal.LinkParams:
    return temporal.LinkParams(**sc["link"])


def _protocols(sc: dict):
    return [get_protocol(n) for n in sc["protocols"]]


def _strategies(sc: dict) -> list[temporal.Strategy]:
    if sc["strategy"] == "both":
        return [temporal.Strategy.ROUND_BY_ROUND, temporal.Strategy.PRE_BUFFERED]
    return [temporal.Strategy(sc["strategy"])]


# ---------------------------------------------------------------------------
# commands; each returns (columns, rows, infeasible_everywhere)


def cmd_distance(sc: dict):
    params, p_loc = _params(sc), sc["p_local"]
    protos = _protocols(sc)
    rows = []
    for target in sc["targets"]:
        floor = min_distance(NoisePoint(0.0, p_loc), target, params, sc["d_max"]).distance
        for f in fidelities(sc["fidelity"]):
            for r in cost_model.evaluate_point(f, target, protos, p_loc, params, d_max=sc["d_max"]):
                rows.append({
                    "fidelity": f, "p_l_target": target, "strategy": r.protocol, "distance": r.distance,
                    "p_eff": r.p_eff, "floor_distance": floor,
                })
    return DISTANCE_COLUMNS, rows, all(r["distance"] is None for r in rows)


def cmd_cost(sc: dict):
    params, p_loc = _params(sc), sc["p_local"]
    protos = _protocols(sc)
    rows = []
    for target in sc["targets"]:
        for f in fidelities(sc["fidelity"]):
            for r in cost_model.evaluate_point(f, target, protos, p_loc, params, d_max=sc["d_max"]):
                rows.append({
                    "p_l_target": target, "fidelity": r.fidelity, "protocol": r.protocol, "distance": r.distance,
                    "pairs_per_round": r.pairs_per_round, "pairs_per_cycle": r.pairs_per_cycle,
                    "cycle_time": r.cycle_time, "optimal_flag": int(r.optimal),
                })
    return COST_COLUMNS, rows, all(not math.isfinite(r["pairs_per_cycle"]) for r in rows)


def cmd_crossover(sc: dict):
    params, p_loc = _params(sc), sc["p_local"]
    protos = _protocols(sc)
    grid = fidelities(sc["fidelity"])
    if len(grid) < 2:
        raise UsageError("a crossover search needs at least two fidelities")
    rows = []
    for target in sc["targets"]:
        cost = cost_model.crossover_fidelity(target, protos, grid, p_loc, params)
        tm = cost_model.time_crossover_fidelity(target, protos, grid, p_loc, params)
        rows.append({
            "p_l_target": target, "cost_crossover": cost.fidelity, "cost_last_overtaken": cost.last_overtaken,
            "time_crossover": tm.fidelity, "time_last_overtaken": tm.last_overtaken,
        })
    return CROSSOVER_COLUMNS, rows, all(r["cost_crossover"] is None for r in rows)


def cmd_regime(sc: dict):
    params, p_loc = _params(sc), sc["p_local"]
    link = _link(sc)
    options = [None] + _protocols(sc)
    rows = []
    for target in sc["targets"]:
        for f in fidelities(sc["fidelity"]):
            for strategy in _strategies(sc):
                for proto in options:
                    plan = temporal.self_consistent_distance(
                        strategy, proto, link, f, p_loc, target, sc["d_max"], params, sc["f_discard"],
                    )
                    static = _static_cycle_cost(proto, f, p_loc, target, params, sc["d_max"])
                    rows.append({
                        "fidelity": f, "lambda": link.lam, "strategy": strategy.value,
                        "protocol": "raw" if proto is None else proto.name,
                        "regime": plan.regime.kind.value, "distance": plan.distance,
                        "pairs_per_cycle_static": static,
                        "pairs_per_cycle_converged": plan.pairs_per_cycle if plan.feasible else math.inf,
                        "p_l_target": target,
                    })
    return REGIME_COLUMNS, rows, all(r["regime"] == temporal.RegimeKind.INFEASIBLE.value for r in rows)


def _static_cycle_cost(proto, f, p_loc, target, params, d_max) -> float:
    for r in cost_model.evaluate_point(f, target, [] if proto is None else [proto], p_loc, params, d_max=d_max):
        if r.protocol == ("raw" if proto is None else proto.name):
            return r.pairs_per_cycle
    return math.inf


def cmd_budget(sc: dict):
    params, p_loc = _params(sc), sc["p_local"]
    link = _link(sc)
    rows = []
    for target in sc["targets"]:
        for row in budget_mod.budget_sweep(
            sc["n_phy"], fidelities(sc["fidelity"]), p_loc, target, sc["protocols"], link, params,
        ):
            row["p_l_target"] = target
            rows.append(row)
    return BUDGET_COLUMNS, rows, all(r["n_logical"] < 2 for r in rows)


def cmd_simulate(sc: dict):
    params, p_loc = _params(sc), sc["p_local"]
    sim = sc["simulation"]
    seed = sc["seed"]
    rows = []
    if sim.get("mode", "bands") == "bands":
        for target in sc["targets"]:
            for b in montecarlo.cost_bands(
                fidelities(sc["fidelity"]), sc["protocols"], sim["runs"], seed, target, p_loc, params,
            ):
                rows.append({
                    "fidelity": b.fidelity, "protocol": b.protocol, "distance": b.distance,
                    "pairs_per_round": b.pairs_per_round, "pairs_per_cycle": b.analytical,
                    "cycle_time": None if b.distance is None else float(b.distance),
                    "optimal_flag": "", "mean": b.mean, "std": b.std, "runs": b.runs, "seed": b.seed,
                    "p_l_target": target,
                })
        _flag_optimal(rows)
        return BANDS_COLUMNS, rows, all(not math.isfinite(r["mean"]) for r in rows)
    link = _link(sc)
    for target in sc["targets"]:
        for f in fidelities(sc["fidelity"]):
            for strategy in _strategies(sc):
                for proto in [None] + _protocols(sc):
                    cfg = montecarlo.SimConfig(
                        link, strategy, proto, f, p_loc, target, sim.get("rounds"), sim["runs"], seed,
                        f_discard=sc["f_discard"],
                    )
                    try:
                        res = montecarlo.simulate_operation(cfg)
                    except SeamPlanError:
                        res = None
                    rows.append({
                        "fidelity": f, "p_l_target": target, "strategy": strategy.value,
                        "protocol": "raw" if proto is None else proto.name,
                        "distance": None if res is None else res.distance,
                        "mean": math.inf if res is None else res.mean_pairs_per_cycle,
                        "std": None if res is None else res.std_pairs_per_cycle,
                        "discards": None if res is None else int(res.discards.sum()),
                        "stalled_runs": None if res is None else res.stalled_runs,
                        "success_rate": None if res is None else res.success_rate,
                        "runs": sim["runs"], "seed": seed,
                    })
    return OPERATION_COLUMNS, rows, all(not math.isfinite(r["mean"] or math.inf) for r in rows)


def _flag_optimal(rows: list[dict]) -> None:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["p_l_target"], r["fidelity"]), []).append(r)
    for group in groups.values():
        for r in group:
            r["optimal_flag"] = 0
        best = min(group, key=lambda r: r["pairs_per_cycle"])  # first (raw) wins ties
        if math.isfinite(best["pairs_per_cycle"]):
            best["optimal_flag"] = 1


COMMANDS = {
    "distance": cmd_distance,
    "cost": cmd_cost,
    "crossover": cmd_crossover,
    "regime": cmd_regime,
    "budget": cmd_budget,
    "simulate": cmd_simulate,
}


# ---------------------------------------------------------------------------
# output


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, np.generic):
        return v.item()
    return v


def render(command: str, columns: Sequence[str], rows: list[dict], fmt: str) -> str:
    """Serialise a table; rows keep the deterministic order they were built in."""
    if fmt == "json":
        doc = {
            "command": command,
            "columns": list(columns),
            "rows": [{c: _json_value(r.get(c)) for c in columns} for r in rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seamplan",
        description="Bell-pair, distance and qubit budgets for lattice surgery across modules.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    src = parser.add_mutually_exclusive_group()
    src.add_argument("--scenario", metavar="FILE", help="JSON scenario document")
    src.add_argument("--preset", metavar="NAME", help="bundled scenario: " + ", ".join(sorted(presets())))
    parser.add_argument("--out", metavar="FILE", help="write here instead of stdout")
    parser.add_argument("--format", choices=("csv", "json"), help="output format (default from scenario, else csv)")
    parser.add_argument("--seed", type=int, help="master seed for simulate")
    return parser


def load_scenario(args) -> dict:
    if args.preset:
        table = presets()
        if args.preset not in table:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {', '.join(sorted(table))}")
        doc = table[args.preset]
    elif args.scenario:
        try:
            with open(args.scenario, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read scenario: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"scenario is not valid JSON: {exc}") from None
    else:
        doc = {"schema_version": 1}
    sc = resolve_scenario(doc)
    if args.format:
        sc["format"] = args.format
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be non-negative")
        sc["seed"] = args.seed
    return sc


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        sc = load_scenario(args)
        columns, rows, infeasible = COMMANDS[args.command](sc)
    except (UsageError, SeamPlanError) as exc:
        print(f"seamplan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(args.command, columns, rows, sc["format"])
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if infeasible:
        print("seamplan: every scenario point is infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
