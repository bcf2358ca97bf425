from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seamplan import temporal
from seamplan.distillation import get_protocol
from seamplan.error_model import NoisePoint, min_distance
from seamplan.errors import ConvergenceError, InvalidInputError
from seamplan.temporal import (
    LinkParams,
    RegimeKind,
    Strategy,
    classify_regime,
    collection_time_stats,
    decayed_fidelity,
    discard_time,
    idle_error,
    is_fixed_point,
    min_link_efficiency,
    no_expire_bound,
    otf_condition,
    otf_stored_fidelity_bound,
    otf_threshold_rate,
    production_bound,
    self_consistent_distance,
    strategy1_stored_fidelity,
    strategy2_stored_fidelity,
)

RBR, PRE = Strategy.ROUND_BY_ROUND, Strategy.PRE_BUFFERED
F_DISCARD = 0.867


def oracle_fixed_point(strategy, f0, lam, tau_coh, mu, p_phys, target, d_max=401):
    """Least self-consistent raw distance by scanning, or None if infeasible.

    Decay grows with d, so the least fixed point is the smallest odd d whose
    own error rates already need no more than d.
    """
    eta = lam * tau_coh
    for d in range(3, d_max + 1, 2):
        c = 2 * d - 1
        n = c if strategy is RBR else d * c
        f_stored = f0 * math.exp(-n / eta)
        p_idle = 1 - math.exp(-c / (mu * eta)) if strategy is RBR else 0.0
        if p_phys + p_idle >= 0.0102:
            return None
        need = min_distance(NoisePoint(1 - f_stored, p_phys + p_idle), target, d_max=d_max).distance
        if need is None:
            return None
        if need <= d:
            window = math.log(f0 / F_DISCARD)
            if f_stored < F_DISCARD or eta < n / window * (1 + 2.33 / math.sqrt(n)):
                return None
            return d
    return None


class TestLinkParams:
    def test_from_components(self):
        link = LinkParams(interfaces=2, attempt_rate=1e4, p_herald=0.05)
        assert link.lam == pytest.approx(1000)
        assert link.eta_link == pytest.approx(1e4)

    def test_inconsistent_components(self):
        with pytest.raises(InvalidInputError):
            LinkParams(lam=999, interfaces=2, attempt_rate=1e4, p_herald=0.05)

    @pytest.mark.parametrize("kw", [{"lam": 0.0}, {"lam": 1e3, "mu": 0.5}, {"lam": 1e3, "tau_coh": 0}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidInputError):
            LinkParams(**kw)

    def test_with_eta(self):
        link = LinkParams(lam=1e3, tau_coh=10).with_eta(5e4)
        assert link.eta_link == pytest.approx(5e4) and link.tau_coh == 10


class TestClosedForms:
    def test_collection_stats(self):
        s = collection_time_stats(9, 1000)
        assert s.mean == pytest.approx(0.009)
        assert s.variance == pytest.approx(9e-6)
        assert s.t99 == pytest.approx(0.01599, abs=1e-5)
        assert collection_time_stats(1, 250).mean == pytest.approx(1 / 250)
        assert temporal.Z99 == 2.33

    def test_decay(self):
        assert decayed_fidelity(0.9, 0.0, 10) == 0.9
        assert decayed_fidelity(0.95, 0.915, 10) == pytest.approx(0.867, abs=5e-4)
        assert decayed_fidelity(0.94, 10, 65) == pytest.approx(0.81, abs=0.005)

    def test_exact_decay_flag(self):
        f = decayed_fidelity(0.9, 5.0, 10, exact=True)
        assert f == pytest.approx(0.25 + 0.65 * math.exp(-0.5))
        assert decayed_fidelity(0.9, 1e3, 10, exact=True) == pytest.approx(0.25)

    def test_discard_time(self):
        assert discard_time(0.867, 10) == 0.0
        assert discard_time(0.95, 10) == pytest.approx(0.915, abs=1e-3)
        assert discard_time(0.99, 10) == pytest.approx(10 * math.log(0.99 / 0.867), rel=1e-14)
        assert discard_time(0.99, 10) == pytest.approx(1.325, abs=2e-3)  # quoted value is rounded
        assert discard_time(0.80, 10) == 0.0

    def test_otf_condition(self):
        assert otf_condition(1e9, 1e-3, 9)
        assert not otf_condition(1.0, 1e-3, 9)

    def test_otf_boundary(self):
        root = ((2.33 + math.sqrt(2.33**2 + 36)) / 2) ** 2  # x - 2.33 sqrt(x) = 9
        lam = otf_threshold_rate(1e-3, 9)
        assert lam == pytest.approx(root / 1e-3, rel=1e-9)
        assert lam == pytest.approx(19.2e3, rel=0.01)
        assert otf_condition(lam * (1 + 1e-9), 1e-3, 9)
        assert not otf_condition(lam * (1 - 1e-6), 1e-3, 9)

    def test_otf_stored_bound(self):
        b = otf_stored_fidelity_bound(0.97, 1e-3, 10)
        assert b.fidelity == pytest.approx(0.96990, abs=1e-5)
        assert b.nu == 1e-3 / 10
        assert b.first_order == pytest.approx(0.97 * (1 - 1e-4))
        assert otf_stored_fidelity_bound(0.97, 0.0, 10).fidelity == 0.97

    def test_strategy_fidelities(self):
        assert strategy1_stored_fidelity(0.95, 9, 1e4) == pytest.approx(0.94915, abs=1e-5)
        assert strategy1_stored_fidelity(0.97, 9, 1.6e4) == pytest.approx(0.96945, abs=1e-5)
        assert strategy1_stored_fidelity(0.95, 9, math.inf) == 0.95
        assert strategy2_stored_fidelity(0.95, 1, 9, 1e4) == strategy1_stored_fidelity(0.95, 9, 1e4)
        s2 = strategy2_stored_fidelity(0.95, 5, 9, 1e4)
        assert s2 == pytest.approx(0.95 * math.exp(-4.5e-3), rel=1e-14)
        assert s2 / strategy1_stored_fidelity(0.95, 9, 1e4) == pytest.approx(math.exp(-3.6e-3), rel=1e-14)

    def test_idle_error(self):
        assert idle_error(9, 5, math.inf) == 0.0
        assert idle_error(9, 5, 1e4) == pytest.approx(1.80e-4, rel=1e-3)
        assert idle_error(9, 1, 1e4) == pytest.approx(9.0e-4, rel=1e-3)
        assert idle_error(9, 1, 1e4) / idle_error(9, 5, 1e4) == pytest.approx(5, rel=1e-3)

    @settings(max_examples=100)
    @given(d=st.integers(1, 100).map(lambda k: 2 * k + 1), f0=st.floats(0.87, 1.0))
    def test_no_expire_ratio_is_distance(self, d, f0):
        s1 = no_expire_bound(RBR, d, f0)
        s2 = no_expire_bound(PRE, d, f0)
        assert s1 == pytest.approx((2 * d - 1) / math.log(f0 / F_DISCARD), rel=1e-14)
        assert s2 / s1 == pytest.approx(d, rel=1e-14)

    def test_bounds_diverge_at_discard(self):
        assert no_expire_bound(RBR, 5, F_DISCARD) == math.inf
        assert production_bound(9, F_DISCARD) == math.inf
        assert production_bound(9, 0.95) == pytest.approx(9 / math.log(0.95 / F_DISCARD) * (1 + 2.33 / 3))


class TestSolver:
    def test_no_decay_limit(self):
        link = LinkParams(lam=1e20)
        plan = self_consistent_distance(RBR, None, link, 0.95)
        assert plan.iterations == 0 and plan.distance == plan.static_distance
        assert plan.regime.kind is RegimeKind.ON_THE_FLY

    def test_anchor_at_5khz(self):
        plan = self_consistent_distance(RBR, None, LinkParams(lam=5e3), 0.95)
        assert plan.feasible and plan.distance >= plan.static_distance
        assert plan.distance == oracle_fixed_point(RBR, 0.95, 5e3, 10, 5, 1e-3, 1e-3)

    def test_ion_trap(self):
        plan = self_consistent_distance(RBR, None, LinkParams(lam=250, tau_coh=65), 0.94)
        assert plan.regime.kind is RegimeKind.NO_EXPIRE
        assert plan.trace == (15, 17) and plan.pairs_per_round == 33

    def test_plan_fields(self):
        link = LinkParams(lam=5e3)
        plan = self_consistent_distance(RBR, None, link, 0.97)
        assert plan.nu == link.tau_se / link.tau_coh
        assert plan.effective_local == pytest.approx(1e-3 + plan.idle_error)
        assert plan.pairs_per_cycle == plan.distance * plan.pairs_per_round
        assert plan.stored_fidelity == pytest.approx(strategy1_stored_fidelity(0.97, plan.pairs_per_round, 5e4))

    def test_distilled_uses_raw_overhead(self):
        proto = get_protocol("expedient")
        plan = self_consistent_distance(RBR, proto, LinkParams(lam=1e5), 0.95)
        from seamplan.distillation import evaluate_protocol

        out = evaluate_protocol(proto, 0.05, 1e-3)
        assert plan.pairs_per_round == pytest.approx(5 / out.p_succ * (2 * plan.distance - 1))
        assert plan.t_round == pytest.approx(1e-3 * (1 + 6 / 4.8))

    def test_static_infeasible(self):
        res = self_consistent_distance(RBR, None, LinkParams(lam=1e6), 0.85)
        assert not res.feasible and res.static_distance is None

    def test_infeasible_keeps_static_seed(self):
        res = self_consistent_distance(PRE, None, LinkParams(lam=250, tau_coh=65), 0.94)
        assert not res.feasible
        assert res.static_distance == 15 and res.trace[0] == 15

    def test_convergence_error_carries_trace(self, monkeypatch):
        calls = iter(range(10**6))

        def flip(noise, target, params=None, d_max=1001):
            d = 5 if next(calls) % 2 else 7
            return type("R", (), {"feasible": True, "distance": d, "reason": ""})()

        monkeypatch.setattr(temporal, "min_distance", flip)
        with pytest.raises(ConvergenceError) as info:
            self_consistent_distance(RBR, None, LinkParams(lam=1e4), 0.97)
        assert len(info.value.trace) == temporal.MAX_ITERATIONS + 2
        assert set(info.value.trace[1:]) == {5, 7}

    @settings(max_examples=50, deadline=None)
    @given(
        f0=st.floats(0.9, 0.995),
        log_eta=st.floats(2.5, 6.5),
        target=st.sampled_from([1e-3, 1e-6, 1e-9]),
        strategy=st.sampled_from([RBR, PRE]),
    )
    def test_matches_exhaustive_oracle(self, f0, log_eta, target, strategy):
        lam = 10**log_eta / 10
        res = self_consistent_distance(strategy, None, LinkParams(lam=lam), f0, 1e-3, target, d_max=401)
        expected = oracle_fixed_point(strategy, f0, lam, 10, 5, 1e-3, target)
        assert res.distance == expected

    @settings(max_examples=50, deadline=None)
    @given(
        f0=st.floats(0.9, 0.995),
        log_eta=st.floats(3, 6.5),
        target=st.sampled_from([1e-3, 1e-6]),
        strategy=st.sampled_from([RBR, PRE]),
        proto=st.sampled_from([None, "double-select", "expedient"]),
    )
    def test_iterates_monotone_and_idempotent(self, f0, log_eta, target, strategy, proto):
        proto = None if proto is None else get_protocol(proto)
        link = LinkParams(lam=10**log_eta / 10)
        res = self_consistent_distance(strategy, proto, link, f0, 1e-3, target)
        assert list(res.trace) == sorted(res.trace)
        if res.feasible:
            assert res.distance >= res.static_distance
            assert is_fixed_point(res, link, f0, 1e-3, target, proto)
            again = self_consistent_distance(strategy, proto, link, f0, 1e-3, target)
            assert again == res


class TestRegimes:
    GRID = [0.90 + 0.01 * i for i in range(10)]

    def kinds(self, lam, proto=None, target=1e-3):
        p = None if proto is None else get_protocol(proto)
        return [classify_regime(RBR, p, LinkParams(lam=lam), f, 1e-3, target).kind for f in self.GRID]

    def test_slow_link_has_infeasible_zone(self):
        raw = self.kinds(1e3)
        assert RegimeKind.INFEASIBLE in raw
        assert any(k is not RegimeKind.INFEASIBLE for k in raw)

    def test_largest_protocol_fails_first(self):
        feasible = {
            name: sum(k is not RegimeKind.INFEASIBLE for k in self.kinds(1e3, name))
            for name in (None, "double-select", "expedient", "stringent")
        }
        assert feasible["stringent"] == min(feasible.values())
        assert feasible["stringent"] < feasible[None]

    def test_fast_link_opens_otf(self):
        assert RegimeKind.ON_THE_FLY in self.kinds(3e4)

    def test_very_fast_link_all_otf(self):
        kinds = [classify_regime(RBR, None, LinkParams(lam=1e12), f).kind for f in (0.9, 0.95, 0.99)]
        assert kinds == [RegimeKind.ON_THE_FLY] * 3

    @settings(max_examples=40, deadline=None)
    @given(f0=st.floats(0.9, 0.995), log_lam=st.floats(2, 5.5), factor=st.floats(1.0, 100.0))
    def test_otf_upward_closed_in_rate(self, f0, log_lam, factor):
        lam = 10**log_lam
        lo = classify_regime(RBR, None, LinkParams(lam=lam), f0).kind
        hi = classify_regime(RBR, None, LinkParams(lam=lam * factor), f0).kind
        if lo is RegimeKind.ON_THE_FLY:
            assert hi is RegimeKind.ON_THE_FLY
        if lo is not RegimeKind.INFEASIBLE:
            assert hi is not RegimeKind.INFEASIBLE

    @settings(max_examples=40, deadline=None)
    @given(f0=st.floats(0.9, 0.995), log_eta=st.floats(3, 6), x=st.floats(0.01, 100.0))
    def test_rescaling_keeps_feasibility(self, f0, log_eta, x):
        base = LinkParams(lam=10**log_eta / 10, tau_coh=10)
        scaled = LinkParams(lam=base.lam * x, tau_coh=10 / x)
        a = self_consistent_distance(RBR, None, base, f0)
        b = self_consistent_distance(RBR, None, scaled, f0)
        assert a.feasible == b.feasible and a.distance == b.distance

    def test_rescaling_moves_otf_boundary(self):
        base = LinkParams(lam=3e4, tau_coh=10)
        scaled = LinkParams(lam=3e3, tau_coh=100)
        assert classify_regime(RBR, None, base, 0.99).kind is RegimeKind.ON_THE_FLY
        assert classify_regime(RBR, None, scaled, 0.99).kind is RegimeKind.NO_EXPIRE


@pytest.fixture(scope="module")
def s1():
    return min_link_efficiency(0.95, 1e-3, RBR)


class TestLinkEfficiency:
    def test_finite(self, s1):
        assert math.isfinite(s1.eta_min) and s1.eta_min > 0

    def test_is_the_boundary(self, s1):
        link = LinkParams(lam=1e3)
        assert self_consistent_distance(RBR, None, link.with_eta(s1.eta_min), 0.95).feasible
        assert not self_consistent_distance(RBR, None, link.with_eta(s1.eta_min * (1 - 1e-5)), 0.95).feasible

    def test_above_bounds(self, s1):
        assert s1.eta_min >= s1.production_bound >= s1.no_expire_bound

    @pytest.mark.parametrize("strategy", [RBR, PRE])
    def test_production_bound_binds_for_lenient_target(self, strategy):
        res = min_link_efficiency(0.95, 0.3, strategy)
        assert res.eta_min >= res.production_bound * (1 - 1e-6)
        if strategy is PRE:
            assert res.eta_min == pytest.approx(res.production_bound, rel=1e-5)

    def test_prebuffering_needs_more(self, s1):
        assert min_link_efficiency(0.95, 1e-3, PRE).eta_min > s1.eta_min

    def test_diverges_at_discard(self):
        assert min_link_efficiency(F_DISCARD, 1e-3).eta_min == math.inf
        lo = min_link_efficiency(0.88, 0.05).eta_min
        hi = min_link_efficiency(0.87, 0.05).eta_min
        assert hi > lo

    def test_static_infeasible_propagates(self):
        with pytest.raises(InvalidInputError):
            min_link_efficiency(0.86 + 0.01, 1e-12, d_max=11)
