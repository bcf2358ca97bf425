from __future__ import annotations

import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seamplan.distillation import (
    PRIMARY_PROTOCOLS,
    BellDiagonalState,
    ProtocolOutcome,
    dump_catalog,
    evaluate_protocol,
    evaluate_protocol_state,
    get_protocol,
    load_catalog,
    multiplexing_factor,
    overhead_factor,
    parallel_raw_cost,
    primary_protocols,
    protocol_from_dict,
    selective_retry_factor,
    serial_raw_cost,
    werner_state,
)
from seamplan.errors import CatalogError, DegenerateProtocolError, InvalidInputError

ALL = ("bbpssw", "dejmps", "double-select", "double-select-x", "expedient", "stringent")

# ---------------------------------------------------------------------------
# reference implementations, written independently of the library


def deutsch_round(a, b, c, d):
    """Closed-form rotated recurrence on (Phi+, Psi-, Psi+, Phi-) coefficients."""
    n = (a + b) ** 2 + (c + d) ** 2
    return (a * a + b * b) / n, 2 * c * d / n, (c * c + d * d) / n, 2 * a * b / n, n


def bennett_fidelity(f):
    """Output fidelity and success probability of one round on Werner pairs."""
    e = (1 - f) / 3
    n = f * f + 2 * f * e + 5 * e * e
    return (f * f + e * e) / n, n


PAULIS = [(0, 0), (1, 0), (1, 1), (0, 1)]  # I, X, Y, Z as (x, z) bits


def as_dist(weights):
    """Public (I, X, Y, Z) weights to a {(x, z): prob} map."""
    return dict(zip(PAULIS, weights))


def enum_single(target, ancilla, rotate, p):
    """Brute force over all 16 error configurations, then over gate faults."""
    if rotate:
        target = {(x ^ z, z): w for (x, z), w in target.items()}
        ancilla = {(x ^ z, z): w for (x, z), w in ancilla.items()}
    joint = {}
    for (e1, w1), (e2, w2) in itertools.product(target.items(), ancilla.items()):
        (x1, z1), (x2, z2) = e1, e2
        key = ((x1, z1 ^ z2), (x2 ^ x1, z2))
        joint[key] = joint.get(key, 0.0) + w1 * w2
    for _ in range(2):
        joint = two_pair_noise(joint, 0, 1, p)
    q = 2 * p * (1 - p)
    out = {}
    for pairs, w in joint.items():
        keep = (1 - q) if pairs[1][0] == 0 else q
        # the rotated protocol reports its output in the rotated frame
        out[pairs[0]] = out.get(pairs[0], 0.0) + w * keep
    total = sum(out.values())
    return [out.get(k, 0.0) / total for k in PAULIS], total


def two_pair_noise(joint, a, b, p):
    out = {}
    for pairs, w in joint.items():
        out[pairs] = out.get(pairs, 0.0) + (1 - p) * w
        for pa, pb in itertools.product(PAULIS, PAULIS):
            if pa == (0, 0) and pb == (0, 0):
                continue
            new = list(pairs)
            new[a] = (pairs[a][0] ^ pa[0], pairs[a][1] ^ pa[1])
            new[b] = (pairs[b][0] ^ pb[0], pairs[b][1] ^ pb[1])
            out[tuple(new)] = out.get(tuple(new), 0.0) + p / 15 * w
    return out


def enum_double(raw, p):
    """Brute force for the three-pair double-selection step."""
    joint = {}
    for e in itertools.product(raw.items(), repeat=3):
        pairs = [list(k) for k, _ in e]
        w = math.prod(v for _, v in e)
        # CNOT target -> a1, then a2 -> a1
        pairs[1][0] ^= pairs[0][0]
        pairs[0][1] ^= pairs[1][1]
        key = tuple(tuple(x) for x in pairs)
        joint[key] = joint.get(key, 0.0) + w
    for _ in range(2):
        joint = two_pair_noise(joint, 0, 1, p)
    step2 = {}
    for pairs, w in joint.items():
        pr = [list(x) for x in pairs]
        pr[1][0] ^= pr[2][0]
        pr[2][1] ^= pr[1][1]
        key = tuple(tuple(x) for x in pr)
        step2[key] = step2.get(key, 0.0) + w
    for _ in range(2):
        step2 = two_pair_noise(step2, 2, 1, p)
    q = 2 * p * (1 - p)
    out = {}
    for pairs, w in step2.items():
        keep = ((1 - q) if pairs[1][0] == 0 else q) * ((1 - q) if pairs[2][1] == 0 else q)
        out[pairs[0]] = out.get(pairs[0], 0.0) + w * keep
    total = sum(out.values())
    return [out.get(k, 0.0) / total for k in PAULIS], total


bell_weights = st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4).map(lambda v: [x / sum(v) for x in v]).filter(
    lambda w: w[0] >= 0.3
)


# ---------------------------------------------------------------------------


class TestStates:
    def test_werner_examples(self):
        assert werner_state(1.0).weights == (1.0, 0.0, 0.0, 0.0)
        w = werner_state(0.7).weights
        assert w[0] == pytest.approx(0.7)
        assert w[1:] == pytest.approx((0.1, 0.1, 0.1))

    @pytest.mark.parametrize("f", [-0.1, 1.1])
    def test_werner_range(self, f):
        with pytest.raises(InvalidInputError):
            werner_state(f)

    def test_bell_diagonal_validation(self):
        with pytest.raises(InvalidInputError):
            BellDiagonalState((0.5, 0.5, 0.1, 0.0))
        with pytest.raises(InvalidInputError):
            BellDiagonalState((0.5, 0.5, 0.0))
        s = BellDiagonalState((0.9, 0.05, 0.03, 0.02))
        assert BellDiagonalState.from_frame_vector(s.frame_vector()) == s


class TestCatalog:
    @pytest.mark.parametrize(
        "name,n_pairs,ops",
        [("bbpssw", 2, 2), ("dejmps", 2, 2), ("double-select", 3, 3), ("expedient", 5, 6), ("stringent", 13, 18)],
    )
    def test_counts(self, name, n_pairs, ops):
        p = get_protocol(name)
        assert (p.n_pairs, p.op_count) == (n_pairs, ops)

    def test_primary_set(self):
        assert tuple(p.name for p in primary_protocols()) == PRIMARY_PROTOCOLS

    def test_unknown_protocol(self):
        with pytest.raises(CatalogError):
            get_protocol("nope")

    def test_round_trip(self, tmp_path):
        cat = load_catalog()
        path = tmp_path / "cat.json"
        path.write_text(dump_catalog(cat.values()))
        again = load_catalog(str(path))
        assert again == cat
        for name in ALL:
            assert evaluate_protocol(again[name], 0.08, 1e-3) == evaluate_protocol(cat[name], 0.08, 1e-3)

    def test_unknown_key_rejected(self):
        d = get_protocol("bbpssw").to_dict()
        d["colour"] = "red"
        with pytest.raises(CatalogError):
            protocol_from_dict(d)

    def test_inconsistent_counts_rejected(self):
        d = get_protocol("expedient").to_dict()
        d["n_pairs"] = 6
        with pytest.raises(CatalogError):
            protocol_from_dict(d)

    def test_unknown_ancilla_reference(self):
        d = {"name": "x", "n_pairs": 4, "op_count": 5,
             "steps": [{"kind": "single", "basis": "Z", "ancillas": ["double-select"]}]}
        with pytest.raises(CatalogError):
            protocol_from_dict(d)
        assert protocol_from_dict(d, {"double-select": get_protocol("double-select")}).n_pairs == 4

    def test_user_catalog_file(self, tmp_path):
        doc = {"protocols": [get_protocol("bbpssw").to_dict() | {"name": "mine"}]}
        path = tmp_path / "c.json"
        path.write_text(json.dumps(doc))
        assert set(load_catalog(str(path))) == {"mine"}


class TestClosedForms:
    @pytest.mark.parametrize("f", [0.6, 0.75, 0.9, 0.97, 0.999])
    def test_bennett_werner(self, f):
        ref_f, ref_n = bennett_fidelity(f)
        for name in ("bbpssw", "dejmps"):
            out = evaluate_protocol(name, 1 - f, 0.0)
            assert out.output.fidelity == pytest.approx(ref_f, abs=1e-12)
            assert out.p_succ == pytest.approx(ref_n, abs=1e-12)

    def test_dejmps_at_0p9(self):
        out = evaluate_protocol("dejmps", 0.1, 0.0)
        assert out.p_succ == pytest.approx(788 / 900, abs=1e-12)
        assert out.output.fidelity == pytest.approx(730 / 788, abs=1e-12)
        assert out.output.fidelity == pytest.approx(0.9264, abs=1e-4)

    @settings(max_examples=200, deadline=None)
    @given(w=bell_weights)
    def test_dejmps_general_input(self, w):
        i, x, y, z = w
        a, b, c, d, n = deutsch_round(i, y, x, z)
        out = evaluate_protocol_state("dejmps", BellDiagonalState(tuple(w)), 0.0)
        assert out.p_succ == pytest.approx(n, abs=1e-12)
        assert out.output.weights == pytest.approx((a, c, b, d), abs=1e-12)

    def test_double_round_dejmps_composes(self):
        w = (0.8, 0.1, 0.06, 0.04)
        a, b, c, d, _ = deutsch_round(w[0], w[2], w[1], w[3])
        a2, b2, c2, d2, _ = deutsch_round(a, b, c, d)
        once = evaluate_protocol_state("dejmps", BellDiagonalState(w), 0.0).output
        twice = evaluate_protocol_state("dejmps", once, 0.0).output
        assert twice.weights == pytest.approx((a2, c2, b2, d2), abs=1e-12)


class TestEnumerationOracle:
    @settings(max_examples=60, deadline=None)
    @given(w=bell_weights, p=st.floats(0.0, 0.01))
    def test_single_steps(self, w, p):
        for name, rotate in (("bbpssw", False), ("dejmps", True)):
            ref, passed = enum_single(as_dist(w), as_dist(w), rotate, p)
            out = evaluate_protocol_state(name, BellDiagonalState(tuple(w)), p)
            assert out.p_succ == pytest.approx(passed, abs=1e-12)
            assert out.output.weights == pytest.approx(ref, abs=1e-9)

    @pytest.mark.parametrize("f", [0.7, 0.9, 0.99])
    @pytest.mark.parametrize("p", [0.0, 1e-3, 5e-3])
    def test_double_select(self, f, p):
        ref, passed = enum_double(as_dist(werner_state(f).weights), p)
        out = evaluate_protocol("double-select", 1 - f, p)
        assert out.p_succ == pytest.approx(passed, abs=1e-12)
        assert out.output.weights == pytest.approx(ref, abs=1e-9)

    def test_x_variant_is_conjugate(self):
        # swapping X and Z on input and output maps the two double-select variants onto each other
        w = (0.85, 0.07, 0.05, 0.03)
        sw = (w[0], w[3], w[2], w[1])
        a = evaluate_protocol_state("double-select", BellDiagonalState(w), 1e-3)
        b = evaluate_protocol_state("double-select-x", BellDiagonalState(sw), 1e-3)
        assert a.p_succ == pytest.approx(b.p_succ, abs=1e-14)
        o = b.output.weights
        assert a.output.weights == pytest.approx((o[0], o[3], o[2], o[1]), abs=1e-14)


class TestProtocolBehaviour:
    @pytest.mark.parametrize("name", ALL)
    def test_noiseless_fixed_point(self, name):
        out = evaluate_protocol(name, 0.0, 0.0)
        assert out.p_eff == pytest.approx(0.0, abs=1e-15) and out.p_succ == pytest.approx(1.0, abs=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(p_raw=st.floats(1e-4, 0.25), name=st.sampled_from(ALL))
    def test_improves_with_perfect_gates(self, p_raw, name):
        out = evaluate_protocol(name, p_raw, 0.0)
        assert out.p_eff < p_raw
        assert 0.0 < out.p_succ <= 1.0

    @pytest.mark.parametrize("name", ALL)
    @pytest.mark.parametrize("p_local", [0.0, 1e-3])
    def test_success_non_increasing(self, name, p_local):
        grid = np.linspace(0.0, 0.3, 61)
        ps = [evaluate_protocol(name, float(p), p_local).p_succ for p in grid]
        assert all(b <= a + 1e-13 for a, b in zip(ps, ps[1:]))

    def test_stronger_protocols_cleaner(self):
        for p in (0.02, 0.05, 0.1):
            e = [evaluate_protocol(n, p, 1e-3).p_eff for n in ("double-select", "expedient", "stringent")]
            assert e[0] > e[1] > e[2]

    def test_gate_noise_floor(self):
        # local noise leaves a residual error even for perfect inputs
        assert evaluate_protocol("expedient", 0.0, 1e-3).p_eff > 0.0

    def test_nested_success_product(self):
        out = evaluate_protocol("stringent", 0.05, 1e-3)
        prod = math.prod(out.step_pass)
        for anc in out.ancilla_outcomes:
            for sub in anc:
                if sub is not None:
                    prod *= sub.p_succ
        assert out.p_succ == pytest.approx(prod, rel=1e-12)

    def test_double_select_anchor_cost(self):
        # distilling at p_raw = 0.0136 and then running at the matching distance d = 5
        out = evaluate_protocol("double-select", 0.0136, 1e-3)
        cost = 3 / out.p_succ * 5 * 9
        assert cost == pytest.approx(140.99, rel=0.02)

    @pytest.mark.parametrize("p_raw", [-0.01, 0.76])
    def test_rate_domain(self, p_raw):
        with pytest.raises(InvalidInputError):
            evaluate_protocol("bbpssw", p_raw, 1e-3)

    def test_local_domain(self):
        with pytest.raises(InvalidInputError):
            evaluate_protocol("bbpssw", 0.1, 0.0102)


class TestOverheads:
    def test_multiplexing_examples(self):
        assert multiplexing_factor(0.9) == 2
        assert multiplexing_factor(0.5) == 7
        assert multiplexing_factor(1.0) == 1
        assert multiplexing_factor(0.995) == 1

    @pytest.mark.parametrize("p", [0.0, -0.1, 1.5])
    def test_multiplexing_degenerate(self, p):
        with pytest.raises(DegenerateProtocolError):
            multiplexing_factor(p)

    @settings(max_examples=200, deadline=None)
    @given(p=st.floats(1e-6, 1.0))
    def test_multiplexing_is_minimal(self, p):
        k = multiplexing_factor(p)
        assert 1 - (1 - p) ** k >= 0.99 - 1e-12
        assert k == 1 or 1 - (1 - p) ** (k - 1) < 0.99

    def test_parallel_examples(self):
        ds = get_protocol("double-select")
        assert parallel_raw_cost(ds, ProtocolOutcome(0.01, 0.9), 9) == 54
        assert parallel_raw_cost(ds, ProtocolOutcome(0.01, 1.0), 9) == 27
        assert parallel_raw_cost(get_protocol("stringent"), ProtocolOutcome(0.01, 0.5), 13) == 1183

    def test_serial_examples(self):
        ds = get_protocol("double-select")
        assert serial_raw_cost(ds, ProtocolOutcome(0.01, 1.0), 9) == pytest.approx(27)
        assert serial_raw_cost(ds, ProtocolOutcome(0.01, 0.5), 9) == pytest.approx(54)

    def test_degenerate_outcome(self):
        with pytest.raises(DegenerateProtocolError):
            overhead_factor(get_protocol("expedient"), ProtocolOutcome(0.1, 0.0))

    @pytest.mark.parametrize("name", ALL)
    @pytest.mark.parametrize("p_raw", [0.01, 0.1, 0.2])
    def test_selective_retry_never_worse(self, name, p_raw):
        proto = get_protocol(name)
        out = evaluate_protocol(proto, p_raw, 1e-3)
        sel = selective_retry_factor(proto, out)
        assert proto.n_pairs <= sel + 1e-12
        assert sel <= overhead_factor(proto, out) + 1e-12

    def test_selective_retry_single_step(self):
        # a single top-level step with raw ancillas has nothing to retry selectively
        proto = get_protocol("bbpssw")
        out = evaluate_protocol(proto, 0.1, 1e-3)
        assert selective_retry_factor(proto, out) == pytest.approx(overhead_factor(proto, out), rel=1e-14)
