import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from polyadic.circuit import Circuit, Input, Param, bind, compact_gate, cz, h, preset, pulse_count, rz, sx
from polyadic.passes import (cancel_double_cz, commute_rz, decompose, drop_zero_rz,
                             maximal_form_violations, merge_rz, optimize, remove_final,
                             remove_initial, resynthesize, segment_unitary, sx_needed,
                             verify_equivalence, wrap_angle)
from polyadic.simulator import distribution, tv_distance
from strategies import const_circuits, symbolic_circuits


def C(width, *gates):
    return Circuit(width, gates)


def same_up_to_phase(u, v, tol=1e-10):
    k = np.vdot(v.ravel(), u.ravel())
    return abs(abs(k) - u.shape[0]) < tol


class TestWrap:
    @given(st.floats(-100, 100))
    def test_range(self, a):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
        assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)

    def test_minus_pi_maps_to_pi(self):
        assert wrap_angle(-math.pi) == math.pi


class TestRules:
    def test_merge(self):
        assert merge_rz(C(1, rz(0, 0.3), rz(0, 0.4))).gates == (rz(0, wrap_angle(0.7)),)

    def test_merge_to_zero_then_drop(self):
        merged = merge_rz(C(1, rz(0, math.pi), rz(0, math.pi)))
        assert len(merged) == 1 and abs(merged.gates[0].angle.value) < 1e-12
        assert drop_zero_rz(merged).gates == ()

    def test_merge_blocked(self):
        c = C(1, rz(0, 0.3), sx(0), rz(0, 0.4))
        assert merge_rz(c) == c

    def test_merge_skips_symbolic(self):
        c = C(1, rz(0, Param(0)), rz(0, 0.4))
        assert merge_rz(c) == c

    def test_remove_initial_rz(self):
        assert remove_initial(C(1, rz(0, 1.2), sx(0))).gates == (sx(0),)

    def test_remove_initial_cz(self):
        assert remove_initial(C(2, sx(0), cz(0, 1), sx(1))).gates == (sx(0), sx(1))

    def test_remove_initial_keeps_touched(self):
        c = C(2, sx(0), sx(1), cz(0, 1))
        assert remove_initial(c) == c

    def test_remove_final_rz(self):
        assert remove_final(C(1, sx(0), rz(0, 2.1))).gates == (sx(0),)

    def test_remove_final_cz(self):
        assert remove_final(C(2, sx(0), sx(1), cz(0, 1))).gates == (sx(0), sx(1))

    def test_remove_final_blocked(self):
        c = C(2, sx(0), cz(0, 1), sx(1))
        assert remove_final(c) == c

    def test_double_cz(self):
        assert cancel_double_cz(C(2, cz(0, 1), cz(0, 1))).gates == ()
        assert cancel_double_cz(C(2, cz(0, 1), cz(1, 0))).gates == ()

    def test_double_cz_blocked(self):
        c = C(2, cz(0, 1), rz(0, Input(0)), cz(0, 1))
        assert cancel_double_cz(c) == c

    def test_double_cz_nested(self):
        c = C(3, sx(0), sx(1), sx(2), cz(0, 1), cz(1, 2), cz(1, 2), cz(0, 1), sx(0))
        assert cancel_double_cz(cancel_double_cz(c)).gates == (sx(0), sx(1), sx(2), sx(0))

    def test_commute_moves_rz_past_cz(self):
        c = C(2, sx(0), sx(1), rz(0, 0.5), cz(0, 1), rz(0, 0.25), sx(0))
        out = commute_rz(c)
        assert out.gates[2] == cz(0, 1)
        assert verify_equivalence(c, out)

    def test_non_native_rejected(self):
        with pytest.raises(ValueError, match="sx, rz and cz"):
            optimize(C(1, h(0)))


class TestDecompose:
    @given(st.floats(-math.pi, math.pi), st.floats(0, math.pi), st.floats(-math.pi, math.pi))
    def test_random_unitaries(self, a, b, c):
        u = oracles.rz_matrix(a) @ np.array([[math.cos(b / 2), -math.sin(b / 2)],
                                             [math.sin(b / 2), math.cos(b / 2)]]) @ oracles.rz_matrix(c)
        for force in (False, True):
            gates = decompose(u, 0, force_two=force)
            assert same_up_to_phase(segment_unitary(gates), u)
            n_sx = sum(g.kind == "sx" for g in gates)
            assert n_sx == (2 if force else sx_needed(u))

    @pytest.mark.parametrize("u, need", [
        (np.eye(2), 0),
        (oracles.rz_matrix(0.7), 0),
        (oracles.SX, 1),
        (oracles.SX @ oracles.SX, 2),
        (oracles.H, 1),
    ])
    def test_sx_needed(self, u, need):
        assert sx_needed(u) == need
        assert same_up_to_phase(segment_unitary(decompose(u)), u)

    def test_gimbal_point(self):
        # X = sx sx has |U00| = 0, the b = pi corner
        gates = decompose(oracles.SX @ oracles.SX)
        assert same_up_to_phase(segment_unitary(gates), oracles.SX @ oracles.SX)


class TestOptimize:
    def test_four_sx_vanish(self):
        out, report = optimize(C(1, sx(0), sx(0), sx(0), sx(0)))
        assert out.gates == ()
        assert tuple(report.after) == (0, 0)

    @pytest.mark.parametrize("name", ["iris2q", "xor2q", "skin3q", "synth2q"])
    def test_presets_are_fixpoints(self, name):
        c = preset(name)
        out, report = optimize(c)
        assert out == c
        assert sum(report.applications.values()) == 0

    def test_maximal_form_shape_is_fixpoint(self):
        gates = compact_gate(0, 0.3) + compact_gate(1, 0.8) + [cz(0, 1)]
        gates += [rz(0, 0.2), sx(0), rz(0, 1.1), sx(0), rz(1, 0.4), sx(1), rz(1, 0.9), sx(1), cz(0, 1)]
        gates += [rz(0, 0.5), sx(0), rz(0, 0.6), sx(0), rz(1, 0.7), sx(1), rz(1, -1.3), sx(1)]
        c = Circuit(2, tuple(gates))
        out, _ = optimize(c)
        assert out == c
        assert maximal_form_violations(c) == []

    def test_report_counts(self):
        c = C(2, rz(0, 1.0), sx(0), sx(1), cz(0, 1), cz(0, 1), sx(0), rz(0, 0.3))
        out, report = optimize(c)
        d = report.to_dict()
        assert d["applications"]["remove_initial"] >= 1
        assert d["applications"]["cancel_double_cz"] == 1
        assert d["pulses_before"] == {"one_qubit": 3, "two_qubit": 2}
        assert d["pulses_after"]["two_qubit"] == 0

    @given(const_circuits(min_width=2, max_width=4, max_gates=40))
    def test_sound_monotone_idempotent(self, c):
        out, report = optimize(c)
        assert tv_distance(distribution(out), distribution(c)) < 1e-10
        before, after = pulse_count(c), pulse_count(out)
        assert after.one_qubit_pulses <= before.one_qubit_pulses
        assert after.two_qubit_pulses <= before.two_qubit_pulses
        assert optimize(out)[0] == out
        assert maximal_form_violations(out) == []

    @given(symbolic_circuits())
    def test_symbolic_sound(self, c):
        out, _ = optimize(c)
        # removed slots stay declared, so the binding interface is unchanged
        assert (out.num_inputs, out.num_params) == (c.num_inputs, c.num_params)
        assert verify_equivalence(c, out, trials=20, seed=0, tol=1e-10)

    def test_symbolic_slot_removed_keeps_interface(self):
        c = C(1, rz(0, Input(0)), sx(0), rz(0, Input(1)), sx(0))
        out, _ = optimize(c)
        assert out.num_inputs == 2
        assert Input(0) not in [g.angle for g in out.gates]

    def test_resynthesize_only_reduces(self):
        c = C(1, sx(0), rz(0, 0.4), sx(0))
        assert resynthesize(c) == c


class TestEquivalence:
    def test_self(self):
        c = preset("xor2q")
        assert verify_equivalence(c, c, seed=0)

    def test_trailing_rz(self):
        c = preset("xor2q")
        longer = c.with_gates(c.gates + (rz(0, 0.7),))
        assert verify_equivalence(c, longer, seed=0)

    def test_counterexample(self):
        res = verify_equivalence(C(1, sx(0)), C(1, rz(0, math.pi)), trials=10, seed=0)
        assert not res
        assert res.counterexample is not None
        assert res.max_tv == pytest.approx(0.5)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            verify_equivalence(preset("xor2q"), preset("iris2q"))
