"""Exact toy solvers and their agreement with each other and the live rule."""

import numpy as np
import pytest

from edgetwin.decision import reduce_decision_space
from edgetwin.oracle import (
    ToyInstance,
    backward_induction,
    enumerate_stopping_rules,
    fixed_decision_values,
    induced_policy_value,
    random_instance,
    toy_reduction_inputs,
)


def deterministic_instance(const=(0.5, 0.45, 0.3)):
    # no randomness at all: every trajectory is a single path
    return ToyInstance(
        exit_index=1,
        arrival_prob=0.0,
        inflow_support=((0, 1.0),),
        q_device0=1,
        q_edge0=2,
        const=const,
        slot_s=0.01,
    )


class TestValidation:
    def test_bad_probability_sum(self):
        with pytest.raises(ValueError):
            ToyInstance(1, 0.5, ((0, 0.5), (1, 0.4)), 0, 0, (0, 0, 0), 0.01)

    def test_const_length(self):
        with pytest.raises(ValueError):
            ToyInstance(1, 0.5, ((0, 1.0),), 0, 0, (0, 0), 0.01)

    def test_exit_index_range(self):
        with pytest.raises(ValueError):
            ToyInstance(3, 0.5, ((0, 1.0),), 0, 0, (0,) * 5, 0.01)


class TestHandComputed:
    def test_deterministic_path(self):
        inst = deterministic_instance()
        s = inst.slot_s
        # boundary 0: wait 2 backlog units
        stop0 = -2 * s + 0.5
        # boundary 1: dlq grew by the one queued task, backlog drained to 1
        stop1 = -(1 + 1) * s - 1 * s + 0.45
        # device-only: one more slot of compute adds the queued task again
        term = -(2 + 2) * s + 0.3
        res = backward_induction(inst)
        assert res.optimal_value == pytest.approx(max(stop0, stop1, term))
        assert enumerate_stopping_rules(inst) == pytest.approx(res.optimal_value)

    def test_fixed_decisions_match_path(self):
        inst = deterministic_instance()
        s = inst.slot_s
        vals = fixed_decision_values(inst)
        assert vals[0] == pytest.approx(-2 * s + 0.5)
        assert vals[1] == pytest.approx(-3 * s + 0.45)
        assert vals[2] == pytest.approx(-4 * s + 0.3)


class TestSolverAgreement:
    def test_backward_equals_enumeration(self):
        rng = np.random.default_rng(100)
        for _ in range(30):
            inst = random_instance(rng)
            bi = backward_induction(inst).optimal_value
            en = enumerate_stopping_rules(inst)
            assert abs(bi - en) < 1e-12

    def test_exact_continuation_recovers_optimum(self):
        rng = np.random.default_rng(101)
        for _ in range(20):
            inst = random_instance(rng)
            res = backward_induction(inst)
            val = induced_policy_value(inst, lambda *s: res.cont_values[s])
            assert val == pytest.approx(res.optimal_value, abs=1e-12)

    def test_zero_continuation_never_beats_optimum(self):
        rng = np.random.default_rng(102)
        for _ in range(20):
            inst = random_instance(rng)
            opt = backward_induction(inst).optimal_value
            naive = induced_policy_value(inst, lambda *_: 0.0)
            assert naive <= opt + 1e-12

    def test_fixed_decisions_bounded_by_optimum(self):
        rng = np.random.default_rng(103)
        for _ in range(20):
            inst = random_instance(rng)
            opt = backward_induction(inst).optimal_value
            assert max(fixed_decision_values(inst)) <= opt + 1e-12


class TestReductionSoundness:
    def test_best_fixed_decision_survives(self):
        rng = np.random.default_rng(104)
        for _ in range(50):
            inst = random_instance(rng)
            u_pt, t_lc, inst_u = toy_reduction_inputs(inst)
            survivors, _ = reduce_decision_space(
                0, inst.q_device0, inst.device_only, u_pt, t_lc, inst_u
            )
            vals = fixed_decision_values(inst)
            best = max(vals)
            best_survivor = max(vals[x] for x in survivors)
            assert best_survivor == pytest.approx(best, abs=1e-12)


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(105)
        inst = random_instance(rng)
        assert ToyInstance.from_json(inst.to_json()) == inst


class TestEnumerationGuard:
    def test_oversized_instance_rejected(self):
        wide = tuple((u, 0.2) for u in range(5))
        inst = ToyInstance(2, 0.5, wide, 0, 0, (0.0,) * 4, 0.01)
        with pytest.raises(ValueError):
            enumerate_stopping_rules(inst)
