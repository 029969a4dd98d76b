"""One-time benchmark policies."""

import numpy as np
import pytest

from edgetwin.baselines import (
    frozen_utility,
    one_time_greedy,
    one_time_ideal,
    one_time_long_term,
)
from edgetwin.config import SimConfig
from edgetwin.costs import candidate_lt_utility, make_breakdown
from edgetwin.profile import default_profile
from edgetwin.twin import emulate_workloads, estimate_execution_slots

CFG = SimConfig()
PROF = default_profile(CFG)
DEV_ONLY = PROF.device_only_decision


class TestFrozenUtility:
    def test_matches_breakdown_utility(self):
        for x in range(DEV_ONLY + 1):
            bd = make_breakdown(x, 4, 0.0, 3e9, PROF, CFG)
            assert frozen_utility(x, bd.t_lq_s, 3e9, PROF, CFG) == pytest.approx(bd.utility)


class TestGreedy:
    def test_empty_system_prefers_best_static_candidate(self):
        dec = one_time_greedy(0, 0, 0, 0.0, PROF, CFG)
        best = max(
            range(DEV_ONLY + 1), key=lambda x: frozen_utility(x, 0.0, 0.0, PROF, CFG)
        )
        assert dec.x == best

    def test_huge_backlog_forces_device_only(self):
        dec = one_time_greedy(0, 0, 0, 1e13, PROF, CFG)
        assert dec.x == DEV_ONLY

    def test_respects_feasibility_floor(self):
        dec = one_time_greedy(2, 0, 0, 0.0, PROF, CFG)
        assert dec.x >= 2

    def test_ignores_device_queue(self):
        a = one_time_greedy(0, 0, 0, 2e9, PROF, CFG)
        b = one_time_greedy(0, 0, 50, 2e9, PROF, CFG)
        assert a.x == b.x


class TestLongTerm:
    def test_matches_projected_argmax(self):
        q, backlog = 3, 4e9
        dec = one_time_long_term(0, 5, q, backlog, PROF, CFG)
        vals = []
        for x in range(DEV_ONLY + 1):
            d_lq = q * PROF.device_delay_s(x)
            t_eq = 0.0 if x == DEV_ONLY else backlog / CFG.edge_freq_hz
            vals.append(candidate_lt_utility(x, d_lq, t_eq, PROF, CFG))
        assert dec.x == int(np.argmax(vals))

    def test_busy_device_discourages_long_on_device_runs(self):
        backlog = 2.0 * CFG.edge_freq_hz * PROF.device_delay_s(DEV_ONLY)
        idle = one_time_long_term(0, 0, 0, backlog, PROF, CFG)
        busy = one_time_long_term(0, 0, 200, backlog, PROF, CFG)
        assert busy.x <= idle.x

    def test_queue_wait_does_not_affect_choice(self):
        # own wait is sunk under the inflicted-delay objective
        a = one_time_long_term(0, 0, 2, 3e9, PROF, CFG)
        b = one_time_long_term(0, 90, 2, 3e9, PROF, CFG)
        assert a.x == b.x


def snapshot_with_backlogs(backlog0, events=()):
    slots = estimate_execution_slots(0, 0, PROF.device_delay_slots)
    return emulate_workloads(1, slots, 0, backlog0, [], list(events), CFG)


class TestIdeal:
    def test_picks_realized_best(self):
        snap = snapshot_with_backlogs(2e10)
        dec = one_time_ideal(0, snap, PROF, CFG)
        vals = [
            candidate_lt_utility(x, snap.d_lq_s(x), snap.t_eq_s(x), PROF, CFG)
            for x in range(DEV_ONLY + 1)
        ]
        assert dec.x == int(np.argmax(vals))

    def test_sees_future_backlog_spike(self):
        # a large inflow right after boundary 0 makes waiting costly; the
        # ideal policy offloads immediately because it sees it coming
        slots = estimate_execution_slots(0, 0, PROF.device_delay_slots)
        spike = [(1, 5e11)]
        snap = emulate_workloads(1, slots, 0, 0.0, [], spike, CFG)
        dec = one_time_ideal(0, snap, PROF, CFG)
        assert dec.x == 0

    def test_tie_breaks_to_smaller_x(self):
        # device-only vs boundary 2 can tie only by construction; instead
        # verify the rule directly on equal synthetic values
        from edgetwin.baselines import _argmax_smallest

        assert _argmax_smallest([0.4, 0.4, 0.1], 0) == 0
        assert _argmax_smallest([0.1, 0.4, 0.4], 1) == 2
