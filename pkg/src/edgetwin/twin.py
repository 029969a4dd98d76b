"""Controller-side twin of the device: execution-slot estimation and
counterfactual workload emulation.

The twin replays recorded arrival streams through the queue recursions with
the task's own departure and offload signals zeroed out. Within one task's
decision window no other departures or device offloads can occur, so the
emulated trajectories coincide with the actual ones; the twin's value is
that it can evaluate *every* candidate boundary, including ones the device
never reached.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .config import SimConfig


class TwinError(RuntimeError):
    pass


def estimate_execution_slots(gen_slot: int, lq_slots: int, device_delay_slots: Sequence[int]) -> tuple[int, ...]:
    """Slots at which the task reaches each shallow-layer boundary.

    Boundary 0 is the slot the task enters the compute unit; boundary l adds
    the first l on-device layer delays. All arithmetic is in whole slots, so
    the estimates are exact, not approximations.
    """
    if gen_slot < 0 or lq_slots < 0:
        raise ValueError("gen_slot and lq_slots must be nonnegative")
    start = gen_slot + lq_slots
    slots = [start]
    for d in device_delay_slots:
        slots.append(slots[-1] + int(d))
    return tuple(slots)


class TwinSnapshot:
    """Emulated queue trajectories over one task's decision window.

    Holds per-slot device queue lengths and edge backlogs from boundary 0
    through the last boundary, and derives the per-candidate queuing
    quantities from them. The window data is released by :meth:`prune` once
    training samples have been extracted.
    """

    def __init__(
        self,
        task_index: int,
        decision_slots: Sequence[int],
        device_queue: np.ndarray,
        edge_backlog: np.ndarray,
        cfg: SimConfig,
    ):
        self.task_index = task_index
        self.decision_slots = tuple(int(s) for s in decision_slots)
        self._device_queue = device_queue
        self._edge_backlog = edge_backlog
        self._cfg = cfg
        self._extracted = False
        self._pruned = False

    @property
    def start_slot(self) -> int:
        return self.decision_slots[0]

    @property
    def window_len(self) -> int:
        return self.decision_slots[-1] - self.decision_slots[0] + 1

    def _data(self) -> tuple[np.ndarray, np.ndarray]:
        if self._pruned:
            raise TwinError(f"snapshot for task {self.task_index} already pruned")
        return self._device_queue, self._edge_backlog

    def device_queue_at(self, t: int) -> int:
        dq, _ = self._data()
        return int(dq[t - self.start_slot])

    def edge_backlog_at(self, t: int) -> float:
        _, eb = self._data()
        return float(eb[t - self.start_slot])

    def d_lq_s(self, l: int) -> float:
        """Queuing delay inflicted on successors if the task offloads at l.

        Sum of the emulated device queue over the first l layers' compute
        slots. Zero for l = 0 (no on-device compute).
        """
        dq, _ = self._data()
        k = self.decision_slots[l] - self.start_slot
        return float(dq[:k].sum()) * self._cfg.slot_duration_s

    def t_eq_s(self, l: int) -> float:
        """Edge queuing delay if the upload lands at boundary l."""
        if l == len(self.decision_slots) - 1:
            return 0.0
        _, eb = self._data()
        k = self.decision_slots[l] - self.start_slot
        return float(eb[k]) / self._cfg.edge_freq_hz

    def mark_extracted(self) -> None:
        self._extracted = True

    def prune(self) -> None:
        """Release window data; legal only after sample extraction."""
        if self._pruned:
            raise TwinError(f"snapshot for task {self.task_index} pruned twice")
        if not self._extracted:
            raise TwinError(
                f"snapshot for task {self.task_index} pruned before extraction"
            )
        self._pruned = True
        self._device_queue = None
        self._edge_backlog = None


def emulate_workloads(
    task_index: int,
    decision_slots: Sequence[int],
    device_queue_at_start: int,
    edge_backlog_at_start: float,
    device_arrival_slots: Sequence[int],
    edge_inflow_events: Sequence[tuple[int, float]],
    cfg: SimConfig,
) -> TwinSnapshot:
    """Replay recorded inflows over the window with departures/offloads zeroed.

    ``device_queue_at_start`` excludes the task itself (it has left the queue
    for the compute unit). ``edge_inflow_events`` are (slot, cycles) pairs of
    all inflows the controller knows about, background plus any offload from
    an earlier task landing at the window's first slot; an event at slot t
    affects the backlog from slot t+1 on.
    """
    t0 = int(decision_slots[0])
    t_end = int(decision_slots[-1])
    n_slots = t_end - t0 + 1

    dq = np.full(n_slots, device_queue_at_start, dtype=np.int64)
    for g in device_arrival_slots:
        g = int(g)
        if g <= t0:
            raise TwinError("window arrival at or before the start slot")
        if g > t_end:
            raise TwinError("recorded arrival outside the window")
        dq[g - t0:] += 1

    inflow = np.zeros(n_slots, dtype=np.float64)
    for s, w in edge_inflow_events:
        s = int(s)
        if not t0 <= s <= t_end:
            raise TwinError("edge inflow record outside the window")
        if w < 0:
            raise TwinError("negative edge inflow record")
        inflow[s - t0] += w

    eb = np.empty(n_slots, dtype=np.float64)
    eb[0] = edge_backlog_at_start
    drain = cfg.edge_cycles_per_slot
    for i in range(1, n_slots):
        eb[i] = max(eb[i - 1] - drain, 0.0) + inflow[i - 1]

    return TwinSnapshot(task_index, decision_slots, dq, eb, cfg)
