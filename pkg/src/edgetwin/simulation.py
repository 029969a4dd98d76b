"""Task-driven simulation engine.

Rather than ticking every slot, the engine advances from task to task using
the exact queue recursions: device-side waits are integer slot counts, the
edge backlog is evolved event-by-event, and each task's decision window is
reconstructed by the twin from recorded arrival streams. This is exact, not
an approximation, because nothing observable changes between events.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from . import baselines
from .config import SimConfig
from .contvalue import ContValueModel, ReplayBuffer, build_training_samples
from .costs import (
    deterministic_utility,
    make_breakdown,
    min_feasible_layers,
    on_device_inference_delay,
    candidate_lt_utility,
)
from .decision import DecisionContext, reduce_decision_space, run_decision_loop
from .profile import DnnProfile
from .simcore import DeviceArrivalTrace, EdgeBacklog, EdgeInflowTrace, stream
from .twin import TwinSnapshot, emulate_workloads, estimate_execution_slots

PROPOSED_POLICIES = ("proposed", "proposed_no_augment", "proposed_no_reduction")
BASELINE_POLICIES = ("one_time_greedy", "one_time_long_term", "one_time_ideal")
ALL_POLICIES = PROPOSED_POLICIES + BASELINE_POLICIES

TRAIN_BATCH = 64
TRAIN_STEPS_PER_TASK = 1


@dataclass
class RunResult:
    """Everything one simulated run produced, per task and aggregated."""

    policy: str
    seed: int
    train_task_count: int
    gen_slots: np.ndarray
    lq_slots: np.ndarray
    min_feasible: np.ndarray
    decisions: np.ndarray
    utilities: np.ndarray
    lt_utilities: np.ndarray
    delays: np.ndarray
    accuracies: np.ndarray
    energies: np.ndarray
    d_lq_s: np.ndarray
    evaluations: np.ndarray
    samples_per_task: list[int] = field(default_factory=list)
    loss_history: list[float] = field(default_factory=list)
    final_training_loss: float = float("nan")
    training_samples: int = 0
    augmented_samples: int = 0
    device_only_prunes: int = 0
    signaling_messages: int = 0
    total_slots: int = 0

    @property
    def task_count(self) -> int:
        return len(self.decisions)

    def eval_slice(self) -> slice:
        return slice(self.train_task_count, self.task_count)

    def eval_mean(self, arr: np.ndarray) -> float:
        s = arr[self.eval_slice()]
        return float(s.mean()) if len(s) else float("nan")


class _TrainJob:
    __slots__ = ("train_slot", "order", "decision_x", "snapshot")

    def __init__(self, train_slot: int, order: int, decision_x: int, snapshot: TwinSnapshot):
        self.train_slot = train_slot
        self.order = order
        self.decision_x = decision_x
        self.snapshot = snapshot


def run_simulation(
    cfg: SimConfig,
    profile: DnnProfile,
    policy: str,
    seed: int,
    model: ContValueModel | None = None,
) -> RunResult:
    """Simulate train + eval tasks under one policy and seed.

    Proposed-family policies train the continuation-value model online over
    the first ``cfg.train_task_count`` tasks and use the frozen model for the
    rest. A pre-built model may be passed for evaluation-only runs.
    """
    if policy not in ALL_POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    cfg.validate()
    n_tasks = cfg.total_task_count
    trace = DeviceArrivalTrace(cfg, seed, n_tasks)
    inflows = EdgeInflowTrace(cfg, seed)
    backlog = EdgeBacklog(cfg, inflows)

    # One-time baselines commit at generation time, before the task reaches
    # the head of the device queue, so they need the edge backlog as of the
    # generation slot. That slot can precede the previous task's start slot,
    # so a separate tracker (fed the same inflow events) keeps its own
    # frontier at the generation times.
    stale_state = policy in ("one_time_greedy", "one_time_long_term")
    gen_backlog = EdgeBacklog(cfg, EdgeInflowTrace(cfg, seed)) if stale_state else None
    start_slots: list[int] = []

    learned = policy in PROPOSED_POLICIES
    if learned and model is None:
        model = ContValueModel(stream(seed, "network_init"))
    train_rng = stream(seed, "training") if learned else None
    buffer = ReplayBuffer() if learned else None
    pending: list[_TrainJob] = []

    device_only = profile.device_only_decision
    le = profile.exit_index
    u_pt = [deterministic_utility(x, profile, cfg) for x in range(device_only + 1)]
    t_lc = [on_device_inference_delay(x, profile) for x in range(device_only + 1)]

    res = RunResult(
        policy=policy,
        seed=seed,
        train_task_count=min(cfg.train_task_count, trace.task_count),
        gen_slots=trace.gen_slots.copy(),
        lq_slots=np.zeros(trace.task_count, dtype=np.int64),
        min_feasible=np.zeros(trace.task_count, dtype=np.int64),
        decisions=np.zeros(trace.task_count, dtype=np.int64),
        utilities=np.zeros(trace.task_count),
        lt_utilities=np.zeros(trace.task_count),
        delays=np.zeros(trace.task_count),
        accuracies=np.zeros(trace.task_count),
        energies=np.zeros(trace.task_count),
        d_lq_s=np.zeros(trace.task_count),
        evaluations=np.zeros(trace.task_count, dtype=np.int64),
    )

    def flush_jobs(up_to_slot: int | None) -> None:
        # Jobs run in slot order; None flushes everything (end of training).
        while pending and (up_to_slot is None or pending[0].train_slot < up_to_slot):
            job = pending.pop(0)
            samples = build_training_samples(
                model, job.decision_x, job.snapshot, profile, cfg,
                augment=(policy != "proposed_no_augment"),
            )
            job.snapshot.mark_extracted()
            job.snapshot.prune()
            buffer.add(samples)
            res.samples_per_task.append(len(buffer))
            if not len(buffer):
                continue
            for _ in range(TRAIN_STEPS_PER_TASK):
                feats, targets = buffer.minibatch(train_rng, TRAIN_BATCH)
                res.loss_history.append(model.train_step(feats, targets))

    prev_lq = 0
    prev_lc_slots = 0
    transmitter_free_s = 0.0
    offload_count = 0

    for n in range(1, trace.task_count + 1):
        g = trace.gen_slot(n)
        if n == 1:
            lq = 0
        else:
            lq = max(prev_lq + prev_lc_slots - trace.gap_slots(n - 1), 0)
        t0 = g + lq
        decision_slots = estimate_execution_slots(g, lq, profile.device_delay_slots)
        t_end = decision_slots[-1]

        q0 = trace.queue_len_at(t0, n)
        backlog_t0 = backlog.state_at(t0)
        carry_in = backlog.device_inflow_at(t0)

        w_slots, w_cycles = inflows.events_in(t0, t_end + 1)
        events = list(zip(w_slots.tolist(), w_cycles.tolist()))
        if carry_in > 0:
            events.append((t0, carry_in))
        snapshot = emulate_workloads(
            n, decision_slots, q0, backlog_t0,
            trace.arrivals_in(t0, t_end).tolist(), events, cfg,
        )

        x_hat = min_feasible_layers(t0, transmitter_free_s, profile, cfg)
        res.min_feasible[n - 1] = x_hat

        training_active = learned and n <= res.train_task_count
        if learned:
            if n == res.train_task_count + 1:
                flush_jobs(None)
                res.final_training_loss = (
                    model.loss(*buffer.full()) if len(buffer) else float("nan")
                )
            elif training_active:
                flush_jobs(t0)

        def lt_at(l: int) -> float:
            return candidate_lt_utility(l, snapshot.d_lq_s(l), snapshot.t_eq_s(l), profile, cfg)

        if learned:
            dec_slot = decision_slots[x_hat]
            q_dec = snapshot.device_queue_at(dec_slot)
            if policy == "proposed_no_reduction" or x_hat == device_only:
                candidates = list(range(x_hat, device_only + 1))
                pruned_device_only = False
            else:
                frozen = snapshot.edge_backlog_at(dec_slot)
                t_lq_s = lq * cfg.slot_duration_s
                inst = [
                    baselines.frozen_utility(x, t_lq_s, frozen, profile, cfg)
                    for x in range(device_only + 1)
                ]
                candidates, pruned_device_only = reduce_decision_space(
                    x_hat, q_dec, device_only, u_pt, t_lc, inst
                )
            ctx = DecisionContext(n, x_hat, q_dec, candidates)
            decision = run_decision_loop(
                ctx, device_only, lt_at,
                lambda l: model.predict_one(l + 1, snapshot.d_lq_s(l), snapshot.t_eq_s(l)),
            )
            res.evaluations[n - 1] = ctx.evaluations_count
            res.device_only_prunes += int(pruned_device_only)
        elif stale_state:
            departed = bisect.bisect_right(start_slots, g)
            ahead = trace.queue_len_at(g, departed) - 1  # exclude the task itself
            backlog_g = gen_backlog.state_at(g)
            picker = (
                baselines.one_time_greedy
                if policy == "one_time_greedy"
                else baselines.one_time_long_term
            )
            decision = picker(x_hat, lq, ahead, backlog_g, profile, cfg)
            res.evaluations[n - 1] = device_only + 1 - x_hat
        else:
            decision = baselines.one_time_ideal(x_hat, snapshot, profile, cfg)
            res.evaluations[n - 1] = device_only + 1 - x_hat

        x = decision.x
        arrival_backlog = 0.0
        if x != device_only:
            arrival_backlog = snapshot.edge_backlog_at(decision_slots[x])
        bd = make_breakdown(x, lq, snapshot.d_lq_s(x), arrival_backlog, profile, cfg)

        if x != device_only:
            upload_slot = decision_slots[x]
            backlog.add_device_inflow(upload_slot, profile.edge_remaining_cycles(x))
            if gen_backlog is not None:
                gen_backlog.add_device_inflow(upload_slot, profile.edge_remaining_cycles(x))
            transmitter_free_s = upload_slot * cfg.slot_duration_s + bd.t_up_s
            offload_count += 1
        start_slots.append(t0)

        res.lq_slots[n - 1] = lq
        res.decisions[n - 1] = x
        res.utilities[n - 1] = bd.utility
        res.lt_utilities[n - 1] = bd.lt_utility
        res.delays[n - 1] = bd.total_delay_s
        res.accuracies[n - 1] = bd.accuracy
        res.energies[n - 1] = bd.energy_j
        res.d_lq_s[n - 1] = bd.d_lq_s

        if training_active:
            pending.append(_TrainJob(t_end, n, x, snapshot))
        else:
            snapshot.mark_extracted()
            snapshot.prune()

        prev_lq = lq
        prev_lc_slots = profile.device_slots(x)
        res.total_slots = max(res.total_slots, t_end)

    if learned and pending:
        flush_jobs(None)
        res.final_training_loss = model.loss(*buffer.full()) if len(buffer) else float("nan")
    if learned:
        res.training_samples = len(buffer)
        res.augmented_samples = buffer.augmented_count
    res.signaling_messages = res.total_slots + offload_count
    return res
