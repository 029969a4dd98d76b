"""One-time benchmark policies.

Each baseline picks the partition point exactly once, when the task reaches
its first feasible boundary, instead of re-evaluating at every boundary.
They differ only in the objective: instantaneous utility with frozen queues,
long-term utility with a constant-queue projection, or realized long-term
utility computed from the recorded future (an upper-bound reference that no
causal policy can access).
"""

from __future__ import annotations

from .config import SimConfig
from .costs import (
    OffloadDecision,
    accuracy,
    candidate_lt_utility,
    edge_inference_delay,
    energy,
    on_device_inference_delay,
    upload_delay,
)
from .profile import DnnProfile
from .twin import TwinSnapshot


def _argmax_smallest(values: list[float], offset: int) -> int:
    best = max(values)
    for i, v in enumerate(values):
        if v == best:
            return offset + i
    raise AssertionError


def frozen_utility(
    x: int,
    t_lq_s: float,
    frozen_backlog_cycles: float,
    profile: DnnProfile,
    cfg: SimConfig,
) -> float:
    """Instantaneous utility with the edge backlog held at its current value."""
    t_lc = on_device_inference_delay(x, profile)
    t_up = upload_delay(x, profile, cfg)
    t_ec = edge_inference_delay(x, profile)
    t_eq = 0.0 if x == profile.device_only_decision else frozen_backlog_cycles / cfg.edge_freq_hz
    total = t_lq_s + t_lc + t_up + t_eq + t_ec
    e = energy(t_lc, t_ec, t_up, cfg)
    return -total + cfg.weight_acc * accuracy(x, profile, cfg) - cfg.weight_energy * e


def one_time_greedy(
    min_feasible: int,
    lq_slots: int,
    gen_queue_len: int,
    gen_backlog_cycles: float,
    profile: DnnProfile,
    cfg: SimConfig,
) -> OffloadDecision:
    """Maximize instantaneous utility with queues frozen at generation time.

    The one-time policies commit when the task is generated, so they see the
    workload of that moment: the device queue ahead of the task and the edge
    backlog, both of which may be stale by the time the upload happens.
    """
    t_lq = lq_slots * cfg.slot_duration_s
    values = [
        frozen_utility(x, t_lq, gen_backlog_cycles, profile, cfg)
        for x in range(min_feasible, profile.device_only_decision + 1)
    ]
    return OffloadDecision(_argmax_smallest(values, min_feasible), min_feasible)


def one_time_long_term(
    min_feasible: int,
    lq_slots: int,
    gen_queue_len: int,
    gen_backlog_cycles: float,
    profile: DnnProfile,
    cfg: SimConfig,
) -> OffloadDecision:
    """Maximize long-term utility with the generation-time queue projected
    constant: the inflicted queuing delay of x layers of on-device compute is
    extrapolated as queue length times compute time, and the edge backlog is
    frozen as in the greedy baseline."""
    values = []
    for x in range(min_feasible, profile.device_only_decision + 1):
        d_lq = gen_queue_len * on_device_inference_delay(x, profile)
        t_eq = 0.0 if x == profile.device_only_decision else gen_backlog_cycles / cfg.edge_freq_hz
        values.append(candidate_lt_utility(x, d_lq, t_eq, profile, cfg))
    return OffloadDecision(_argmax_smallest(values, min_feasible), min_feasible)


def one_time_ideal(
    min_feasible: int,
    snapshot: TwinSnapshot,
    profile: DnnProfile,
    cfg: SimConfig,
) -> OffloadDecision:
    """Maximize the realized long-term utility using the recorded future.

    The twin window already contains the exact queue trajectories every
    candidate would face, so the realized utility of each candidate can be
    read off directly.
    """
    values = [
        candidate_lt_utility(x, snapshot.d_lq_s(x), snapshot.t_eq_s(x), profile, cfg)
        for x in range(min_feasible, profile.device_only_decision + 1)
    ]
    return OffloadDecision(_argmax_smallest(values, min_feasible), min_feasible)
