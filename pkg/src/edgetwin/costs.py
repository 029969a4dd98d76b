"""Per-task delays, energy, accuracy, utility and the long-term utility.

Two utility views exist for one task:

* ``utility`` charges the task its own on-device queuing delay T_lq.
* ``lt_utility`` instead charges the queuing delay the task inflicts on its
  successors (D_lq). The two views have identical sums over a completed
  trace, which makes lt_utility a per-task decomposable objective.

Slot-quantized quantities (queuing and on-device compute) are carried as
integer slot counts wherever possible so the identities hold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .config import SimConfig
from .profile import DnnProfile


@dataclass(frozen=True)
class OffloadDecision:
    """Chosen partition point x and the feasibility floor it was picked from.

    x = 0 uploads the raw input (edge-only); x = exit_index + 1 runs the
    shallow network to completion on the device.
    """

    x: int
    min_feasible: int

    def __post_init__(self) -> None:
        if not self.min_feasible <= self.x:
            raise ValueError(
                f"decision x={self.x} below feasibility floor {self.min_feasible}"
            )


@dataclass(frozen=True)
class CostBreakdown:
    """Every cost component of one task under one decision."""

    t_lq_s: float
    t_lc_s: float
    t_up_s: float
    t_eq_s: float
    t_ec_s: float
    total_delay_s: float
    accuracy: float
    energy_j: float
    utility: float
    d_lq_s: float
    time_cost_s: float
    lt_utility: float
    u_pt: float


def _check_decision(x: int, profile: DnnProfile) -> None:
    if not 0 <= x <= profile.device_only_decision:
        raise ValueError(f"decision {x} outside [0, {profile.device_only_decision}]")


def on_device_inference_delay(x: int, profile: DnnProfile) -> float:
    """Seconds of on-device shallow-network compute under decision x."""
    _check_decision(x, profile)
    return profile.device_delay_s(x)


def next_local_queue_slots(prev_lq_slots: int, prev_lc_slots: int, gap_slots: int) -> int:
    """Queue-wait recursion in whole slots.

    The wait of task n+1 is the part of task n's wait-plus-compute that
    extends past the generation gap between them.
    """
    if gap_slots < 0:
        raise ValueError("generation gap must be nonnegative")
    return max(prev_lq_slots + prev_lc_slots - gap_slots, 0)


def upload_delay(x: int, profile: DnnProfile, cfg: SimConfig) -> float:
    _check_decision(x, profile)
    if x == profile.device_only_decision:
        return 0.0
    return profile.upload_bits(x) / cfg.uplink_rate_bps


def edge_queuing_delay(x: int, backlog_cycles: float, profile: DnnProfile, cfg: SimConfig) -> float:
    """Wait behind the edge backlog observed when the upload lands."""
    _check_decision(x, profile)
    if x == profile.device_only_decision:
        return 0.0
    if backlog_cycles < 0:
        raise ValueError("backlog must be nonnegative")
    return backlog_cycles / cfg.edge_freq_hz


def edge_inference_delay(x: int, profile: DnnProfile) -> float:
    _check_decision(x, profile)
    return profile.edge_delay_s(x)


def accuracy(x: int, profile: DnnProfile, cfg: SimConfig) -> float:
    """Full-size accuracy when any part runs at the edge, shallow otherwise."""
    _check_decision(x, profile)
    if x == profile.device_only_decision:
        return cfg.acc_shallow
    return cfg.acc_full


def energy(t_lc_s: float, t_ec_s: float, t_up_s: float, cfg: SimConfig) -> float:
    """Joules spent on device compute, edge compute and the uplink."""
    return (
        cfg.energy_coeff_device * cfg.device_freq_hz ** 3 * t_lc_s
        + cfg.energy_coeff_edge * cfg.edge_freq_hz ** 3 * t_ec_s
        + cfg.tx_power_w * t_up_s
    )


def utility(total_delay_s: float, acc: float, energy_j: float, cfg: SimConfig) -> float:
    return -total_delay_s + cfg.weight_acc * acc - cfg.weight_energy * energy_j


def deterministic_utility(x: int, profile: DnnProfile, cfg: SimConfig) -> float:
    """The queue-independent part of the long-term utility.

    Covers upload delay, edge compute delay and energy; everything else
    (queue waits, compute delay net of edge drain) is state-dependent or
    cancels in best-case comparisons between candidates.
    """
    t_lc = on_device_inference_delay(x, profile)
    t_up = upload_delay(x, profile, cfg)
    t_ec = edge_inference_delay(x, profile)
    return -t_up - t_ec - cfg.weight_energy * energy(t_lc, t_ec, t_up, cfg)


def pairwise_queuing_delay(
    m: int,
    n: int,
    lq_s: Sequence[float],
    lc_s: Sequence[float],
    gaps_s: Sequence[float],
) -> float:
    """Queuing delay task m inflicts on task n (both 1-indexed).

    ``gaps_s[i-1]`` is the generation gap between task i and task i+1. The
    delay is the part of m's compute time still pending when n arrives.
    """
    if m >= n:
        return 0.0
    gap = sum(gaps_s[m - 1:n - 1])
    return max(min(lq_s[m - 1] - gap, 0.0) + lc_s[m - 1], 0.0)


def long_term_queuing_delay(
    start_slot: int,
    lc_slots: int,
    queue_len_at,
    slot_duration_s: float,
) -> float:
    """Queuing delay a task inflicts on successors during its compute window.

    Sums the device queue length over the lc_slots slots starting at
    start_slot; ``queue_len_at(t)`` must report the queue length with the
    task itself already removed.
    """
    if lc_slots == 0:
        return 0.0
    total = 0
    for t in range(start_slot, start_slot + lc_slots):
        total += queue_len_at(t)
    return total * slot_duration_s


def long_term_queuing_delay_from_arrivals(
    queue_at_start: int,
    arrival_slots: Sequence[int],
    start_slot: int,
    lc_slots: int,
    slot_duration_s: float,
) -> float:
    """Closed form of the compute-window queue sum.

    ``queue_at_start`` is the queue length at start_slot excluding the task
    itself; ``arrival_slots`` lists generation slots g with
    start_slot < g <= start_slot + lc_slots - 1. No departures can occur
    inside the window because the device is busy with this task.
    """
    if lc_slots == 0:
        return 0.0
    total = queue_at_start * lc_slots
    end = start_slot + lc_slots - 1
    for g in arrival_slots:
        if not start_slot < g <= end:
            raise ValueError("arrival slot outside the compute window")
        total += end - g + 1
    return total * slot_duration_s


def min_feasible_layers(
    exit_queue_slot: int,
    transmitter_free_s: float,
    profile: DnnProfile,
    cfg: SimConfig,
) -> int:
    """Smallest decision whose upload slot is not before the transmitter frees.

    ``exit_queue_slot`` is the slot at which the task reaches the compute
    unit; decision x uploads at that slot plus x layers of compute. Capped at
    device-only when even the last boundary is too early.
    """
    for x in range(0, profile.exit_index + 1):
        upload_slot = exit_queue_slot + profile.device_slots(x)
        if upload_slot * cfg.slot_duration_s >= transmitter_free_s - 1e-12:
            return x
    return profile.device_only_decision


def candidate_lt_utility(
    x: int,
    d_lq_s: float,
    t_eq_s: float,
    profile: DnnProfile,
    cfg: SimConfig,
) -> float:
    """Long-term utility of decision x given its queue-dependent delays."""
    _check_decision(x, profile)
    t_lc = on_device_inference_delay(x, profile)
    t_up = upload_delay(x, profile, cfg)
    t_ec = edge_inference_delay(x, profile)
    acc = accuracy(x, profile, cfg)
    e = energy(t_lc, t_ec, t_up, cfg)
    time_cost = d_lq_s + t_lc + t_up + t_eq_s + t_ec
    return -time_cost + cfg.weight_acc * acc - cfg.weight_energy * e


def make_breakdown(
    x: int,
    lq_slots: int,
    d_lq_s: float,
    backlog_at_arrival: float,
    profile: DnnProfile,
    cfg: SimConfig,
) -> CostBreakdown:
    """Assemble every cost component for one task under one decision."""
    _check_decision(x, profile)
    t_lq = lq_slots * cfg.slot_duration_s
    t_lc = on_device_inference_delay(x, profile)
    t_up = upload_delay(x, profile, cfg)
    t_eq = edge_queuing_delay(x, backlog_at_arrival, profile, cfg)
    t_ec = edge_inference_delay(x, profile)
    total = t_lq + t_lc + t_up + t_eq + t_ec
    acc = accuracy(x, profile, cfg)
    e = energy(t_lc, t_ec, t_up, cfg)
    u = utility(total, acc, e, cfg)
    time_cost = d_lq_s + t_lc + t_up + t_eq + t_ec
    lt_u = -time_cost + cfg.weight_acc * acc - cfg.weight_energy * e
    return CostBreakdown(
        t_lq_s=t_lq,
        t_lc_s=t_lc,
        t_up_s=t_up,
        t_eq_s=t_eq,
        t_ec_s=t_ec,
        total_delay_s=total,
        accuracy=acc,
        energy_j=e,
        utility=u,
        d_lq_s=d_lq_s,
        time_cost_s=time_cost,
        lt_utility=lt_u,
        u_pt=deterministic_utility(x, profile, cfg),
    )
