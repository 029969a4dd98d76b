"""Per-boundary stop/continue rule and candidate-set reduction.

At each surviving layer boundary the device compares the utility of
offloading now against an estimate of the best utility attainable by
continuing. Before the loop starts, candidates that can never win under the
current device queue are pruned with two necessary conditions that need only
deterministic per-candidate quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .costs import OffloadDecision


@dataclass
class DecisionContext:
    """State of one task's decision episode."""

    task_index: int
    min_feasible: int
    device_queue_at_start: int
    candidate_set: list[int]
    evaluations_count: int = 0
    device_only_pruned: bool = False
    step_log: list[tuple[int, float, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.candidate_set:
            raise RuntimeError("empty candidate set (feasibility floor is never prunable)")
        if self.min_feasible not in self.candidate_set:
            raise RuntimeError("feasibility floor missing from candidate set")


def should_stop(lt_utility: float, cont_value: float) -> bool:
    """Stop (offload now) when continuing cannot promise strictly more."""
    return lt_utility >= cont_value


def reduce_decision_space(
    min_feasible: int,
    device_queue: int,
    device_only: int,
    u_pt: Sequence[float],
    t_lc: Sequence[float],
    inst_utility: Sequence[float],
) -> tuple[list[int], bool]:
    """Prune candidates that are dominated under the current device queue.

    An edge candidate l survives only if its deterministic utility beats
    every earlier reachable candidate x by at least the extra queuing delay
    device_queue * (t_lc[l] - t_lc[x]) that the longer on-device run
    inflicts. When only the floor and the device-only candidate remain, the
    device-only candidate additionally must beat the floor on current-state
    utility by the same margin; ``inst_utility`` holds those current-state
    utilities. Returns the surviving set and whether the device-only
    candidate was removed by the second check.
    """
    if min_feasible == device_only:
        return [device_only], False
    survivors = []
    for l in range(min_feasible, device_only):
        ok = all(
            u_pt[l] >= u_pt[x] + device_queue * (t_lc[l] - t_lc[x])
            for x in range(min_feasible, l)
        )
        if ok:
            survivors.append(l)
    device_only_pruned = False
    if survivors == [min_feasible]:
        margin = device_queue * (t_lc[device_only] - t_lc[min_feasible])
        if inst_utility[device_only] >= inst_utility[min_feasible] + margin:
            survivors.append(device_only)
        else:
            device_only_pruned = True
    else:
        survivors.append(device_only)
    return survivors, device_only_pruned


def run_decision_loop(
    ctx: DecisionContext,
    device_only: int,
    lt_utility_at: Callable[[int], float],
    cont_value_at: Callable[[int], float],
) -> OffloadDecision:
    """Walk the surviving boundaries in order and stop at the first winner.

    Eliminated boundaries are passed through without evaluation. If the
    device-only candidate was pruned, the last surviving edge boundary is a
    forced stop and consumes no evaluation either.
    """
    edge_cands = sorted(l for l in ctx.candidate_set if l < device_only)
    has_device_only = device_only in ctx.candidate_set
    for i, l in enumerate(edge_cands):
        forced = (i == len(edge_cands) - 1) and not has_device_only
        if forced:
            return OffloadDecision(l, ctx.min_feasible)
        lt = lt_utility_at(l)
        cont = cont_value_at(l)
        ctx.evaluations_count += 1
        ctx.step_log.append((l, lt, cont))
        if should_stop(lt, cont):
            return OffloadDecision(l, ctx.min_feasible)
    return OffloadDecision(device_only, ctx.min_feasible)
