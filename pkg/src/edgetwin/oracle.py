"""Exact solvers on tiny enumerable instances, used to validate the
stop/continue rule and the candidate-set reduction.

A toy instance has one-slot layers, a Bernoulli device arrival process and a
finite-support edge inflow process measured in whole units of per-slot drain
capacity, so the reachable state space is a small discrete tree. Two
independent solvers are provided: backward induction over states, and brute
force over every deterministic history-measurable stopping rule.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class ToyInstance:
    """A small stopping problem with exhaustively enumerable outcomes.

    Candidate x runs x one-slot layers on the device then offloads;
    x = exit_index + 1 is device-only. Edge backlog is kept in units of one
    slot's drain capacity, so waiting time is backlog * slot_s. ``const``
    holds the queue-independent utility of each candidate (upload and edge
    compute delays, accuracy reward, energy penalty, already weighted).
    """

    exit_index: int
    arrival_prob: float
    inflow_support: tuple[tuple[int, float], ...]
    q_device0: int
    q_edge0: int
    const: tuple[float, ...]
    slot_s: float

    def __post_init__(self) -> None:
        if not 1 <= self.exit_index <= 2:
            raise ValueError("exit_index must be 1 or 2")
        if len(self.const) != self.exit_index + 2:
            raise ValueError("const needs one entry per candidate")
        if abs(sum(p for _, p in self.inflow_support) - 1.0) > 1e-12:
            raise ValueError("inflow probabilities must sum to 1")
        if any(u < 0 for u, _ in self.inflow_support):
            raise ValueError("inflow units must be nonnegative")
        if not 0.0 <= self.arrival_prob <= 1.0:
            raise ValueError("arrival_prob must be a probability")

    @property
    def device_only(self) -> int:
        return self.exit_index + 1

    def stop_utility(self, l: int, q_edge: int, dlq_units: int) -> float:
        """Long-term utility of offloading at boundary l in the given state."""
        t_eq = q_edge * self.slot_s if l <= self.exit_index else 0.0
        return -(dlq_units + l) * self.slot_s - t_eq + self.const[l]

    def terminal_utility(self, q_device: int, dlq_units: int) -> float:
        """Long-term utility of finishing on-device, given the state at the
        last stoppable boundary; the remaining slot adds q_device waiters."""
        return self.stop_utility(self.device_only, 0, dlq_units + q_device)

    def branches(self) -> list[tuple[float, int, int]]:
        """(probability, arrival, inflow_units) outcomes of one slot."""
        p = self.arrival_prob
        out = []
        for a, pa in ((1, p), (0, 1.0 - p)):
            if pa == 0.0:
                continue
            for u, pw in self.inflow_support:
                if pw == 0.0:
                    continue
                out.append((pa * pw, a, u))
        return out

    def step(self, q_device: int, q_edge: int, dlq_units: int, a: int, w: int):
        return q_device + a, max(q_edge - 1, 0) + w, dlq_units + q_device

    def to_json(self) -> str:
        return json.dumps(
            {
                "exit_index": self.exit_index,
                "arrival_prob": self.arrival_prob,
                "inflow_support": [list(b) for b in self.inflow_support],
                "q_device0": self.q_device0,
                "q_edge0": self.q_edge0,
                "const": list(self.const),
                "slot_s": self.slot_s,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ToyInstance":
        d = json.loads(text)
        return cls(
            exit_index=int(d["exit_index"]),
            arrival_prob=float(d["arrival_prob"]),
            inflow_support=tuple((int(u), float(p)) for u, p in d["inflow_support"]),
            q_device0=int(d["q_device0"]),
            q_edge0=int(d["q_edge0"]),
            const=tuple(float(c) for c in d["const"]),
            slot_s=float(d["slot_s"]),
        )


class OracleResult:
    def __init__(self, optimal_value: float, cont_values, state_values):
        self.optimal_value = optimal_value
        self.cont_values = cont_values
        self.state_values = state_values


def backward_induction(inst: ToyInstance) -> OracleResult:
    """Exact continuation values and the optimal expected utility.

    The value of a state is the better of stopping now and the expected
    value of the next boundary's state; at the last stoppable boundary the
    continuation is the deterministic device-only finish.
    """
    le = inst.exit_index
    cont: dict = {}
    value: dict = {}

    @lru_cache(maxsize=None)
    def v(l: int, qd: int, qe: int, dlq: int) -> float:
        if l == le:
            c = inst.terminal_utility(qd, dlq)
        else:
            c = 0.0
            for p, a, w in inst.branches():
                c += p * v(l + 1, *inst.step(qd, qe, dlq, a, w))
        stop = inst.stop_utility(l, qe, dlq)
        cont[(l, qd, qe, dlq)] = c
        val = max(stop, c)
        value[(l, qd, qe, dlq)] = val
        return val

    best = v(0, inst.q_device0, inst.q_edge0, 0)
    return OracleResult(best, cont, value)


def induced_policy_value(inst: ToyInstance, cont_value) -> float:
    """Expected utility of the stop rule driven by a continuation-value
    function ``cont_value(l, qd, qe, dlq)``; ties stop."""
    le = inst.exit_index

    def walk(l: int, qd: int, qe: int, dlq: int) -> float:
        stop = inst.stop_utility(l, qe, dlq)
        c = cont_value(l, qd, qe, dlq)
        if stop >= c:
            return stop
        if l == le:
            return inst.terminal_utility(qd, dlq)
        total = 0.0
        for p, a, w in inst.branches():
            total += p * walk(l + 1, *inst.step(qd, qe, dlq, a, w))
        return total

    return walk(0, inst.q_device0, inst.q_edge0, 0)


def enumerate_stopping_rules(inst: ToyInstance) -> float:
    """Best expected utility over every deterministic stopping rule.

    A rule assigns stop/continue to every history node of the outcome tree.
    Each node's set of achievable expected values is built bottom-up: stop
    now, or any combination of the children's achievable values.
    """
    le = inst.exit_index
    branches = inst.branches()

    def node_values(l: int, qd: int, qe: int, dlq: int) -> list[float]:
        stop = inst.stop_utility(l, qe, dlq)
        if l == le:
            return [stop, inst.terminal_utility(qd, dlq)]
        child_sets = []
        for p, a, w in branches:
            child_sets.append([(p, v) for v in node_values(l + 1, *inst.step(qd, qe, dlq, a, w))])
        values = [stop]
        for combo in itertools.product(*child_sets):
            values.append(sum(p * v for p, v in combo))
        return values

    count = 2
    for _ in range(le):
        count = 1 + count ** max(len(branches), 1)
    if count > 2_000_000:
        raise ValueError(f"instance too large to enumerate ({count} rules)")
    return max(node_values(0, inst.q_device0, inst.q_edge0, 0))


def fixed_decision_values(inst: ToyInstance) -> list[float]:
    """Expected long-term utility of each fixed candidate decision."""
    le = inst.exit_index

    @lru_cache(maxsize=None)
    def ev(x: int, l: int, qd: int, qe: int, dlq: int) -> float:
        if l == x:
            return inst.stop_utility(x, qe, dlq)
        if x == inst.device_only and l == le:
            return inst.terminal_utility(qd, dlq)
        return sum(p * ev(x, l + 1, *inst.step(qd, qe, dlq, a, w)) for p, a, w in inst.branches())

    return [ev(x, 0, inst.q_device0, inst.q_edge0, 0) for x in range(inst.device_only + 1)]


def toy_reduction_inputs(inst: ToyInstance):
    """Candidate-wise inputs for the decision-space reduction on a toy.

    Deterministic utilities are the per-candidate constants (accuracy is
    shared by all edge candidates, so including it shifts nothing in the
    pairwise comparisons). Current-state utilities freeze the edge wait at
    the initial backlog.
    """
    device_only = inst.device_only
    t_lc = [x * inst.slot_s for x in range(device_only + 1)]
    u_pt = list(inst.const)
    inst_utility = []
    for x in range(device_only + 1):
        t_eq = inst.q_edge0 * inst.slot_s if x < device_only else 0.0
        inst_utility.append(-t_lc[x] - t_eq + inst.const[x])
    return u_pt, t_lc, inst_utility


def random_instance(rng: np.random.Generator, arrival_prob: float | None = None) -> ToyInstance:
    """A random enumerable instance with two-point edge inflow support."""
    le = int(rng.integers(1, 3))
    p = float(rng.uniform(0.0, 1.0)) if arrival_prob is None else arrival_prob
    hi = int(rng.integers(1, 4))
    pw = float(rng.uniform(0.1, 0.9))
    support = ((0, round(1.0 - pw, 12)), (hi, round(pw, 12)))
    slot_s = 0.01
    # Constants shaped like real candidates: upload+edge costs shrink with x,
    # device-only trades accuracy for no edge involvement.
    base = rng.uniform(0.3, 0.9)
    const = []
    for x in range(le + 1):
        const.append(float(base - rng.uniform(0.0, 0.08) * (le - x) + rng.normal(0.0, 0.02)))
    const.append(float(base - rng.uniform(0.0, 0.35)))
    return ToyInstance(
        exit_index=le,
        arrival_prob=round(p, 6),
        inflow_support=support,
        q_device0=int(rng.integers(0, 4)),
        q_edge0=int(rng.integers(0, 5)),
        const=tuple(round(c, 9) for c in const),
        slot_s=slot_s,
    )
