"""Slotted clock, arrival processes and exact queue-evolution recursions.

Conventions used throughout the package:

* Slots are indexed by nonnegative integers; all queue events (task
  generation, queue departure, offload signals) happen at slot beginnings.
* ``Q_device(t)`` counts tasks that have been generated at or before slot t
  and have not yet left the queue at or before slot t.
* ``Q_edge(t)`` is the edge backlog in cycles at the beginning of slot t;
  inflows registered during slot t appear in the state at t+1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SimConfig

# Fixed stream ids so that every named RNG stream is independent of the
# others and of the order in which streams are created.
_STREAM_IDS = {
    "device_arrivals": 1,
    "edge_arrivals": 2,
    "network_init": 3,
    "training": 4,
    "trace_tests": 5,
}

_EDGE_CHUNK = 1 << 15


def stream(master_seed: int, name: str, index: int = 0) -> np.random.Generator:
    """A named, reproducible RNG stream derived from one master seed."""
    sid = _STREAM_IDS[name]
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(sid, index)))


@dataclass(frozen=True)
class DeviceQueueState:
    slot: int
    queue_len: int
    arrived: int
    departed: int


@dataclass(frozen=True)
class EdgeQueueState:
    slot: int
    backlog_cycles: float
    device_inflow_cycles: float
    other_inflow_cycles: float


class QueueUnderflowError(RuntimeError):
    """A departure was signalled from an empty device queue (scheduler bug)."""


def step_device_queue(prev: DeviceQueueState, arrived: int, departed: int) -> DeviceQueueState:
    if arrived not in (0, 1) or departed not in (0, 1):
        raise ValueError("arrival/departure indicators must be 0 or 1")
    queue_len = prev.queue_len + arrived - departed
    if queue_len < 0:
        raise QueueUnderflowError(
            f"departure from empty device queue at slot {prev.slot + 1}"
        )
    return DeviceQueueState(prev.slot + 1, queue_len, arrived, departed)


def step_edge_queue(
    prev: EdgeQueueState, device_in: float, other_in: float, cfg: SimConfig
) -> EdgeQueueState:
    if device_in < 0 or other_in < 0:
        raise ValueError("edge inflows must be nonnegative")
    backlog = max(prev.backlog_cycles - cfg.edge_cycles_per_slot, 0.0) + device_in + other_in
    return EdgeQueueState(prev.slot + 1, backlog, device_in, other_in)


def draw_device_arrival(rng: np.random.Generator, p: float) -> int:
    """Bernoulli task-generation indicator for one slot."""
    if p <= 0.0:
        return 0
    if p >= 1.0:
        return 1
    return int(rng.random() < p)


def draw_edge_inflow(rng: np.random.Generator, cfg: SimConfig) -> float:
    """Background edge workload (cycles) arriving in one slot.

    A Poisson number of tasks arrives, each costing Uniform(0, U_max) cycles.
    """
    lam = cfg.edge_arrival_rate * cfg.slot_duration_s
    if lam <= 0.0:
        return 0.0
    k = int(rng.poisson(lam))
    if k == 0:
        return 0.0
    return float(rng.random(k).sum() * cfg.edge_task_cycles_max)


class DeviceArrivalTrace:
    """Generation slots of the device's tasks, fixed per seed.

    Gaps between consecutive tasks follow a geometric distribution, which is
    the inter-arrival law of the per-slot Bernoulli process. The trace does
    not depend on any offloading policy.
    """

    def __init__(self, cfg: SimConfig, master_seed: int, task_count: int):
        self.task_count = task_count
        if task_count == 0 or cfg.device_task_prob <= 0.0:
            self.gen_slots = np.empty(0, dtype=np.int64)
            self.task_count = 0
            return
        rng = stream(master_seed, "device_arrivals")
        if cfg.device_task_prob >= 1.0:
            gaps = np.ones(task_count, dtype=np.int64)
        else:
            gaps = rng.geometric(cfg.device_task_prob, size=task_count).astype(np.int64)
        gen = np.cumsum(gaps) - 1  # first task may land on slot 0
        if gen[-1] > cfg.horizon_slots:
            raise RuntimeError(
                f"task generation exceeded horizon_slots={cfg.horizon_slots} "
                f"(seed {master_seed})"
            )
        self.gen_slots = gen

    def gen_slot(self, n: int) -> int:
        """Generation slot of task n (1-indexed)."""
        return int(self.gen_slots[n - 1])

    def gap_slots(self, n: int) -> int:
        """Slots between generation of task n and task n+1."""
        return int(self.gen_slots[n] - self.gen_slots[n - 1])

    def queue_len_at(self, t: int, departed_count: int) -> int:
        """Device queue length at slot t given how many tasks have departed."""
        generated = int(np.searchsorted(self.gen_slots, t, side="right"))
        q = generated - departed_count
        if q < 0:
            raise QueueUnderflowError(f"negative device queue at slot {t}")
        return q

    def arrivals_in(self, a: int, b: int) -> np.ndarray:
        """Generation slots g with a < g <= b, ascending."""
        lo = int(np.searchsorted(self.gen_slots, a, side="right"))
        hi = int(np.searchsorted(self.gen_slots, b, side="right"))
        return self.gen_slots[lo:hi]


class EdgeInflowTrace:
    """Per-slot background edge inflow, generated lazily in seeded chunks.

    Chunk c is drawn from an RNG derived from (master seed, c), so the trace
    is identical no matter which slots are queried first. Only slots with at
    least one arrival are materialized.
    """

    def __init__(self, cfg: SimConfig, master_seed: int):
        self._cfg = cfg
        self._seed = master_seed
        self._chunks: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _chunk(self, c: int) -> tuple[np.ndarray, np.ndarray]:
        cached = self._chunks.get(c)
        if cached is not None:
            return cached
        cfg = self._cfg
        lam = cfg.edge_arrival_rate * cfg.slot_duration_s
        if lam <= 0.0:
            empty = (np.empty(0, dtype=np.int64), np.empty(0))
            self._chunks[c] = empty
            return empty
        rng = stream(self._seed, "edge_arrivals", index=c)
        counts = rng.poisson(lam, _EDGE_CHUNK)
        nz = np.nonzero(counts)[0]
        u = rng.random(int(counts[nz].sum())) * cfg.edge_task_cycles_max
        sums = np.add.reduceat(u, np.concatenate(([0], np.cumsum(counts[nz])[:-1])).astype(int)) \
            if len(nz) else np.empty(0)
        chunk = (nz.astype(np.int64) + c * _EDGE_CHUNK, sums)
        self._chunks[c] = chunk
        return chunk

    def events_in(self, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
        """All (slot, cycles) inflow events with a <= slot < b."""
        if b <= a:
            return np.empty(0, dtype=np.int64), np.empty(0)
        slots: list[np.ndarray] = []
        cycles: list[np.ndarray] = []
        for c in range(a // _EDGE_CHUNK, (b - 1) // _EDGE_CHUNK + 1):
            s, w = self._chunk(c)
            mask = (s >= a) & (s < b)
            if mask.any():
                slots.append(s[mask])
                cycles.append(w[mask])
        if not slots:
            return np.empty(0, dtype=np.int64), np.empty(0)
        return np.concatenate(slots), np.concatenate(cycles)

    def drop_before(self, slot: int) -> None:
        """Release cached chunks entirely earlier than ``slot``."""
        limit = slot // _EDGE_CHUNK
        for c in [c for c in self._chunks if c < limit]:
            del self._chunks[c]


class EdgeBacklog:
    """Lazy, event-driven evaluation of the edge backlog recursion.

    States must be queried at nondecreasing slots. Device offload inflows are
    registered explicitly; background inflows come from an EdgeInflowTrace.
    """

    def __init__(self, cfg: SimConfig, inflows: EdgeInflowTrace, initial_cycles: float = 0.0):
        self._cfg = cfg
        self._inflows = inflows
        self._frontier = 0
        self._backlog = float(initial_cycles)
        self._device_events: list[tuple[int, float]] = []

    def add_device_inflow(self, slot: int, cycles: float) -> None:
        if slot < self._frontier:
            raise ValueError("device inflow registered behind the frontier")
        if cycles < 0:
            raise ValueError("device inflow must be nonnegative")
        self._device_events.append((slot, cycles))

    def device_inflow_at(self, slot: int) -> float:
        return sum(c for s, c in self._device_events if s == slot)

    def state_at(self, t: int) -> float:
        """Backlog at the beginning of slot t; advances the frontier to t."""
        if t < self._frontier:
            raise ValueError(f"edge backlog queried backwards ({t} < {self._frontier})")
        if t == self._frontier:
            return self._backlog
        c = self._cfg.edge_cycles_per_slot
        slots, cycles = self._inflows.events_in(self._frontier, t)
        dev = self._device_events
        events: list[tuple[int, float]] = []
        for s, w in zip(slots.tolist(), cycles.tolist()):
            events.append((s, w))
        for s, w in dev:
            if self._frontier <= s < t:
                events.append((s, w))
        self._device_events = [(s, w) for s, w in dev if s >= t]
        events.sort()
        q = self._backlog
        f = self._frontier
        for s, w in events:
            q = max(q - (s - f) * c, 0.0)
            q = max(q - c, 0.0) + w
            f = s + 1
        q = max(q - (t - f) * c, 0.0)
        self._frontier = t
        self._backlog = q
        self._inflows.drop_before(t - _EDGE_CHUNK)
        return q
