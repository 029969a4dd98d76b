"""Simulation configuration and unit conversions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace


def dbm_to_watts(dbm: float) -> float:
    """Convert a transmit power in dBm to watts (20 dBm -> 0.1 W)."""
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass(frozen=True)
class SimConfig:
    """All scalar parameters of one simulated device-edge system.

    Rates are per second; the device task process is Bernoulli per slot with
    probability ``device_task_prob``, background edge arrivals are Poisson with
    mean ``edge_arrival_rate * slot_duration_s`` tasks per slot, each costing
    Uniform(0, edge_task_cycles_max) CPU cycles.
    """

    slot_duration_s: float = 0.01
    horizon_slots: int = 2_000_000_000
    rng_seed: int = 0
    device_task_prob: float = 0.01
    edge_arrival_rate: float = 11.25
    edge_task_cycles_max: float = 8e9
    edge_freq_hz: float = 50e9
    device_freq_hz: float = 1e9
    uplink_rate_bps: float = 126e6
    tx_power_w: float = field(default=dbm_to_watts(20.0))
    energy_coeff_device: float = 1e-30
    energy_coeff_edge: float = 1e-30
    acc_full: float = 0.9
    acc_shallow: float = 0.6
    weight_acc: float = 1.0
    weight_energy: float = 0.002
    train_task_count: int = 2000
    eval_task_count: int = 8000

    def validate(self) -> None:
        if self.slot_duration_s <= 0:
            raise ValueError("slot_duration_s must be positive")
        if not 0.0 <= self.device_task_prob <= 1.0:
            raise ValueError("device_task_prob must be a probability")
        if self.acc_full <= self.acc_shallow:
            raise ValueError("acc_full must exceed acc_shallow")
        if self.edge_arrival_rate < 0:
            raise ValueError("edge_arrival_rate must be nonnegative")
        for name in (
            "edge_task_cycles_max",
            "edge_freq_hz",
            "device_freq_hz",
            "uplink_rate_bps",
            "tx_power_w",
            "energy_coeff_device",
            "energy_coeff_edge",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.train_task_count < 0 or self.eval_task_count < 0:
            raise ValueError("task counts must be nonnegative")
        if self.horizon_slots <= 0:
            raise ValueError("horizon_slots must be positive")

    @property
    def edge_cycles_per_slot(self) -> float:
        return self.edge_freq_hz * self.slot_duration_s

    @property
    def total_task_count(self) -> int:
        return self.train_task_count + self.eval_task_count

    def with_task_rate(self, tasks_per_second: float) -> "SimConfig":
        """Derive a config with the device Bernoulli probability set from a rate."""
        p = tasks_per_second * self.slot_duration_s
        if not 0.0 <= p <= 1.0:
            raise ValueError(
                f"task rate {tasks_per_second}/s gives invalid per-slot probability {p}"
            )
        return replace(self, device_task_prob=p)

    def with_edge_load(self, load: float) -> "SimConfig":
        return replace(self, edge_arrival_rate=edge_load_to_lambda(load, self))


def edge_load_to_lambda(load: float, cfg: SimConfig) -> float:
    """Background arrival rate (tasks/s) that produces a target edge load.

    Load is the unitless utilization lambda * U_max / (2 * f_edge).
    """
    if load < 0:
        raise ValueError("edge load must be nonnegative")
    return 2.0 * cfg.edge_freq_hz * load / cfg.edge_task_cycles_max


def lambda_to_edge_load(lam: float, cfg: SimConfig) -> float:
    return lam * cfg.edge_task_cycles_max / (2.0 * cfg.edge_freq_hz)
