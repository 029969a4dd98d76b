"""Experiment driver: config parsing, sweep execution, CSV emission.

A config file is flat ``key = value`` text describing one experiment: the
simulation parameters, the policy (or several), a sweep over device task
rates and edge loads, and the seeds. Each (policy, sweep point, seed)
triple is an isolated deterministic run; runs are dispatched to a process
pool and the merged output is sorted, so the CSV is byte-reproducible.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

from .config import SimConfig, lambda_to_edge_load
from .profile import DnnProfile, default_profile, load_profile
from .simulation import ALL_POLICIES, RunResult, run_simulation

CSV_COLUMNS = (
    "policy",
    "task_rate",
    "edge_load",
    "seed",
    "mean_utility",
    "mean_delay_s",
    "mean_accuracy",
    "mean_energy_j",
    "training_samples",
    "final_training_loss",
    "decision_evaluations",
    "signaling_messages",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    sim: SimConfig
    profile_path: str | None
    policies: tuple[str, ...]
    sweep: tuple[tuple[float, float], ...]  # (task_rate per s, edge_load fraction)
    seeds: tuple[int, ...]
    output_path: str

    def validate(self) -> None:
        self.sim.validate()
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if not self.sweep:
            raise ConfigError("at least one sweep point is required")
        for p in self.policies:
            if p not in ALL_POLICIES:
                raise ConfigError(f"unknown policy {p!r}")
        for rate, load in self.sweep:
            if rate * self.sim.slot_duration_s > 1.0:
                raise ConfigError(f"task rate {rate}/s exceeds one task per slot")
            if load < 0:
                raise ConfigError("edge load must be nonnegative")

    def load_dnn_profile(self) -> DnnProfile:
        if self.profile_path is None:
            return default_profile(self.sim)
        return load_profile(self.profile_path, self.sim)


_SIM_FIELDS = {f.name: f.type for f in fields(SimConfig)}
_INT_FIELDS = {"horizon_slots", "rng_seed", "train_task_count", "eval_task_count"}


def parse_spec_text(text: str, base_dir: str = ".") -> ExperimentSpec:
    """Parse a flat key-value experiment config."""
    entries: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value.strip()

    sim_kwargs = {}
    for key in list(entries):
        if key in _SIM_FIELDS:
            raw = entries.pop(key)
            sim_kwargs[key] = int(raw) if key in _INT_FIELDS else float(raw)
    sim = SimConfig(**sim_kwargs)

    policies = tuple(p.strip() for p in entries.pop("policy", "proposed").split(",") if p.strip())
    seeds = tuple(int(s) for s in entries.pop("seeds", "0").split(",") if s.strip())
    sweep = []
    for point in entries.pop("sweep", "").split(","):
        point = point.strip()
        if not point:
            continue
        try:
            rate, load = point.split(":")
            sweep.append((float(rate), float(load)))
        except ValueError as exc:
            raise ConfigError(f"bad sweep point {point!r}; expected rate:load") from exc
    if not sweep:
        sweep.append((sim.device_task_prob / sim.slot_duration_s,
                      lambda_to_edge_load(sim.edge_arrival_rate, sim)))

    profile_path = entries.pop("profile", None)
    if profile_path is not None and profile_path != "default":
        profile_path = os.path.join(base_dir, profile_path)
    else:
        profile_path = None
    output_path = entries.pop("output", "results.csv")

    if entries:
        raise ConfigError(f"unknown config keys: {sorted(entries)}")

    spec = ExperimentSpec(
        sim=sim,
        profile_path=profile_path,
        policies=policies,
        sweep=tuple(sweep),
        seeds=seeds,
        output_path=output_path,
    )
    spec.validate()
    return spec


def load_spec(path: str) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_spec_text(fh.read(), base_dir=os.path.dirname(os.path.abspath(path)))


@dataclass(frozen=True)
class RunMetrics:
    """Aggregated output of one (policy, sweep point, seed) run."""

    policy: str
    task_rate: float
    edge_load: float
    seed: int
    mean_utility: float
    mean_delay_s: float
    mean_accuracy: float
    mean_energy_j: float
    training_samples: int
    final_training_loss: float
    decision_evaluations: float
    signaling_messages: int

    @property
    def sort_key(self):
        return (self.policy, self.task_rate, self.edge_load, self.seed)


def metrics_from_result(result: RunResult, task_rate: float, edge_load: float) -> RunMetrics:
    ev = result.eval_slice()
    evals = result.evaluations[ev]
    return RunMetrics(
        policy=result.policy,
        task_rate=task_rate,
        edge_load=edge_load,
        seed=result.seed,
        mean_utility=result.eval_mean(result.utilities),
        mean_delay_s=result.eval_mean(result.delays),
        mean_accuracy=result.eval_mean(result.accuracies),
        mean_energy_j=result.eval_mean(result.energies),
        training_samples=result.training_samples,
        final_training_loss=result.final_training_loss,
        decision_evaluations=float(evals.mean()) if len(evals) else float("nan"),
        signaling_messages=result.signaling_messages,
    )


def _run_one(args) -> RunMetrics:
    sim, profile, policy, seed, rate, load = args
    cfg = sim.with_task_rate(rate).with_edge_load(load)
    result = run_simulation(cfg, profile, policy, seed)
    return metrics_from_result(result, rate, load)


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> list[RunMetrics]:
    """Execute every (policy, sweep point, seed) run and collect metrics."""
    spec.validate()
    profile = spec.load_dnn_profile()
    jobs = [
        (spec.sim, profile, policy, seed, rate, load)
        for policy in spec.policies
        for rate, load in spec.sweep
        for seed in spec.seeds
    ]
    if workers == 1 or len(jobs) == 1:
        results = [_run_one(j) for j in jobs]
    else:
        if workers is None:
            workers = min(len(jobs), os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=1))
    return sorted(results, key=lambda m: m.sort_key)


def _fmt(value, column: str) -> str:
    if column in ("policy",):
        return str(value)
    if column in ("seed", "training_samples", "signaling_messages"):
        return str(int(value))
    if column in ("task_rate", "edge_load"):
        return f"{value:.4f}"
    return f"{value:.9f}"


def emit_csv(metrics: list[RunMetrics], path: str) -> None:
    """Write metrics rows in a fixed column order with fixed formatting."""
    rows = [",".join(CSV_COLUMNS)]
    for m in sorted(metrics, key=lambda m: m.sort_key):
        rows.append(",".join(_fmt(getattr(m, c), c) for c in CSV_COLUMNS))
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(rows) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing metrics to {path}: {exc}") from exc
