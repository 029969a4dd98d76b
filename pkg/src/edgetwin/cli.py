"""Command-line entry points."""

from __future__ import annotations

import sys
from dataclasses import replace

import click

from .experiment import ConfigError, emit_csv, load_spec, run_experiment
from .oracle import ToyInstance, backward_induction, enumerate_stopping_rules


@click.group()
def main() -> None:
    """Device-edge collaborative inference simulator."""


def _load_spec_or_exit(config: str):
    try:
        return load_spec(config)
    except (ConfigError, OSError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seeds", default=None, help="Comma-separated seed override.")
@click.option("--policy", default=None, help="Policy override (single name or comma list).")
@click.option("--out", default=None, type=click.Path(dir_okay=False), help="CSV output override.")
@click.option("--workers", default=None, type=int, help="Worker process count.")
def run(config: str, seeds: str | None, policy: str | None, out: str | None, workers: int | None) -> None:
    """Run the experiment described by a config file and write a CSV."""
    spec = _load_spec_or_exit(config)
    if seeds is not None:
        spec = replace(spec, seeds=tuple(int(s) for s in seeds.split(",") if s.strip()))
    if policy is not None:
        spec = replace(spec, policies=tuple(p.strip() for p in policy.split(",") if p.strip()))
    if out is not None:
        spec = replace(spec, output_path=out)
    try:
        spec.validate()
        metrics = run_experiment(spec, workers=workers)
        emit_csv(metrics, spec.output_path)
    except (ConfigError, RuntimeError, ValueError) as exc:
        click.echo(f"run failed: {exc}", err=True)
        sys.exit(1)
    click.echo(f"wrote {len(metrics)} rows to {spec.output_path}")


@main.command()
@click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False))
def validate(config: str) -> None:
    """Check a config file without running anything."""
    spec = _load_spec_or_exit(config)
    try:
        spec.load_dnn_profile()
    except (OSError, ValueError) as exc:
        click.echo(f"profile error: {exc}", err=True)
        sys.exit(2)
    click.echo(
        f"ok: {len(spec.policies)} policies, {len(spec.sweep)} sweep points, "
        f"{len(spec.seeds)} seeds"
    )


@main.command()
@click.option("--instance", required=True, type=click.Path(exists=True, dir_okay=False))
def oracle(instance: str) -> None:
    """Solve a toy instance two independent ways and compare."""
    with open(instance, "r", encoding="utf-8") as fh:
        inst = ToyInstance.from_json(fh.read())
    exact = backward_induction(inst)
    enumerated = enumerate_stopping_rules(inst)
    gap = abs(exact.optimal_value - enumerated)
    click.echo(f"backward induction optimum: {exact.optimal_value:.12f}")
    click.echo(f"rule enumeration optimum:   {enumerated:.12f}")
    click.echo(f"absolute gap:               {gap:.3e}")
    if gap >= 1e-12:
        click.echo("MISMATCH between the two solvers", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
