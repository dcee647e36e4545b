# commands/sweep.py
import logging

import click

from commands import EXIT_FAILURE, cli_errors, exit_with
from services.report_service import (
    EPSILON_SWEEP_FILE, diameter_curve, epsilon_sweep_frame, round_histogram, sweep_frame, write_frame, write_sweep,
)
from services.scenario_service import load_scenario
from services.sweep_service import epsilon_grid, parse_seed_range, run_sweep, sweep_configs

logger = logging.getLogger(__name__)

DIAMETER_CURVE_FILE = "sweep_diameters.csv"


@click.command('sweep')
@click.option('--scenario', 'scenario_path', required=True, type=click.Path(dir_okay=False))
@click.option('--seeds', default=None, help='Inclusive seed range A..B (defaults to the scenario seed)')
@click.option('--epsilons', default=None, help='Comma-separated epsilon values, e.g. 1,0.1,0.01')
@click.option('--broadcast', type=click.Choice(['ideal', 'bracha']), default=None)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None)
@click.option('--jobs', type=int, default=None, help='Parallel runs (joblib n_jobs)')
@cli_errors
def sweep_command(scenario_path, seeds, epsilons, broadcast, out_dir, jobs):
    """Run a scenario over a seed range (and optionally several epsilons)"""
    scenario = load_scenario(scenario_path).with_overrides(broadcast=broadcast, out_dir=out_dir)
    seed_range = parse_seed_range(seeds) if seeds else [scenario.config.seed]
    grid = epsilon_grid(epsilons) if epsilons else None

    outcome = run_sweep(sweep_configs(scenario.config, seed_range, grid), n_jobs=jobs, raise_errors=False)

    if grid:
        path = write_frame(epsilon_sweep_frame(outcome.results, outcome.bounds()), scenario.out_dir, EPSILON_SWEEP_FILE)
    else:
        path = write_sweep(sweep_frame(outcome.results), scenario.out_dir)
    write_frame(diameter_curve(outcome.results), scenario.out_dir, DIAMETER_CURVE_FILE)

    passed = sum(1 for r in outcome.results if r.passed)
    click.echo(f"{len(outcome.results)} runs, {passed} passed, {len(outcome.failures)} failed -> {path}")
    histogram = round_histogram(outcome.results)
    if len(histogram):
        click.echo("final rounds: " + ", ".join(f"{r}:{c}" for r, c in histogram.items()))
    for failure in outcome.failures:
        click.echo(f"failed: {failure}", err=True)

    if not outcome.all_pass:
        exit_with(EXIT_FAILURE)
