# commands/run.py
import logging
import os

import click

from config import TRACE_FILE
from commands import EXIT_FAILURE, EXIT_USAGE, cli_errors, exit_with, trace_flag
from services.errors import LivenessFailure, MonitorViolation, UsageError
from services.report_service import format_summary, write_metrics
from services.scenario_service import load_scenario
from services.sim import run

logger = logging.getLogger(__name__)


def read_golden(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read().strip()
    except OSError as e:
        raise UsageError(f"cannot read golden digest {path}: {e.strerror}", field="golden")


def save_golden(path: str, digest: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(digest + '\n')


@click.command('run')
@click.option('--scenario', 'scenario_path', required=True, type=click.Path(dir_okay=False),
              help='Scenario JSON file')
@click.option('--seed', type=int, default=None, help='Override the scenario seed')
@click.option('--epsilon', type=float, default=None, help='Override the agreement distance')
@click.option('--broadcast', type=click.Choice(['ideal', 'bracha']), default=None)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None, help='Output directory')
@click.option('--trace', type=click.Choice(['on', 'off']), default=None, help='Write trace.jsonl')
@click.option('--golden', 'golden_path', type=click.Path(dir_okay=False), default=None,
              help='Trace digest file to compare against')
@click.option('--write-golden', is_flag=True, help='Record the trace digest into --golden instead of comparing')
@cli_errors
def run_command(scenario_path, seed, epsilon, broadcast, out_dir, trace, golden_path, write_golden):
    """Run one scenario and write metrics.csv and trace.jsonl"""
    if write_golden and not golden_path:
        exit_with(EXIT_USAGE, "error: --write-golden needs --golden PATH")

    scenario = load_scenario(scenario_path).with_overrides(
        seed=seed, epsilon=epsilon, broadcast=broadcast, out_dir=out_dir,
        trace=trace_flag(trace) if trace is not None else None,
    )

    try:
        result = run(scenario.config)
    except MonitorViolation as e:
        if e.result is None:
            raise
        result = e.result
    except LivenessFailure as e:
        if scenario.trace and e.trace is not None:
            e.trace.write(os.path.join(scenario.out_dir, TRACE_FILE))
        raise

    write_metrics(result, scenario.out_dir)
    if scenario.trace:
        result.trace.write(os.path.join(scenario.out_dir, TRACE_FILE))
    for line in format_summary(result.summary()):
        click.echo(line)

    if golden_path:
        if write_golden:
            save_golden(golden_path, result.trace_digest)
            click.echo(f"golden digest written to {golden_path}")
        else:
            expected = read_golden(golden_path)
            if expected != result.trace_digest:
                exit_with(EXIT_FAILURE, f"regression: trace digest {result.trace_digest} != golden {expected}")
            click.echo("golden digest matches")

    if not result.passed:
        first = result.violations[0]
        exit_with(EXIT_FAILURE, f"monitor {first.name} failed: {first.detail}")
