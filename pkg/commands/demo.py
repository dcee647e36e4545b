# commands/demo.py
import click

from config import DEFAULT_SEED
from commands import EXIT_FAILURE, cli_errors, exit_with
from services.errors import UsageError
from services.lower_bound import run_demo


@click.command('demo-lower-bound')
@click.option('--n', 'n', type=int, default=3, show_default=True)
@click.option('--t', 't', type=int, default=1, show_default=True)
@click.option('--m', 'm', type=int, default=2, show_default=True)
@click.option('--epsilon', type=float, default=0.5, show_default=True)
@click.option('--seed', type=int, default=DEFAULT_SEED, show_default=True)
@click.option('--contrast/--no-contrast', default=True, show_default=True,
              help='Also run the same schedule with one more node')
@cli_errors
def demo_lower_bound(n, t, m, epsilon, seed, contrast):
    """Show that n = 3t nodes can be driven to outputs more than epsilon apart"""
    if t < 1 or n > 3 * t:
        raise UsageError(f"the demo needs t >= 1 and n <= 3t, got n={n} t={t}", field="n")

    report = run_demo(n, t, m, epsilon, seed)
    for line in report.lines():
        click.echo(line)
    ok = report.separated

    if contrast:
        click.echo("")
        check = run_demo(3 * t + 1, t, m, epsilon, seed)
        for line in check.lines():
            click.echo(line)
        ok = ok and check.result.passed and not check.separated

    if not ok:
        exit_with(EXIT_FAILURE, "regression: the packaged schedule no longer shows the expected outcome")
