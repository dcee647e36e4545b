# app.py - VAAD simulator command line
"""
Entry point for the approximate-agreement simulator.
Usage: python app.py run|sweep|demo-lower-bound [options]
"""

import click

from commands import EXIT_USAGE, register_commands
from config import validate_environment
from services.logging_service import configure_logging


@click.group()
@click.option('--log-level', default=None, help='Overrides LOG_LEVEL')
def cli(log_level):
    """Validated asynchronous approximate agreement: runs, sweeps and the lower-bound demo"""
    configure_logging(log_level)
    errors, warnings = validate_environment()
    for warning in warnings:
        click.echo(f"warning: {warning}", err=True)
    if errors:
        for error in errors:
            click.echo(f"error: {error}", err=True)
        raise SystemExit(EXIT_USAGE)


register_commands(cli)

if __name__ == "__main__":
    cli()
