# commands/__init__.py
"""
Click commands for the simulator CLI, registered on the group in app.py.
"""
import logging
import sys
from functools import wraps

import click

from services.errors import LivenessFailure, MonitorViolation, ScenarioError, SweepError, UsageError

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def exit_with(code: int, message: str = None):
    if message:
        click.echo(message, err=True)
    sys.exit(code)


def cli_errors(f):
    """Map simulator exceptions onto the CLI exit codes"""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (ScenarioError, UsageError) as e:
            exit_with(EXIT_USAGE, f"error: {e}")
        except (LivenessFailure, MonitorViolation, SweepError) as e:
            exit_with(EXIT_FAILURE, f"failed: {e}")
    return decorated_function


def trace_flag(value: str) -> bool:
    return value == "on"


def register_commands(cli: click.Group):
    from commands.demo import demo_lower_bound
    from commands.run import run_command
    from commands.sweep import sweep_command

    cli.add_command(run_command)
    cli.add_command(sweep_command)
    cli.add_command(demo_lower_bound)
