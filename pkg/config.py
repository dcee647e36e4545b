# config.py
import os
from dotenv import load_dotenv
load_dotenv()

# Environment detection
ENVIRONMENT = os.getenv("VAAD_ENV", "development")

# Simulation safety cap - distinguishes liveness bugs from runaway configs
DEFAULT_MAX_EVENTS = 10_000_000
MAX_EVENTS = int(os.getenv("VAAD_MAX_EVENTS", str(DEFAULT_MAX_EVENTS)))

DEFAULT_SEED = int(os.getenv("VAAD_DEFAULT_SEED", "7"))

# Geometry tolerances
DEFAULT_HULL_TOL = 1e-9          # round-1 hull check, scaled by max(1, diameter)
VALIDITY_HULL_TOL = 1e-7         # validity monitor
MONITOR_SLACK = 1e-9             # additive slack for diameter monitors
SIMPLEX_SUM_TOL = 1e-12

# Output
OUT_DIR = os.getenv("VAAD_OUT_DIR", "out")
TRACE_ENABLED = os.getenv("VAAD_TRACE", "on").lower() in ("on", "true", "1")
METRICS_FILE = "metrics.csv"
TRACE_FILE = "trace.jsonl"
SWEEP_FILE = "sweep.csv"

# Sweep workers (joblib n_jobs); 1 keeps runs in-process
SWEEP_JOBS = int(os.getenv("VAAD_SWEEP_JOBS", "1"))

# Logging Configuration
LOG_LEVEL = os.environ.get('LOG_LEVEL', 'WARNING')
LOG_FILE = os.getenv("VAAD_LOG_FILE")


def max_events() -> int:
    """Event cap, re-read from the environment so CLI invocations can override it late"""
    raw = os.getenv("VAAD_MAX_EVENTS")
    if raw is None:
        return MAX_EVENTS
    return int(raw)


def validate_environment():
    """Check env-driven settings; returns (errors, warnings) instead of exiting"""
    errors = []
    warnings = []

    raw_cap = os.getenv("VAAD_MAX_EVENTS")
    if raw_cap is not None:
        try:
            if int(raw_cap) <= 0:
                errors.append("VAAD_MAX_EVENTS must be positive")
        except ValueError:
            errors.append(f"VAAD_MAX_EVENTS is not an integer: {raw_cap!r}")

    if SWEEP_JOBS == 0:
        errors.append("VAAD_SWEEP_JOBS must be nonzero (use -1 for all cores)")

    if LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        warnings.append(f"Unknown LOG_LEVEL {LOG_LEVEL!r} - falling back to WARNING")

    return errors, warnings
