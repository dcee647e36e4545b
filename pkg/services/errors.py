# services/errors.py
"""
Exception hierarchy shared by the simulator, the scenario loader and the CLI.
"""
from typing import Optional


class VaadError(Exception):
    """Base class for all simulator errors"""
    def __init__(self, message: str, field: Optional[str] = None):
        self.message = message
        self.field = field
        super().__init__(self.message)


class UsageError(VaadError):
    """A precondition of a kernel or protocol operation was violated"""


class DecodeError(VaadError):
    """Malformed wire bytes; offset points at the first byte that could not be read"""
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


class ScenarioError(VaadError):
    """Scenario file failed schema validation"""
    def __init__(self, message: str, field: str):
        super().__init__(f"{field}: {message}", field=field)


class LivenessFailure(VaadError):
    """Correct nodes did not all terminate within the event budget"""
    def __init__(self, message: str, events: int, trace=None):
        self.events = events
        self.trace = trace
        super().__init__(message)


class MonitorViolation(VaadError, AssertionError):
    """An invariant monitor rejected the run"""
    def __init__(self, monitor: str, detail: str, result=None):
        self.monitor = monitor
        self.detail = detail
        self.result = result
        super().__init__(f"{monitor}: {detail}", field=monitor)


class SweepError(VaadError):
    """A sweep member failed; carries the identifying seed and epsilon"""
    def __init__(self, seed: int, epsilon: float, cause: VaadError):
        self.seed = seed
        self.epsilon = epsilon
        self.cause = cause
        super().__init__(f"run seed={seed} epsilon={epsilon} failed: {cause}")


