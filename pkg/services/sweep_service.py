# services/sweep_service.py
"""
Independent runs over seed ranges and epsilon values.

Runs share nothing; joblib fans them out across worker processes when
VAAD_SWEEP_JOBS (or n_jobs) asks for more than one.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from joblib import Parallel, delayed

from config import SWEEP_JOBS
from services.errors import MonitorViolation, SweepError, UsageError, VaadError
from services.monitors import MonitorSettings, round_bound
from services.sim import SimConfig, SimResult, run

logger = logging.getLogger(__name__)


@dataclass
class SweepOutcome:
    results: List[SimResult] = field(default_factory=list)
    failures: List[SweepError] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return not self.failures and all(r.passed for r in self.results)

    def bounds(self) -> dict:
        """Round bound per epsilon, from the valid inputs each run saw"""
        bounds = {}
        for res in self.results:
            b = round_bound(list(res.states.values()), res.config.epsilon)
            bounds[res.config.epsilon] = max(b, bounds.get(res.config.epsilon, 0))
        return bounds


def parse_seed_range(text: str) -> range:
    """'A..B' (inclusive) -> range; an inverted range is a usage error"""
    try:
        low, high = (int(part) for part in text.split('..', 1))
    except ValueError:
        raise UsageError(f"expected A..B, got {text!r}", field="seeds")
    if low > high:
        raise UsageError(f"inverted seed range {text!r}", field="seeds")
    return range(low, high + 1)


def sweep_configs(base: SimConfig, seeds: Iterable[int],
                  epsilons: Optional[Sequence[float]] = None) -> List[SimConfig]:
    """Copies of base per (epsilon, seed); monitors report instead of raising, traces keep digests only"""
    settings = MonitorSettings(enforce=False, disabled=base.monitors.disabled)
    configs = []
    for eps in (epsilons or [base.epsilon]):
        for seed in seeds:
            configs.append(replace(base, seed=int(seed), epsilon=float(eps), monitors=settings, trace=False))
    return configs


def _run_one(cfg: SimConfig) -> Union[SimResult, SweepError]:
    try:
        return run(cfg)
    except MonitorViolation as e:
        # non-enforcing configs never raise this, but a caller may pass enforcing ones
        if e.result is not None:
            return e.result
        return SweepError(cfg.seed, cfg.epsilon, e)
    except VaadError as e:
        return SweepError(cfg.seed, cfg.epsilon, e)


def run_sweep(configs: Sequence[SimConfig], n_jobs: Optional[int] = None,
              raise_errors: bool = True) -> SweepOutcome:
    """Run every config; failed runs raise SweepError or are collected, per raise_errors"""
    outcome = SweepOutcome()
    if not configs:
        return outcome
    jobs = n_jobs if n_jobs is not None else SWEEP_JOBS
    logger.info(f"Sweeping {len(configs)} runs with n_jobs={jobs}")
    finished: List[Union[SimResult, SweepError]] = Parallel(n_jobs=jobs)(delayed(_run_one)(cfg) for cfg in configs)

    for item in finished:
        if isinstance(item, SweepError):
            if raise_errors:
                raise item
            logger.warning(str(item))
            outcome.failures.append(item)
        else:
            outcome.results.append(item)
    return outcome


def epsilon_grid(text: str) -> Tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}", field="epsilons")
    if not values or any(not v > 0 for v in values):
        raise UsageError(f"epsilons must be positive, got {text!r}", field="epsilons")
    return values
