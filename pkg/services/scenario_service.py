# services/scenario_service.py
"""
Scenario file loading and schema validation.

A scenario is a JSON document mirroring SimConfig plus output settings.
Unknown keys are rejected; every error names the offending field path.
"""
import json
import logging
import os
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional

import numpy as np

import config
from services.adversary import policy_from_spec, strategy_from_spec
from services.broadcast import BroadcastMode
from services.errors import ScenarioError, UsageError
from services.monitors import MonitorSettings
from services.sim import SimConfig
from services.validity import from_spec as predicate_from_spec

logger = logging.getLogger(__name__)

# Top-level fields and their rules
SCENARIO_FIELDS = {
    'name': {'type': 'str'},
    'n': {'type': 'int', 'required': True, 'min': 1},
    't': {'type': 'int', 'required': True, 'min': 0},
    'm': {'type': 'int', 'required': True, 'min': 1},
    'epsilon': {'type': 'float', 'required': True, 'positive': True},
    'seed': {'type': 'int', 'min': 0},
    'broadcast': {'type': 'str', 'choices': [mode.value for mode in BroadcastMode]},
    'inputs': {'type': 'inputs', 'required': True},
    'adversaries': {'type': 'list'},
    'scheduler': {'type': 'dict'},
    'predicate': {'type': 'dict'},
    'max_events': {'type': 'int', 'min': 1},
    'lower_bound_demo': {'type': 'bool'},
    'monitors': {'type': 'dict'},
    'output': {'type': 'dict'},
}

STRATEGY_FIELDS = {
    'silent': set(),
    'crash': {'after_round'},
    'extreme_honest': {'target'},
    'invalid_input': {'v'},
    'forged_vote': {'perturbation'},
    'skewed_subset': {'bias'},
    'equivocator': {'payloads'},
    'mirror': {'inputs', 'groups', 'peers'},
}

POLICY_FIELDS = {
    'fifo': set(),
    'random_delay': {'max_delay'},
    'targeted_delay': {'victims', 'delay_factor'},
    'partition_until': {'groups', 'release_time'},
}

PREDICATE_FIELDS = {
    'always_true': set(),
    'box': {'lo', 'hi'},
    'simplex': {'dim'},
    'finite_set': {'allowed', 'tol'},
}

GENERATOR_FIELDS = {'generator', 'low', 'high'}
MONITOR_FIELDS = {'enforce', 'disabled'}
OUTPUT_FIELDS = {'dir', 'trace'}


@dataclass
class Scenario:
    config: SimConfig
    out_dir: str = config.OUT_DIR
    trace: bool = config.TRACE_ENABLED
    source: Optional[str] = None

    def with_overrides(self, seed: Optional[int] = None, epsilon: Optional[float] = None,
                       broadcast: Optional[str] = None, out_dir: Optional[str] = None,
                       trace: Optional[bool] = None) -> 'Scenario':
        """CLI flags win over scenario values"""
        cfg = self.config
        changes: Dict[str, Any] = {}
        if seed is not None:
            changes['seed'] = seed
        if epsilon is not None:
            changes['epsilon'] = epsilon
        if broadcast is not None:
            changes['broadcast'] = BroadcastMode(broadcast)
        if trace is not None:
            changes['trace'] = trace
        if changes:
            cfg = replace(cfg, **changes).validate()
        return Scenario(
            config=cfg,
            out_dir=out_dir if out_dir is not None else self.out_dir,
            trace=trace if trace is not None else self.trace,
            source=self.source,
        )


def _check_keys(spec: Dict[str, Any], allowed, path: str):
    for key in spec:
        if key not in allowed:
            raise ScenarioError("unknown key", f"{path}.{key}" if path else key)


def _check_type(value: Any, rules: Dict[str, Any], path: str):
    kind = rules.get('type')
    if kind == 'int':
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(f"expected an integer, got {value!r}", path)
        if 'min' in rules and value < rules['min']:
            raise ScenarioError(f"must be at least {rules['min']}, got {value}", path)
    elif kind == 'float':
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"expected a number, got {value!r}", path)
        if rules.get('positive') and not value > 0:
            raise ScenarioError(f"must be positive, got {value}", path)
    elif kind == 'str':
        if not isinstance(value, str):
            raise ScenarioError(f"expected a string, got {value!r}", path)
        if 'choices' in rules and value not in rules['choices']:
            raise ScenarioError(f"must be one of {rules['choices']}, got {value!r}", path)
    elif kind == 'bool':
        if not isinstance(value, bool):
            raise ScenarioError(f"expected true or false, got {value!r}", path)
    elif kind == 'list':
        if not isinstance(value, list):
            raise ScenarioError("expected a list", path)
    elif kind == 'dict':
        if not isinstance(value, dict):
            raise ScenarioError("expected an object", path)
    elif kind == 'inputs':
        if not isinstance(value, (list, dict)):
            raise ScenarioError("expected a list of points or a generator object", path)


def validate_scenario(spec: Any) -> Dict[str, Any]:
    """Schema-check a parsed scenario document; returns it unchanged"""
    if not isinstance(spec, dict):
        raise ScenarioError("scenario must be a JSON object", "$")
    _check_keys(spec, SCENARIO_FIELDS, "")
    for key, rules in SCENARIO_FIELDS.items():
        if key not in spec:
            if rules.get('required'):
                raise ScenarioError("required", key)
            continue
        _check_type(spec[key], rules, key)

    inputs = spec['inputs']
    if isinstance(inputs, dict):
        _check_keys(inputs, GENERATOR_FIELDS, "inputs")
        if inputs.get('generator') != 'uniform':
            raise ScenarioError(f"unknown generator {inputs.get('generator')!r}", "inputs.generator")
        for bound in ('low', 'high'):
            if bound not in inputs:
                raise ScenarioError("required", f"inputs.{bound}")

    for i, entry in enumerate(spec.get('adversaries', [])):
        path = f"adversaries[{i}]"
        if not isinstance(entry, dict):
            raise ScenarioError("expected an object", path)
        strategy = entry.get('strategy')
        if strategy not in STRATEGY_FIELDS:
            raise ScenarioError(f"unknown strategy {strategy!r}", f"{path}.strategy")
        _check_keys(entry, STRATEGY_FIELDS[strategy] | {'node', 'strategy'}, path)
        if 'node' not in entry:
            raise ScenarioError("required", f"{path}.node")
        _check_type(entry['node'], {'type': 'int', 'min': 0}, f"{path}.node")

    scheduler = spec.get('scheduler', {})
    policy = scheduler.get('policy', 'fifo')
    if policy not in POLICY_FIELDS:
        raise ScenarioError(f"unknown policy {policy!r}", "scheduler.policy")
    _check_keys(scheduler, POLICY_FIELDS[policy] | {'policy'}, "scheduler")

    predicate = spec.get('predicate', {'kind': 'always_true'})
    kind = predicate.get('kind')
    if kind not in PREDICATE_FIELDS:
        raise ScenarioError(f"unknown predicate {kind!r}", "predicate.kind")
    _check_keys(predicate, PREDICATE_FIELDS[kind] | {'kind'}, "predicate")

    monitors = spec.get('monitors', {})
    _check_keys(monitors, MONITOR_FIELDS, "monitors")
    if 'enforce' in monitors:
        _check_type(monitors['enforce'], {'type': 'bool'}, "monitors.enforce")
    if 'disabled' in monitors:
        _check_type(monitors['disabled'], {'type': 'list'}, "monitors.disabled")

    output = spec.get('output', {})
    _check_keys(output, OUTPUT_FIELDS, "output")
    if 'dir' in output:
        _check_type(output['dir'], {'type': 'str'}, "output.dir")
    if 'trace' in output:
        _check_type(output['trace'], {'type': 'bool'}, "output.trace")
    return spec


def generate_inputs(spec: Dict[str, Any], n: int, m: int, seed: int) -> List[List[float]]:
    """Uniform inputs in [low, high)^m drawn from the scenario seed"""
    rng = np.random.default_rng(seed)
    return rng.uniform(float(spec['low']), float(spec['high']), size=(n, m)).tolist()


def _wrap(path: str, fn, *args):
    try:
        return fn(*args)
    except UsageError as e:
        raise ScenarioError(e.message, f"{path}.{e.field}" if e.field else path)
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f"malformed block: {e}", path)


def build_scenario(spec: Dict[str, Any], source: Optional[str] = None) -> Scenario:
    validate_scenario(spec)
    n, t, m = spec['n'], spec['t'], spec['m']
    seed = spec.get('seed', config.DEFAULT_SEED)

    inputs = spec['inputs']
    if isinstance(inputs, dict):
        inputs = _wrap("inputs", generate_inputs, inputs, n, m, seed)

    adversaries = {}
    for i, entry in enumerate(spec.get('adversaries', [])):
        node = entry['node']
        if node in adversaries:
            raise ScenarioError(f"node {node} assigned twice", f"adversaries[{i}].node")
        adversaries[node] = _wrap(f"adversaries[{i}]", strategy_from_spec, entry)

    monitors = spec.get('monitors', {})
    output = spec.get('output', {})
    cfg = SimConfig(
        n=n,
        t=t,
        m=m,
        epsilon=float(spec['epsilon']),
        inputs=list(inputs),
        seed=seed,
        broadcast=BroadcastMode(spec.get('broadcast', BroadcastMode.IDEAL.value)),
        adversaries=adversaries,
        scheduler=_wrap("scheduler", policy_from_spec, spec.get('scheduler', {})),
        predicate=_wrap("predicate", predicate_from_spec, spec.get('predicate', {'kind': 'always_true'})),
        max_events=spec.get('max_events'),
        lower_bound_demo=spec.get('lower_bound_demo', False),
        monitors=MonitorSettings(
            enforce=monitors.get('enforce', True),
            disabled=frozenset(monitors.get('disabled', [])),
        ),
        trace=output.get('trace', config.TRACE_ENABLED),
        name=spec.get('name') or (os.path.splitext(os.path.basename(source))[0] if source else "scenario"),
    )
    cfg.validate()
    return Scenario(
        config=cfg,
        out_dir=output.get('dir', config.OUT_DIR),
        trace=output.get('trace', config.TRACE_ENABLED),
        source=source,
    )


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            spec = json.load(f)
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e.strerror}", "$")
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON at line {e.lineno} column {e.colno}", "$")
    logger.debug(f"Loaded scenario {path}")
    return build_scenario(spec, source=path)
