# tests/test_scenario_service.py
import copy
import json
import os

import pytest

from services.adversary import RandomDelay, Silent
from services.broadcast import BroadcastMode
from services.errors import ScenarioError
from services.scenario_service import SCENARIO_FIELDS, build_scenario, load_scenario, validate_scenario

BASE = {
    "name": "unit",
    "n": 4,
    "t": 1,
    "m": 1,
    "epsilon": 1.0,
    "seed": 3,
    "inputs": [[0.0], [1.0], [2.0], [3.0]],
    "adversaries": [{"node": 3, "strategy": "silent"}],
    "scheduler": {"policy": "random_delay", "max_delay": 5},
    "predicate": {"kind": "always_true"},
}


def spec_with(**changes):
    spec = copy.deepcopy(BASE)
    spec.update(changes)
    return spec


def field_of(spec):
    with pytest.raises(ScenarioError) as exc:
        build_scenario(spec)
    return exc.value.field


def test_builds_config():
    scenario = build_scenario(copy.deepcopy(BASE))
    cfg = scenario.config
    assert (cfg.n, cfg.t, cfg.m, cfg.epsilon, cfg.seed) == (4, 1, 1, 1.0, 3)
    assert cfg.adversaries == {3: Silent()}
    assert cfg.scheduler == RandomDelay(5)
    assert cfg.broadcast == BroadcastMode.IDEAL
    assert cfg.inputs[1] == (1.0,)


def test_every_shipped_scenario_loads(scenario_path):
    for name in ("reference", "spread", "box_invalid", "simplex", "forged_vote", "partition", "equivocation"):
        assert load_scenario(scenario_path(name)).config.name == name


@pytest.mark.parametrize("spec,expected", [
    (spec_with(colour="blue"), "colour"),
    (spec_with(scheduler={"policy": "fifo", "jitter": 1}), "scheduler.jitter"),
    (spec_with(predicate={"kind": "box", "lo": [0.0], "hi": [1.0], "pad": 1}), "predicate.pad"),
    (spec_with(adversaries=[{"node": 3, "strategy": "crash", "after": 2}]), "adversaries[0]"),
    (spec_with(adversaries=[{"node": 3, "strategy": "teleport"}]), "adversaries[0].strategy"),
    (spec_with(monitors={"strict": True}), "monitors.strict"),
    (spec_with(output={"format": "xml"}), "output.format"),
])
def test_unknown_keys_name_their_path(spec, expected):
    assert field_of(spec).startswith(expected)


def test_missing_required_field():
    spec = copy.deepcopy(BASE)
    del spec["epsilon"]
    assert field_of(spec) == "epsilon"


@pytest.mark.parametrize("key,value", [
    ("n", "four"),
    ("n", True),
    ("epsilon", 0),
    ("t", -1),
    ("broadcast", "gossip"),
])
def test_bad_values(key, value):
    assert field_of(spec_with(**{key: value})) == key


def test_wrong_input_count():
    assert field_of(spec_with(inputs=[[0.0]] * 3)) == "inputs"


def test_wrong_input_dimension():
    assert field_of(spec_with(inputs=[[0.0], [1.0, 2.0], [2.0], [3.0]])) == "inputs[1]"


def test_small_n_needs_the_demo_flag():
    spec = spec_with(n=3, inputs=[[0.0]] * 3, adversaries=[])
    assert field_of(spec) == "n"


def test_adversary_node_out_of_range():
    assert field_of(spec_with(adversaries=[{"node": 9, "strategy": "silent"}])).startswith("adversaries[9]")


def test_duplicate_adversary_node():
    spec = spec_with(t=1, adversaries=[{"node": 3, "strategy": "silent"}, {"node": 3, "strategy": "silent"}])
    assert field_of(spec) == "adversaries[1].node"


def test_unknown_monitor_name():
    assert field_of(spec_with(monitors={"disabled": ["nope"]})) == "monitors.disabled"


def test_bad_scheduler_parameter():
    assert field_of(spec_with(scheduler={"policy": "random_delay", "max_delay": 0})).startswith("scheduler")


def test_generated_inputs_follow_the_seed():
    spec = spec_with(inputs={"generator": "uniform", "low": 0.0, "high": 10.0})
    first = build_scenario(copy.deepcopy(spec)).config.inputs
    again = build_scenario(copy.deepcopy(spec)).config.inputs
    other = build_scenario(spec_with(seed=4, inputs=spec["inputs"])).config.inputs
    assert first == again
    assert first != other
    assert all(0.0 <= v[0] < 10.0 for v in first)


def test_unknown_generator():
    assert field_of(spec_with(inputs={"generator": "gauss", "low": 0, "high": 1})) == "inputs.generator"


def test_with_overrides():
    scenario = build_scenario(copy.deepcopy(BASE)).with_overrides(seed=11, epsilon=0.5, broadcast="bracha",
                                                                     out_dir="elsewhere", trace=False)
    assert scenario.config.seed == 11
    assert scenario.config.epsilon == 0.5
    assert scenario.config.broadcast == BroadcastMode.BRACHA
    assert scenario.out_dir == "elsewhere"
    assert scenario.trace is False


def test_not_an_object():
    with pytest.raises(ScenarioError):
        validate_scenario([1, 2])


def test_load_reports_bad_json(tmp_path):
    path = os.path.join(tmp_path, "broken.json")
    with open(path, "w") as f:
        f.write("{not json")
    with pytest.raises(ScenarioError) as exc:
        load_scenario(path)
    assert exc.value.field == "$"


def test_load_missing_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(os.path.join(tmp_path, "absent.json"))


def test_name_defaults_to_file_stem(tmp_path):
    spec = copy.deepcopy(BASE)
    del spec["name"]
    path = os.path.join(tmp_path, "my_case.json")
    with open(path, "w") as f:
        json.dump(spec, f)
    assert load_scenario(path).config.name == "my_case"


def test_schema_covers_the_config_fields():
    assert {"n", "t", "m", "epsilon", "inputs"} <= {k for k, v in SCENARIO_FIELDS.items() if v.get("required")}
