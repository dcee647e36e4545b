# tests/test_lower_bound.py
import pytest

from services.geometry import distance
from services.lower_bound import build_demo_config, demo_layout, run_demo, sample_inputs


def test_sample_inputs_are_far_apart():
    for seed in range(20):
        v1, v2 = sample_inputs(3, 0.5, seed)
        assert distance(v1, v2) > 0.5


@pytest.mark.parametrize("n,t,expected", [
    (3, 1, ((0,), (1,), (2,))),
    (6, 2, ((0, 1), (2, 3), (4, 5))),
    (2, 1, ((0,), (1,), ())),
    (7, 2, ((0, 1, 2), (3, 4), (5, 6))),
])
def test_layout(n, t, expected):
    assert demo_layout(n, t) == expected


def test_demo_config_flags():
    cfg, layout = build_demo_config(3, 1)
    assert cfg.lower_bound_demo
    assert not cfg.monitors.enforce
    assert set(cfg.adversaries) == set(layout["byzantine"])


def test_mirrors_know_each_other():
    cfg, layout = build_demo_config(6, 2)
    assert all(s.peers == layout["byzantine"] for s in cfg.adversaries.values())


def test_three_nodes_separate():
    report = run_demo(3, 1, 2, 0.5, seed=7)
    assert report.separated
    assert report.separation > 0.5
    assert len(report.clusters) == 2
    v1, v2 = report.v1, report.v2
    assert report.result.outputs[0] == v1
    assert report.result.outputs[1] == v2


def test_one_more_node_converges():
    report = run_demo(4, 1, 2, 0.5, seed=7)
    assert report.result.passed
    assert not report.separated
    assert len(report.clusters) == 1


@pytest.mark.parametrize("n,t", [(6, 2), (9, 3)])
@pytest.mark.parametrize("seed", [0, 3, 7])
def test_larger_threshold_separates(n, t, seed):
    report = run_demo(n, t, 2, 0.5, seed=seed)
    assert report.separated
    assert len(report.clusters) == 2
    assert set(report.result.outputs) == set(range(n - t))


def test_larger_threshold_plus_one_converges():
    report = run_demo(7, 2, 2, 0.5, seed=7)
    assert report.result.passed
    assert not report.separated


def test_report_lines():
    lines = run_demo(3, 1, 1, 0.5, seed=1).lines()
    assert lines[0] == "lower-bound demo n=3 t=1 epsilon=0.5"
    assert any(line.startswith("separation") for line in lines)
