# tests/test_monitors.py
from services.geometry import AttributedSet
from services.messages import ReportSet, Value
from services.monitors import (
    BROADCAST_UNIQUENESS, CORRECTNESS, HALT_MONOTONICITY, VIEWPOINT_INTERSECTION, MonitorSettings, OnlineMonitors,
    check_correctness, check_halt_monotonicity, check_initial_diameter, check_liveness, check_round_bound,
    check_shrinking_diameter, check_validity, evaluate, round_diameters, union_points, violations,
)
from services.protocol import NodeState
from services.validity import AlwaysTrue


def state(node_id, values=None, output=None, r=1, halt_history=None, init_diameter=None):
    s = NodeState(node_id, 4, 1, 1, 1.0)
    s.values = values or {}
    s.output = output
    s.r = r
    s.halt_history = halt_history or []
    s.init_diameter = init_diameter
    return s


ZERO = AttributedSet({0: (0.0,), 1: (4.0,), 2: (8.0,)})


class TestOnlineMonitors:
    def test_same_payload_everywhere_passes(self):
        online = OnlineMonitors(4, 1, [0, 1, 2])
        online.on_delivery(0, 3, "3:init_value@0", "aa")
        online.on_delivery(1, 3, "3:init_value@0", "aa")
        assert all(r.passed for r in online.results())

    def test_conflicting_payloads_fail(self):
        online = OnlineMonitors(4, 1, [0, 1, 2])
        online.on_delivery(0, 3, "3:init_value@0", "aa")
        online.on_delivery(1, 3, "3:init_value@0", "bb")
        failed = violations(online.results())
        assert [r.name for r in failed] == [BROADCAST_UNIQUENESS]

    def test_byzantine_recipients_are_not_policed(self):
        online = OnlineMonitors(4, 1, [0, 1, 2])
        online.on_delivery(0, 3, "x", "aa")
        online.on_delivery(3, 3, "x", "bb")
        assert not violations(online.results())

    def test_viewpoints_must_share_a_quorum(self):
        online = OnlineMonitors(4, 1, [0, 1, 2])
        a = AttributedSet({0: (0.0,), 1: (1.0,), 2: (2.0,)})
        b = AttributedSet({1: (1.0,), 2: (2.0,), 3: (3.0,)})
        online.on_value_sent(0, Value((1.0,), a, ReportSet(), 1))
        online.on_value_sent(1, Value((2.0,), b, ReportSet(), 1))
        assert [r.name for r in violations(online.results())] == [VIEWPOINT_INTERSECTION]


def test_union_points_merges_entries():
    a = state(0, {0: AttributedSet({0: (0.0,), 1: (4.0,)})})
    b = state(1, {0: AttributedSet({1: (4.0,), 2: (8.0,)})})
    assert union_points([a, b], 0) == [(0.0,), (4.0,), (8.0,)]
    assert round_diameters([a, b]) == {0: 8.0}


def test_halt_monotonicity():
    assert check_halt_monotonicity([state(0, halt_history=[6, 4, 4])]).passed
    result = check_halt_monotonicity([state(0, halt_history=[4, 5])])
    assert not result.passed and result.name == HALT_MONOTONICITY


def test_shrinking_diameter():
    assert check_shrinking_diameter({0: 9.0, 1: 6.0, 2: 3.0, 3: 1.0}).passed
    assert not check_shrinking_diameter({1: 6.0, 2: 3.5}).passed


def test_initial_diameter():
    s = state(0, init_diameter=2.0)
    assert check_initial_diameter([s], {1: 6.0}).passed
    assert not check_initial_diameter([s], {1: 6.5}).passed


def test_validity():
    good = state(0, {0: ZERO, 1: AttributedSet({0: (4.0,)})}, output=(5.0,))
    assert check_validity([good]).passed
    bad = state(0, {0: ZERO}, output=(9.5,))
    assert not check_validity([bad]).passed


def test_correctness():
    assert check_correctness({0: (0.0,), 1: (1.0,)}, 1.0).passed
    assert not check_correctness({0: (0.0,), 1: (1.5,)}, 1.0).passed


def test_round_bound():
    # diameter 8, epsilon 1 -> ceil(log2 24) + 1 = 6
    assert check_round_bound([state(0, {0: ZERO}, r=6)], 1.0).passed
    assert not check_round_bound([state(0, {0: ZERO}, r=7)], 1.0).passed


def test_liveness():
    assert not check_liveness([state(0), state(1, output=(1.0,))]).passed


def test_evaluate_honours_disabled_monitors():
    states = [state(0, {0: ZERO}, output=(0.0,)), state(1, {0: ZERO}, output=(5.0,))]
    names = [r.name for r in violations(evaluate(states, 1.0, AlwaysTrue()))]
    assert CORRECTNESS in names
    settings = MonitorSettings(disabled=frozenset({CORRECTNESS}))
    assert CORRECTNESS not in [r.name for r in evaluate(states, 1.0, AlwaysTrue(), settings=settings)]
