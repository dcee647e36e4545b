# tests/test_protocol.py
from collections import deque

import pytest

from services.errors import UsageError
from services.geometry import AttributedSet, distance, elim, vote_mean
from services.messages import Enough, InitValue, Report, ReportSet, Value
from services.protocol import NodeState, Phase, VaadNode, compute_enough
from services.validity import AlwaysTrue, BoxPredicate


def make_nodes(n=4, t=1, m=1, epsilon=1.0, predicate=None, observer=None):
    predicate = predicate or AlwaysTrue()
    return [VaadNode(i, n, t, m, epsilon, predicate, observer) for i in range(n)]


def run_fifo(nodes, inputs):
    """Deliver every broadcast to every started node in send order; None inputs stay silent"""
    live = [i for i, v in enumerate(inputs) if v is not None]
    queue = deque()
    for i in live:
        queue.extend((i, msg) for msg in nodes[i].start(inputs[i]).outgoing)
    while queue:
        sender, msg = queue.popleft()
        for i in live:
            out = nodes[i].deliver(sender, msg)
            queue.extend((i, reply) for reply in out.outgoing)
    return [nodes[i] for i in live]


class TestComputeEnough:
    @pytest.mark.parametrize("D,eps,expected", [
        (9.0, 1.0, 6),
        (9.0, 0.1, 10),
        (9.0, 0.01, 13),
        (1.0, 3.0, 1),
        (0.0, 0.5, 1),
    ])
    def test_values(self, D, eps, expected):
        assert compute_enough(D, eps) == expected

    def test_epsilon_must_be_positive(self):
        with pytest.raises(UsageError):
            compute_enough(1.0, 0.0)


class TestNodeState:
    def test_rejects_small_n(self):
        with pytest.raises(UsageError):
            NodeState(0, 3, 1, 1, 1.0)

    def test_small_n_allowed_for_demonstrations(self):
        assert NodeState(0, 3, 1, 1, 1.0, allow_small_n=True).quorum == 2

    def test_rejects_bad_epsilon(self):
        with pytest.raises(UsageError):
            NodeState(0, 4, 1, 1, 0.0)


def test_start_twice():
    node = make_nodes()[0]
    out = node.start((1.0,))
    assert out.outgoing == [InitValue((1.0,))]
    with pytest.raises(UsageError):
        node.start((1.0,))


def test_start_checks_dimension():
    with pytest.raises(UsageError):
        make_nodes(m=2)[0].start((1.0,))


def test_identical_inputs_agree_in_one_round():
    nodes = run_fifo(make_nodes(m=2), [(2.0, 3.0)] * 4)
    for node in nodes:
        assert node.state.enough == 1
        assert node.state.output == (2.0, 3.0)
        assert node.state.r == 1


def test_reference_run_with_silent_node():
    nodes = run_fifo(make_nodes(epsilon=1.0), [(0.0,), (0.0,), (9.0,), None])
    outputs = [node.state.output for node in nodes]
    assert all(o is not None for o in outputs)
    assert all(0.0 <= o[0] <= 9.0 for o in outputs)
    assert max(distance(a, b) for a in outputs for b in outputs) <= 1.0
    assert all(node.state.r <= 6 for node in nodes)


def test_spread_inputs_converge():
    inputs = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0), (5.0, 5.0), (1.0, 9.0), (7.0, 2.0)]
    nodes = run_fifo(make_nodes(n=7, t=2, m=2, epsilon=0.25), inputs)
    outputs = [node.state.output for node in nodes]
    assert max(distance(a, b) for a in outputs for b in outputs) <= 0.25
    assert all(node.state.phase == Phase.TERMINATED for node in nodes)


class TestInitValue:
    def test_duplicate_is_ignored(self):
        node = make_nodes()[0]
        assert node.on_init_value(1, (1.0,)).state_changed
        assert not node.on_init_value(1, (5.0,)).state_changed
        assert node.state.values[0][1] == (1.0,)

    def test_invalid_input_is_rejected(self):
        node = make_nodes(predicate=BoxPredicate((0.0,), (1.0,)))[0]
        node.on_init_value(2, (3.0,))
        assert 2 not in node.state.values_at(0)

    def test_report_after_quorum(self):
        node = make_nodes()[0]
        node.on_init_value(0, (0.0,))
        node.on_init_value(1, (1.0,))
        out = node.on_init_value(2, (2.0,))
        assert out.outgoing == [Report(AttributedSet({0: (0.0,), 1: (1.0,), 2: (2.0,)}), 0)]
        assert node.on_init_value(3, (3.0,)).outgoing == []


class TestEnough:
    def test_halt_is_second_smallest_and_only_drops(self):
        node = make_nodes()[0]
        node.on_enough(0, 5)
        node.on_enough(1, 3)
        assert node.state.halt is None
        node.on_enough(2, 7)
        assert node.state.halt == 5
        node.on_enough(3, 1)
        assert node.state.halt == 3
        assert node.state.halt_history == [5, 3]

    def test_duplicate_sender_counted_once(self):
        node = make_nodes()[0]
        node.on_enough(0, 5)
        node.on_enough(0, 2)
        assert node.state.termination_times == [5]


VALS0 = AttributedSet({0: (0.0,), 1: (4.0,), 2: (8.0,), 3: (100.0,)})


def running_node(rnd):
    """A node at round `rnd` whose previous round holds VALS0 and full reports"""
    node = make_nodes()[0]
    s = node.state
    s.phase = Phase.RUNNING
    s.r = rnd
    s.values[rnd - 1] = VALS0
    s.reports[rnd - 1] = ReportSet({i: VALS0.restricted_to([0, 1, 2]) for i in range(3)})
    return node


class TestValueReadiness:
    reps = ReportSet({i: VALS0.restricted_to([0, 1, 2]) for i in range(3)})

    def test_round_one_vote_inside_trimmed_hull(self):
        node = running_node(1)
        assert node.value_message_ready(Value((4.0,), VALS0, self.reps, 1), 1)

    def test_round_one_vote_outside_trimmed_hull(self):
        node = running_node(1)
        # elim drops the extreme pair, leaving {4, 8}
        assert elim(1, VALS0).points() == [(4.0,), (8.0,)]
        assert not node.value_message_ready(Value((50.0,), VALS0, self.reps, 1), 1)

    def test_later_rounds_need_the_exact_mean(self):
        node = running_node(2)
        good = vote_mean(VALS0)
        assert node.value_message_ready(Value(good, VALS0, self.reps, 2), 1)
        assert not node.value_message_ready(Value((good[0] + 1e-9,), VALS0, self.reps, 2), 1)

    def test_witnesses_must_be_known(self):
        node = running_node(2)
        foreign = VALS0.with_entry(5, (1.0,)).restricted_to([0, 1, 5])
        assert not node.value_message_ready(Value(vote_mean(foreign), foreign, self.reps, 2), 1)

    def test_reports_must_be_inside_values(self):
        node = running_node(2)
        small = VALS0.restricted_to([1, 2, 3])
        assert not node.value_message_ready(Value(vote_mean(small), small, self.reps, 2), 1)

    def test_future_round_waits(self):
        node = running_node(1)
        assert not node.value_message_ready(Value(vote_mean(VALS0), VALS0, self.reps, 2), 1)

    def test_forged_value_waits_and_is_never_accepted(self):
        node = running_node(2)
        out = node.on_value(3, Value((99.0,), VALS0, self.reps, 2))
        assert out.outgoing == []
        assert 3 not in node.state.values_at(2)
        assert len(node.state.waiting_values) == 1


def test_late_previous_round_value_is_accepted_in_the_next_round():
    node = make_nodes()[0]
    s = node.state
    s.phase = Phase.RUNNING
    s.r = 2
    s.report_sent = {0, 1}
    s.values[0] = VALS0.restricted_to([0, 1, 2])
    s.reports[0] = ReportSet({i: VALS0.restricted_to([0, 1, 2]) for i in range(3)})
    late = Value((4.0,), VALS0, s.reports[0], 1)

    node.on_value(3, late)
    # the witness set names sender 3, whose input has not arrived yet
    assert 3 not in s.values_at(1)
    assert s.waiting_values == [(3, late)]

    out = node.on_init_value(3, (100.0,))
    assert out.state_changed
    assert s.values_at(1)[3] == (4.0,)
    assert s.accepted_values[1][3] == late
    assert s.waiting_values == []
    assert s.r == 2


def test_observer_sees_termination():
    events = []
    nodes = make_nodes(observer=lambda node, event, **fields: events.append((node, event)))
    run_fifo(nodes, [(1.0,)] * 4)
    assert {(i, "terminate") for i in range(4)} <= set(events)
    assert (0, "send") in events


def test_terminated_node_ignores_messages():
    nodes = run_fifo(make_nodes(), [(1.0,)] * 4)
    assert not nodes[0].deliver(1, Enough(3)).state_changed
