# tests/test_broadcast.py
import itertools
import random

import pytest

from services.broadcast import (
    BroadcastInstanceId, IdealChannel, LinkKind, LinkMessage, RbcPhase, RbcState, rbc_step,
)
from services.messages import Enough, InitValue, MessageKind, MessageTag, encode, payload_digest

N, T = 4, 1
TAG = MessageTag(0, MessageKind.INIT_VALUE)
PAYLOAD_A = encode(InitValue((1.0,)))
PAYLOAD_B = encode(InitValue((3.0,)))


class TestIdealChannel:
    def test_broadcast_reaches_everyone(self):
        channel = IdealChannel(4)
        assert channel.ideal_broadcast(1, InitValue((0.0,))) == [0, 1, 2, 3]

    def test_second_payload_for_a_tag_is_suppressed(self):
        channel = IdealChannel(4)
        channel.ideal_broadcast(3, InitValue((1.0,)), recipients=(0, 1))
        assert channel.ideal_broadcast(3, InitValue((3.0,)), recipients=(2, 3)) == []
        assert len(channel.suppressed) == 1

    def test_recipient_subsets_are_widened(self):
        channel = IdealChannel(4)
        assert channel.ideal_broadcast(2, Enough(3), recipients=(0,)) == [0, 1, 2, 3]

    def test_different_tags_are_independent(self):
        channel = IdealChannel(4)
        channel.ideal_broadcast(0, InitValue((1.0,)))
        assert channel.ideal_broadcast(0, Enough(2)) == [0, 1, 2, 3]

    def test_targeted_mode_honours_recipients(self):
        channel = IdealChannel(3, targeted=True)
        assert channel.ideal_broadcast(2, InitValue((1.0,)), recipients=(2, 0)) == [0, 2]
        assert channel.ideal_broadcast(2, InitValue((5.0,)), recipients=(1, 2)) == [1, 2]
        assert channel.suppressed == []


def run_links(states, initial, order="fifo", seed=0, relay=(0, 1, 2, 3)):
    """Deliver link messages until quiet; returns {node: delivered payload}"""
    rng = random.Random(seed)
    pending = list(initial)
    delivered = {}
    while pending:
        if order == "fifo":
            src, dst, msg = pending.pop(0)
        elif order == "lifo":
            src, dst, msg = pending.pop()
        else:
            src, dst, msg = pending.pop(rng.randrange(len(pending)))
        if dst not in relay:
            continue
        _, outgoing, delivery = rbc_step(states[dst], src, msg)
        for out in outgoing:
            pending.extend((dst, j, out) for j in range(N))
        if delivery is not None:
            assert dst not in delivered, "delivered twice"
            delivered[dst] = delivery[1]
    return delivered


def test_thresholds():
    state = RbcState(0, 4, 1)
    assert (state.echo_threshold, state.ready_threshold, state.deliver_threshold) == (3, 2, 3)


def test_honest_sender_delivers_everywhere():
    states = [RbcState(i, N, T) for i in range(N)]
    instance = BroadcastInstanceId(0, TAG)
    send = states[0].make_send(instance, PAYLOAD_A)
    delivered = run_links(states, [(0, j, send) for j in range(N)])
    assert delivered == {i: PAYLOAD_A for i in range(N)}
    assert states[2].instances[instance].phase == RbcPhase.DELIVERED


def test_hand_trace_single_node():
    """Node 0 sees SEND, three ECHOs, then three READYs"""
    instance = BroadcastInstanceId(1, TAG)
    d = payload_digest(PAYLOAD_A)
    state = RbcState(0, N, T)

    _, out, delivery = rbc_step(state, 1, LinkMessage(LinkKind.SEND, instance, d, PAYLOAD_A))
    assert [m.kind for m in out] == [LinkKind.ECHO] and delivery is None

    for src in (1, 2):
        _, out, _ = rbc_step(state, src, LinkMessage(LinkKind.ECHO, instance, d, PAYLOAD_A))
        assert out == []
    _, out, _ = rbc_step(state, 3, LinkMessage(LinkKind.ECHO, instance, d, PAYLOAD_A))
    assert [m.kind for m in out] == [LinkKind.READY]

    _, _, delivery = rbc_step(state, 1, LinkMessage(LinkKind.READY, instance, d))
    assert delivery is None
    _, _, delivery = rbc_step(state, 2, LinkMessage(LinkKind.READY, instance, d))
    assert delivery is None
    _, _, delivery = rbc_step(state, 3, LinkMessage(LinkKind.READY, instance, d))
    assert delivery == (instance, PAYLOAD_A)


def test_ready_amplification():
    """t+1 READYs make a node send READY without seeing echoes"""
    instance = BroadcastInstanceId(1, TAG)
    d = payload_digest(PAYLOAD_A)
    state = RbcState(0, N, T)
    rbc_step(state, 1, LinkMessage(LinkKind.READY, instance, d))
    _, out, _ = rbc_step(state, 2, LinkMessage(LinkKind.READY, instance, d))
    assert [m.kind for m in out] == [LinkKind.READY]


def test_duplicates_do_not_count():
    instance = BroadcastInstanceId(1, TAG)
    d = payload_digest(PAYLOAD_A)
    state = RbcState(0, N, T)
    for _ in range(3):
        _, out, _ = rbc_step(state, 2, LinkMessage(LinkKind.ECHO, instance, d, PAYLOAD_A))
    assert state.instances[instance].ready_sent is False


def test_send_from_wrong_source_is_ignored():
    instance = BroadcastInstanceId(1, TAG)
    state = RbcState(0, N, T)
    _, out, _ = rbc_step(state, 2, LinkMessage(LinkKind.SEND, instance, payload_digest(PAYLOAD_A), PAYLOAD_A))
    assert out == []


def test_bad_digest_is_dropped():
    instance = BroadcastInstanceId(1, TAG)
    state = RbcState(0, N, T)
    _, out, _ = rbc_step(state, 1, LinkMessage(LinkKind.SEND, instance, payload_digest(PAYLOAD_B), PAYLOAD_A))
    assert out == []


def test_partial_send_never_delivers():
    """A sender that reaches only two nodes cannot gather n - t echoes"""
    states = [RbcState(i, N, T) for i in range(N)]
    instance = BroadcastInstanceId(3, TAG)
    send = states[3].make_send(instance, PAYLOAD_A)
    delivered = run_links(states, [(3, j, send) for j in (0, 1)], relay=(0, 1, 2))
    assert delivered == {}


CHOICES = ("a", "b", None)
ORDERS = [("fifo", 0), ("lifo", 0), ("random", 1), ("random", 2)]


def equivocation_schedules():
    for split in itertools.product(CHOICES, repeat=3):
        for echo in CHOICES:
            for ready in CHOICES:
                yield split, echo, ready


@pytest.mark.parametrize("order,seed", ORDERS)
def test_equivocating_sender_never_splits_correct_nodes(order, seed):
    """Byzantine node 3 sends A or B (or nothing) to each correct node and
    echoes/readies one of them; correct nodes deliver at most one payload,
    all the same one, and all or none of them deliver"""
    instance = BroadcastInstanceId(3, TAG)
    payloads = {"a": PAYLOAD_A, "b": PAYLOAD_B}
    for split, echo, ready in equivocation_schedules():
        states = [RbcState(i, N, T) for i in range(N)]
        initial = []
        for dst, choice in enumerate(split):
            if choice is not None:
                p = payloads[choice]
                initial.append((3, dst, LinkMessage(LinkKind.SEND, instance, payload_digest(p), p)))
        if echo is not None:
            p = payloads[echo]
            initial.extend((3, j, LinkMessage(LinkKind.ECHO, instance, payload_digest(p), p)) for j in range(3))
        if ready is not None:
            d = payload_digest(payloads[ready])
            initial.extend((3, j, LinkMessage(LinkKind.READY, instance, d)) for j in range(3))

        delivered = run_links(states, initial, order=order, seed=seed, relay=(0, 1, 2))
        assert len(set(delivered.values())) <= 1, (split, echo, ready)
        assert len(delivered) in (0, 3), (split, echo, ready)
