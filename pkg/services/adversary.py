# services/adversary.py
"""
Byzantine node strategies and the message scheduler.

A strategy is an immutable description (parsed from the scenario file);
`build` turns it into a Host, the object the simulator drives. Hosts emit
`Emission`s, i.e. broadcasts with an optional recipient restriction that
only a targeted channel or point-to-point links honour.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from services.errors import UsageError
from services.geometry import AttributedSet, Point, as_point, vote_mean
from services.messages import Enough, InitValue, ProtocolMessage, ReportSet, Value
from services.protocol import Observer, StepOutput, VaadNode
from services.validity import ValidityPredicate

logger = logging.getLogger(__name__)


class Emission(NamedTuple):
    message: ProtocolMessage
    recipients: Optional[Tuple[int, ...]] = None
    replica: int = 0


@dataclass(frozen=True)
class HostContext:
    n: int
    t: int
    m: int
    epsilon: float
    predicate: ValidityPredicate
    allow_small_n: bool = False

    def node(self, node_id: int, observer: Optional[Observer] = None, cls=VaadNode) -> VaadNode:
        return cls(node_id, self.n, self.t, self.m, self.epsilon, self.predicate,
                   observer=observer, allow_small_n=self.allow_small_n)


def _emissions(out: StepOutput, recipients=None, replica: int = 0) -> List[Emission]:
    return [Emission(msg, recipients, replica) for msg in out.outgoing]


# -- hosts -----------------------------------------------------------------------

class Host:
    """Anything the simulator can start and deliver to"""
    correct = False
    strategy = "honest"

    def __init__(self, node_id: int):
        self.node_id = node_id

    def start(self) -> List[Emission]:
        return []

    def deliver(self, sender: int, msg: ProtocolMessage, replica: int = 0) -> List[Emission]:
        return []

    @property
    def relays(self) -> bool:
        """Whether the host still takes part in reliable-broadcast relaying"""
        return True

    @property
    def terminated(self) -> bool:
        return False


class HonestHost(Host):
    def __init__(self, node: VaadNode, input_point: Point, correct: bool = True, strategy: str = "honest"):
        super().__init__(node.state.id)
        self.node = node
        self.input = input_point
        self.correct = correct
        self.strategy = strategy

    def start(self) -> List[Emission]:
        return self.transform(_emissions(self.node.start(self.input)))

    def deliver(self, sender: int, msg: ProtocolMessage, replica: int = 0) -> List[Emission]:
        return self.transform(_emissions(self.node.deliver(sender, msg)))

    def transform(self, emissions: List[Emission]) -> List[Emission]:
        return emissions

    @property
    def terminated(self) -> bool:
        return self.node.terminated


class SilentHost(Host):
    strategy = "silent"

    @property
    def relays(self) -> bool:
        return False


class CrashHost(HonestHost):
    """Honest through `after_round`; the first later message is dropped and the node halts for good"""

    def __init__(self, node: VaadNode, input_point: Point, after_round: int):
        super().__init__(node, input_point, correct=False, strategy="crash")
        self.after_round = after_round
        self.crashed = False

    def start(self) -> List[Emission]:
        if self.crashed:
            return []
        return super().start()

    def deliver(self, sender, msg, replica=0):
        if self.crashed:
            return []
        return super().deliver(sender, msg, replica)

    def transform(self, emissions):
        kept = []
        for emission in emissions:
            if emission.message.tag.round > self.after_round:
                self.crashed = True
                logger.debug(f"node {self.node_id} crashed after round {self.after_round}")
                break
            kept.append(emission)
        return kept

    @property
    def relays(self) -> bool:
        return not self.crashed


class ForgedVoteHost(HonestHost):
    def __init__(self, node: VaadNode, input_point: Point, perturbation: Point):
        super().__init__(node, input_point, correct=False, strategy="forged_vote")
        self.perturbation = perturbation

    def transform(self, emissions):
        forged = []
        for emission in emissions:
            msg = emission.message
            if isinstance(msg, Value):
                v = tuple(a + b for a, b in zip(msg.v, self.perturbation))
                msg = Value(v, msg.rec_vals, msg.rec_reps, msg.round)
            forged.append(emission._replace(message=msg))
        return forged


class EquivocatorHost(HonestHost):
    """Replaces the honest broadcast for one tag by two conflicting payloads,
    the first to ids below n // 2 and the second to the rest"""

    def __init__(self, node: VaadNode, input_point: Point, payloads: Tuple[ProtocolMessage, ProtocolMessage]):
        super().__init__(node, input_point, correct=False, strategy="equivocator")
        self.payloads = payloads

    def transform(self, emissions):
        n = self.node.state.n
        tag = self.payloads[0].tag
        split = n // 2
        result = []
        for emission in emissions:
            if emission.message.tag != tag:
                result.append(emission)
                continue
            result.append(Emission(self.payloads[0], tuple(range(split))))
            result.append(Emission(self.payloads[1], tuple(range(split, n))))
        return result


class MirrorHost(Host):
    """Two honest replicas under one id, each talking only to its own group.

    Other mirror ids (`peers`) hear both replicas; a message from a peer is
    routed to the replica of the same side it was sent from.
    """
    strategy = "mirror"

    def __init__(self, replicas: Sequence[VaadNode], inputs: Sequence[Point], groups: Sequence[Sequence[int]],
                 peers: Sequence[int] = ()):
        super().__init__(replicas[0].state.id)
        self.replicas = list(replicas)
        self.inputs = list(inputs)
        self.peers = set(peers) - {self.node_id}
        self.groups = [tuple(sorted(set(g) | self.peers | {self.node_id})) for g in groups]
        self._members = [set(g) - self.peers - {self.node_id} for g in groups]

    def start(self) -> List[Emission]:
        emissions = []
        for k, replica in enumerate(self.replicas):
            emissions.extend(_emissions(replica.start(self.inputs[k]), self.groups[k], k))
        return emissions

    def deliver(self, sender, msg, replica=0):
        if sender == self.node_id or sender in self.peers:
            targets = [replica]
        elif sender in self._members[0]:
            targets = [0]
        elif sender in self._members[1]:
            targets = [1]
        else:
            targets = [0, 1]
        emissions = []
        for k in targets:
            emissions.extend(_emissions(self.replicas[k].deliver(sender, msg), self.groups[k], k))
        return emissions


class SkewedNode(VaadNode):
    """Protocol-legal node whose subset choices push the vote along `bias`"""

    def __init__(self, *args, bias: Point, **kwargs):
        super().__init__(*args, **kwargs)
        self.bias = np.asarray(bias, dtype=float)

    def _score(self, p: Point) -> float:
        return float(np.dot(self.bias, p))

    def _mean_score(self, s: AttributedSet) -> float:
        return self._score(vote_mean(s))

    def _select_report(self, rnd: int) -> AttributedSet:
        values = self.state.values_at(rnd)
        ranked = sorted(values.items(), key=lambda item: (-self._score(item[1]), item[0]))
        return values.restricted_to(s for s, _ in ranked[:self.state.quorum])

    def _select_witnesses(self, rnd: int) -> Tuple[AttributedSet, ReportSet]:
        values = self.state.values_at(rnd)
        reports = self.state.reports_at(rnd)
        ranked = sorted(reports.items(), key=lambda item: (-self._mean_score(item[1]), item[0]))
        chosen = reports.restricted_to(r for r, _ in ranked[:self.state.quorum])

        rec_vals = chosen.covered_senders()
        extras = sorted(values.without(rec_vals.senders()).items(), key=lambda item: (-self._score(item[1]), item[0]))
        for sender, point in extras:
            candidate = rec_vals.with_entry(sender, point)
            if self._mean_score(candidate) > self._mean_score(rec_vals):
                rec_vals = candidate
            else:
                break
        return rec_vals, chosen

    def _round_one_vote(self, rec_vals: AttributedSet) -> Point:
        trimmed = self._trim(rec_vals)
        return max(trimmed.points(), key=self._score)


# -- strategies ------------------------------------------------------------------

class AdversaryStrategy:
    kind = "base"

    def build(self, node_id: int, ctx: HostContext, honest_input: Point) -> Host:
        raise NotImplementedError


@dataclass(frozen=True)
class Silent(AdversaryStrategy):
    kind = "silent"

    def build(self, node_id, ctx, honest_input):
        return SilentHost(node_id)


@dataclass(frozen=True)
class Crash(AdversaryStrategy):
    after_round: int
    kind = "crash"

    def build(self, node_id, ctx, honest_input):
        return CrashHost(ctx.node(node_id), honest_input, self.after_round)


@dataclass(frozen=True)
class ExtremeHonest(AdversaryStrategy):
    target: Point
    kind = "extreme_honest"

    def build(self, node_id, ctx, honest_input):
        return HonestHost(ctx.node(node_id), as_point(self.target, ctx.m), correct=False, strategy=self.kind)


@dataclass(frozen=True)
class InvalidInput(AdversaryStrategy):
    v: Point
    kind = "invalid_input"

    def build(self, node_id, ctx, honest_input):
        return HonestHost(ctx.node(node_id), as_point(self.v, ctx.m), correct=False, strategy=self.kind)


@dataclass(frozen=True)
class ForgedVote(AdversaryStrategy):
    perturbation: Point
    kind = "forged_vote"

    def build(self, node_id, ctx, honest_input):
        return ForgedVoteHost(ctx.node(node_id), honest_input, as_point(self.perturbation, ctx.m))


@dataclass(frozen=True)
class SkewedSubset(AdversaryStrategy):
    bias: Point
    kind = "skewed_subset"

    def build(self, node_id, ctx, honest_input):
        node = SkewedNode(node_id, ctx.n, ctx.t, ctx.m, ctx.epsilon, ctx.predicate,
                          bias=as_point(self.bias, ctx.m), allow_small_n=ctx.allow_small_n)
        return HonestHost(node, honest_input, correct=False, strategy=self.kind)


@dataclass(frozen=True)
class Equivocator(AdversaryStrategy):
    payloads: Tuple[ProtocolMessage, ProtocolMessage]
    kind = "equivocator"

    def __post_init__(self):
        first, second = self.payloads
        if first.tag != second.tag:
            raise UsageError(f"equivocation payloads need one tag, got {first.tag.label()} and {second.tag.label()}",
                             field="payloads")

    def build(self, node_id, ctx, honest_input):
        first = self.payloads[0]
        if isinstance(first, InitValue):
            honest_input = first.v
        return EquivocatorHost(ctx.node(node_id), honest_input, self.payloads)


@dataclass(frozen=True)
class Mirror(AdversaryStrategy):
    inputs: Tuple[Point, Point]
    groups: Tuple[Tuple[int, ...], Tuple[int, ...]]
    peers: Tuple[int, ...] = ()
    kind = "mirror"

    def build(self, node_id, ctx, honest_input):
        replicas = [ctx.node(node_id), ctx.node(node_id)]
        return MirrorHost(replicas, [as_point(v, ctx.m) for v in self.inputs], self.groups, self.peers)


def _payload_from_spec(spec: Dict[str, Any]) -> ProtocolMessage:
    kind = spec.get("kind")
    if kind == "init_value":
        return InitValue(as_point(spec["v"]))
    if kind == "enough":
        e = int(spec["e"])
        if e < 1:
            raise UsageError(f"enough estimate must be positive, got {e}", field="e")
        return Enough(e)
    raise UsageError(f"Unknown equivocation payload kind: {kind!r}", field="kind")


def strategy_from_spec(spec: Dict[str, Any]) -> AdversaryStrategy:
    kind = spec.get("strategy")
    if kind == "silent":
        return Silent()
    if kind == "crash":
        return Crash(int(spec.get("after_round", 0)))
    if kind == "extreme_honest":
        return ExtremeHonest(as_point(spec["target"]))
    if kind == "invalid_input":
        return InvalidInput(as_point(spec["v"]))
    if kind == "forged_vote":
        return ForgedVote(as_point(spec["perturbation"]))
    if kind == "skewed_subset":
        return SkewedSubset(as_point(spec["bias"]))
    if kind == "equivocator":
        payloads = spec["payloads"]
        if len(payloads) != 2:
            raise UsageError("equivocator needs exactly two payloads", field="payloads")
        return Equivocator((_payload_from_spec(payloads[0]), _payload_from_spec(payloads[1])))
    if kind == "mirror":
        inputs = tuple(as_point(v) for v in spec["inputs"])
        groups = tuple(tuple(int(i) for i in g) for g in spec["groups"])
        if len(inputs) != 2 or len(groups) != 2:
            raise UsageError("mirror needs two inputs and two groups", field="groups")
        peers = tuple(int(i) for i in spec.get("peers", ()))
        return Mirror(inputs, groups, peers)
    raise UsageError(f"Unknown adversary strategy: {kind!r}", field="strategy")


def adversary_step(host: Host, sender: Optional[int] = None, msg: Optional[ProtocolMessage] = None,
                   replica: int = 0) -> List[Emission]:
    """Feed one observed event to a host; no message means the start event"""
    if msg is None:
        return host.start()
    return host.deliver(sender, msg, replica)


# -- scheduling ------------------------------------------------------------------

class SendEvent(NamedTuple):
    time: int
    src: int
    dst: int
    seq: int


class SchedulerPolicy:
    kind = "base"

    def delay(self, event: SendEvent, seed: int) -> int:
        raise NotImplementedError


@dataclass(frozen=True)
class Fifo(SchedulerPolicy):
    kind = "fifo"

    def delay(self, event, seed):
        return 1


@dataclass(frozen=True)
class RandomDelay(SchedulerPolicy):
    max_delay: int
    kind = "random_delay"

    def __post_init__(self):
        if self.max_delay < 1:
            raise UsageError(f"max_delay must be at least 1, got {self.max_delay}", field="max_delay")

    def delay(self, event, seed):
        rng = np.random.default_rng([seed, event.seq])
        return int(rng.integers(1, self.max_delay + 1))


@dataclass(frozen=True)
class TargetedDelay(SchedulerPolicy):
    victims: Tuple[int, ...]
    delay_factor: int
    kind = "targeted_delay"

    def __post_init__(self):
        if self.delay_factor < 1:
            raise UsageError(f"delay_factor must be at least 1, got {self.delay_factor}", field="delay_factor")

    def delay(self, event, seed):
        if event.src in self.victims or event.dst in self.victims:
            return self.delay_factor
        return 1


@dataclass(frozen=True)
class PartitionUntil(SchedulerPolicy):
    groups: Tuple[Tuple[int, ...], ...]
    release_time: int
    kind = "partition_until"

    def _group_of(self, node: int) -> Optional[int]:
        for k, group in enumerate(self.groups):
            if node in group:
                return k
        return None

    def delay(self, event, seed):
        a, b = self._group_of(event.src), self._group_of(event.dst)
        if a is not None and b is not None and a != b and event.time < self.release_time:
            return max(1, self.release_time - event.time)
        return 1


def schedule(policy: SchedulerPolicy, send_event: SendEvent, seed: int) -> int:
    """Delivery time for one link message; always later than the send and finite"""
    return send_event.time + policy.delay(send_event, seed)


def policy_from_spec(spec: Dict[str, Any]) -> SchedulerPolicy:
    kind = spec.get("policy", "fifo")
    if kind == "fifo":
        return Fifo()
    if kind == "random_delay":
        return RandomDelay(int(spec["max_delay"]))
    if kind == "targeted_delay":
        return TargetedDelay(tuple(int(v) for v in spec["victims"]), int(spec["delay_factor"]))
    if kind == "partition_until":
        groups = tuple(tuple(int(i) for i in g) for g in spec["groups"])
        return PartitionUntil(groups, int(spec["release_time"]))
    raise UsageError(f"Unknown scheduler policy: {kind!r}", field="policy")
