# services/sim.py
"""
Deterministic discrete-event simulator.

Events run in (delivery time, sequence number) order on integer virtual
time. The run is a pure function of the SimConfig: every random choice is
derived from the config seed.
"""
import heapq
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import config
from services.adversary import (
    AdversaryStrategy, Emission, Fifo, HonestHost, Host, HostContext, Mirror, SchedulerPolicy,
    SendEvent, schedule,
)
from services.broadcast import (
    BroadcastInstanceId, BroadcastMode, IdealChannel, LinkMessage, RbcState,
)
from services.errors import DecodeError, LivenessFailure, MonitorViolation, ScenarioError, UsageError
from services.geometry import Point, as_point
from services.logging_service import TraceLog
from services.messages import ProtocolMessage, Value, decode, digest, encode
from services.monitors import (
    MONITOR_NAMES, MonitorResult, MonitorSettings, OnlineMonitors, evaluate, max_pairwise, round_diameters, violations,
)
from services.protocol import NodeState
from services.validity import AlwaysTrue, ValidityPredicate, ex_val

logger = logging.getLogger(__name__)


@dataclass
class SimConfig:
    n: int
    t: int
    m: int
    epsilon: float
    inputs: List[Point]
    seed: int = config.DEFAULT_SEED
    broadcast: BroadcastMode = BroadcastMode.IDEAL
    adversaries: Dict[int, AdversaryStrategy] = field(default_factory=dict)
    scheduler: SchedulerPolicy = field(default_factory=Fifo)
    predicate: ValidityPredicate = field(default_factory=AlwaysTrue)
    max_events: Optional[int] = None
    lower_bound_demo: bool = False
    monitors: MonitorSettings = field(default_factory=MonitorSettings)
    trace: bool = True
    name: str = "scenario"

    @property
    def correct_ids(self) -> List[int]:
        return [i for i in range(self.n) if i not in self.adversaries]

    def event_cap(self) -> int:
        return self.max_events if self.max_events is not None else config.max_events()

    def validate(self) -> 'SimConfig':
        """Check the config invariants; raises ScenarioError naming the offending field"""
        if self.t < 0:
            raise ScenarioError(f"must be nonnegative, got {self.t}", "t")
        if self.n < 1:
            raise ScenarioError(f"must be positive, got {self.n}", "n")
        if self.n < 3 * self.t + 1 and not self.lower_bound_demo:
            raise ScenarioError(f"n={self.n} needs n >= 3t + 1 = {3 * self.t + 1} unless lower_bound_demo is set", "n")
        if self.m < 1:
            raise ScenarioError(f"must be positive, got {self.m}", "m")
        if not self.epsilon > 0:
            raise ScenarioError(f"must be positive, got {self.epsilon}", "epsilon")
        if self.max_events is not None and self.max_events < 1:
            raise ScenarioError(f"must be positive, got {self.max_events}", "max_events")
        if self.predicate.dim is not None and self.predicate.dim != self.m:
            raise ScenarioError(f"predicate dimension {self.predicate.dim} differs from m={self.m}", "predicate")
        if len(self.inputs) != self.n:
            raise ScenarioError(f"expected {self.n} inputs, got {len(self.inputs)}", "inputs")
        if len(self.adversaries) > self.t:
            raise ScenarioError(f"{len(self.adversaries)} adversarial slots exceed t={self.t}", "adversaries")

        for node, strategy in self.adversaries.items():
            if not 0 <= node < self.n:
                raise ScenarioError(f"node id {node} out of range", f"adversaries[{node}].node")
            if isinstance(strategy, Mirror):
                if self.broadcast != BroadcastMode.IDEAL:
                    raise ScenarioError("mirror runs only over the ideal channel", f"adversaries[{node}].strategy")
                members = [i for g in strategy.groups for i in g]
                if any(not 0 <= i < self.n for i in members):
                    raise ScenarioError("group member out of range", f"adversaries[{node}].groups")

        normalized = []
        for i, v in enumerate(self.inputs):
            try:
                p = as_point(v, self.m)
            except UsageError as e:
                raise ScenarioError(e.message, f"inputs[{i}]")
            if i not in self.adversaries and not ex_val(self.predicate, p):
                raise ScenarioError(f"correct input {p} fails the validity predicate", f"inputs[{i}]")
            normalized.append(p)
        self.inputs = normalized

        unknown = set(self.monitors.disabled) - set(MONITOR_NAMES)
        if unknown:
            raise ScenarioError(f"unknown monitors {sorted(unknown)}", "monitors.disabled")
        return self


@dataclass
class SimResult:
    config: SimConfig
    outputs: Dict[int, Point]
    rounds: Dict[int, int]
    diameters: Dict[int, float]
    events: int
    end_time: int
    trace: TraceLog
    monitors: List[MonitorResult]
    states: Dict[int, NodeState]
    link_messages: int = 0
    link_bytes: int = 0
    suppressed: int = 0

    @property
    def trace_digest(self) -> str:
        return self.trace.digest

    @property
    def violations(self) -> List[MonitorResult]:
        return violations(self.monitors)

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def max_pairwise_output(self) -> float:
        return max_pairwise([self.outputs[i] for i in sorted(self.outputs)])

    def summary(self) -> Dict[str, Any]:
        histogram = Counter(self.rounds.values())
        return {
            "name": self.config.name,
            "seed": self.config.seed,
            "broadcast": self.config.broadcast.value,
            "terminated": len(self.outputs),
            "correct": len(self.config.correct_ids),
            "events": self.events,
            "end_time": self.end_time,
            "rounds_histogram": {r: histogram[r] for r in sorted(histogram)},
            "final_rounds_max": max(self.rounds.values()) if self.rounds else 0,
            "max_pairwise_output": self.max_pairwise_output,
            "diameters": dict(self.diameters),
            "link_messages": self.link_messages,
            "link_bytes": self.link_bytes,
            "trace_digest": self.trace_digest,
            "monitors_passed": self.passed,
            "violations": [f"{v.name}: {v.detail}" for v in self.violations],
        }


class _ProtocolDelivery:
    __slots__ = ('src', 'dst', 'msg', 'replica')

    def __init__(self, src: int, dst: int, msg: ProtocolMessage, replica: int):
        self.src = src
        self.dst = dst
        self.msg = msg
        self.replica = replica


class _LinkDelivery:
    __slots__ = ('src', 'dst', 'link')

    def __init__(self, src: int, dst: int, link: LinkMessage):
        self.src = src
        self.dst = dst
        self.link = link


Delivery = Union[_ProtocolDelivery, _LinkDelivery]


class Simulator:
    """One run: hosts, the event queue and the broadcast layer"""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg.validate()
        self.time = 0
        self.seq = 0
        self.events = 0
        self.queue: List[Tuple[int, int, Delivery]] = []
        self.trace = TraceLog(keep_lines=cfg.trace)
        self.link_messages = 0
        self.link_bytes = 0

        ctx = HostContext(cfg.n, cfg.t, cfg.m, cfg.epsilon, cfg.predicate, allow_small_n=cfg.lower_bound_demo)
        self.hosts: List[Host] = []
        for i in range(cfg.n):
            strategy = cfg.adversaries.get(i)
            if strategy is None:
                host = HonestHost(ctx.node(i, observer=self._observe), cfg.inputs[i])
            else:
                host = strategy.build(i, ctx, cfg.inputs[i])
            self.hosts.append(host)

        self.correct = [h for h in self.hosts if h.correct]
        self.online = OnlineMonitors(cfg.n, cfg.t, (h.node_id for h in self.correct))
        if cfg.broadcast == BroadcastMode.IDEAL:
            self.channel = IdealChannel(cfg.n, targeted=cfg.lower_bound_demo)
            self.rbc: List[RbcState] = []
        else:
            self.channel = None
            self.rbc = [RbcState(i, cfg.n, cfg.t) for i in range(cfg.n)]

    # -- observation -----------------------------------------------------------

    def _observe(self, node: int, event: str, round=None, digest=None, diameter=None, **extra):
        self.trace.node(self.time, node, event, round=round, digest=digest, diameter=diameter, **extra)

    # -- queueing --------------------------------------------------------------

    def _enqueue(self, src: int, dst: int, delivery: Delivery):
        self.seq += 1
        when = schedule(self.cfg.scheduler, SendEvent(self.time, src, dst, self.seq), self.cfg.seed)
        if when <= self.time:
            raise UsageError(f"scheduler produced delivery time {when} not after {self.time}", field="scheduler")
        heapq.heappush(self.queue, (when, self.seq, delivery))

    def _dispatch(self, src: int, emissions: List[Emission]):
        host = self.hosts[src]
        for emission in emissions:
            msg = emission.message
            if host.correct and isinstance(msg, Value):
                self.online.on_value_sent(src, msg)
            if self.channel is not None:
                self._dispatch_ideal(src, emission)
            else:
                self._dispatch_bracha(src, emission)

    def _dispatch_ideal(self, src: int, emission: Emission):
        msg = emission.message
        recipients = self.channel.ideal_broadcast(src, msg, emission.recipients)
        if not recipients:
            return
        d = digest(msg)
        size = len(encode(msg))
        label = BroadcastInstanceId(src, msg.tag).label()
        for dst in recipients:
            self.link_messages += 1
            self.link_bytes += size
            self.trace.link(self.time, src, dst, label, "broadcast", d)
            self._enqueue(src, dst, _ProtocolDelivery(src, dst, msg, emission.replica))

    def _dispatch_bracha(self, src: int, emission: Emission):
        msg = emission.message
        instance = BroadcastInstanceId(src, msg.tag)
        send = self.rbc[src].make_send(instance, encode(msg))
        recipients = emission.recipients if emission.recipients is not None else range(self.cfg.n)
        for dst in recipients:
            self._send_link(src, dst, send)

    def _send_link(self, src: int, dst: int, link: LinkMessage):
        self.link_messages += 1
        self.link_bytes += link.size()
        self.trace.link(self.time, src, dst, link.instance.label(), link.kind.value, link.digest)
        self._enqueue(src, dst, _LinkDelivery(src, dst, link))

    # -- event handling --------------------------------------------------------

    def _handle(self, delivery: Delivery):
        if isinstance(delivery, _ProtocolDelivery):
            self._deliver_protocol(delivery.src, delivery.dst, delivery.msg, delivery.replica)
            return

        host = self.hosts[delivery.dst]
        if not host.relays:
            return
        step = self.rbc[delivery.dst].step(delivery.src, delivery.link)
        for out in step.outgoing:
            for dst in range(self.cfg.n):
                self._send_link(delivery.dst, dst, out)
        if step.delivery is not None:
            instance, payload = step.delivery
            try:
                msg = decode(payload)
            except DecodeError as e:
                logger.debug(f"node {delivery.dst}: ignoring undecodable payload on {instance.label()}: {e}")
                return
            if msg.tag != instance.tag:
                logger.debug(f"node {delivery.dst}: payload tag does not match {instance.label()}")
                return
            self._deliver_protocol(instance.sender, delivery.dst, msg, 0)

    def _deliver_protocol(self, src: int, dst: int, msg: ProtocolMessage, replica: int):
        host = self.hosts[dst]
        if host.correct:
            label = BroadcastInstanceId(src, msg.tag).label()
            self.online.on_delivery(dst, src, label, digest(msg))
        self._dispatch(dst, host.deliver(src, msg, replica))

    def _all_correct_terminated(self) -> bool:
        return all(h.terminated for h in self.correct)

    # -- driver ----------------------------------------------------------------

    def run(self) -> SimResult:
        cfg = self.cfg
        cap = cfg.event_cap()
        logger.info(f"run {cfg.name}: n={cfg.n} t={cfg.t} m={cfg.m} eps={cfg.epsilon} "
                    f"seed={cfg.seed} broadcast={cfg.broadcast.value}")

        for host in self.hosts:
            self._dispatch(host.node_id, host.start())

        while not self._all_correct_terminated():
            if not self.queue:
                raise LivenessFailure(f"event queue drained at time {self.time} before all correct nodes terminated",
                                      self.events, self.trace)
            if self.events >= cap:
                raise LivenessFailure(f"event cap {cap} exceeded at time {self.time}", self.events, self.trace)
            when, _, delivery = heapq.heappop(self.queue)
            self.time = when
            self.events += 1
            self._handle(delivery)

        return self._result()

    def _result(self) -> SimResult:
        cfg = self.cfg
        states = {h.node_id: h.node.state for h in self.correct}
        ordered = [states[i] for i in sorted(states)]
        monitors = evaluate(ordered, cfg.epsilon, cfg.predicate, self.online, cfg.monitors)
        result = SimResult(
            config=cfg,
            outputs={s.id: s.output for s in ordered if s.output is not None},
            rounds={s.id: s.r for s in ordered},
            diameters=round_diameters(ordered),
            events=self.events,
            end_time=self.time,
            trace=self.trace,
            monitors=monitors,
            states=states,
            link_messages=self.link_messages,
            link_bytes=self.link_bytes,
            suppressed=len(self.channel.suppressed) if self.channel is not None else 0,
        )
        failed = result.violations
        if failed:
            logger.warning(f"run {cfg.name} seed={cfg.seed}: {len(failed)} monitor violation(s): "
                           f"{', '.join(v.name for v in failed)}")
            if cfg.monitors.enforce:
                raise MonitorViolation(failed[0].name, failed[0].detail, result)
        return result


def run(cfg: SimConfig) -> SimResult:
    """Execute one configuration to termination of every correct node"""
    return Simulator(cfg).run()
