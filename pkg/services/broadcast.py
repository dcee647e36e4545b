# services/broadcast.py
"""
Broadcast channels with Validity / Liveness / Uniqueness.

IdealChannel is enforced by the simulator itself and polices Uniqueness
per (sender, tag). RbcState is a per-node Bracha reliable-broadcast state
machine over point-to-point links; it never delivers two payloads for
one instance but may stall under equivocation.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, NamedTuple, Optional, Set, Tuple

from services.errors import UsageError
from services.messages import MessageTag, ProtocolMessage, digest as message_digest, payload_digest

logger = logging.getLogger(__name__)


class BroadcastMode(str, Enum):
    IDEAL = "ideal"
    BRACHA = "bracha"


class BroadcastInstanceId(NamedTuple):
    sender: int
    tag: MessageTag

    def label(self) -> str:
        return f"{self.sender}:{self.tag.label()}"


class IdealChannel:
    """Simulator-enforced broadcast channel.

    In targeted mode (only legal when no broadcast channel can exist,
    n <= 3t) senders may address subsets and nothing is suppressed.
    """

    def __init__(self, n: int, targeted: bool = False):
        self.n = n
        self.targeted = targeted
        self.used: Dict[BroadcastInstanceId, str] = {}
        self.suppressed: List[Tuple[BroadcastInstanceId, str]] = []

    def ideal_broadcast(self, sender: int, msg: ProtocolMessage,
                        recipients: Optional[Iterable[int]] = None) -> List[int]:
        """Admit a broadcast and return the nodes that must receive it (empty when suppressed)"""
        if self.targeted and recipients is not None:
            return sorted(set(recipients))

        instance = BroadcastInstanceId(sender, msg.tag)
        d = message_digest(msg)
        if instance in self.used:
            self.suppressed.append((instance, d))
            if self.used[instance] != d:
                logger.debug(f"Suppressed equivocation on {instance.label()}")
            return []
        self.used[instance] = d
        return list(range(self.n))


# -- Bracha reliable broadcast ---------------------------------------------------

class LinkKind(str, Enum):
    SEND = "send"
    ECHO = "echo"
    READY = "ready"


class RbcPhase(str, Enum):
    IDLE = "idle"
    ECHOED = "echoed"
    READIED = "readied"
    DELIVERED = "delivered"


@dataclass(frozen=True)
class LinkMessage:
    kind: LinkKind
    instance: BroadcastInstanceId
    digest: str
    payload: Optional[bytes] = None

    def size(self) -> int:
        return 64 + len(self.digest) + (len(self.payload) if self.payload else 0)


@dataclass
class RbcInstanceState:
    phase: RbcPhase = RbcPhase.IDLE
    echo_counts: Dict[str, Set[int]] = field(default_factory=dict)
    ready_counts: Dict[str, Set[int]] = field(default_factory=dict)
    payloads: Dict[str, bytes] = field(default_factory=dict)
    echo_from: Set[int] = field(default_factory=set)
    ready_from: Set[int] = field(default_factory=set)
    echo_sent: bool = False
    ready_sent: bool = False
    delivered: Optional[str] = None


@dataclass
class RbcStep:
    outgoing: List[LinkMessage] = field(default_factory=list)
    delivery: Optional[Tuple[BroadcastInstanceId, bytes]] = None


class RbcState:
    """Bracha state for one node, covering every broadcast instance it sees.

    Thresholds: n-t matching echoes or t+1 matching readys send a ready;
    2t+1 matching readys deliver.
    """

    def __init__(self, node_id: int, n: int, t: int):
        if n < 1 or t < 0:
            raise UsageError(f"invalid RBC parameters n={n} t={t}", field="n")
        self.node_id = node_id
        self.n = n
        self.t = t
        self.instances: Dict[BroadcastInstanceId, RbcInstanceState] = {}

    @property
    def echo_threshold(self) -> int:
        return self.n - self.t

    @property
    def ready_threshold(self) -> int:
        return self.t + 1

    @property
    def deliver_threshold(self) -> int:
        return 2 * self.t + 1

    def instance(self, instance: BroadcastInstanceId) -> RbcInstanceState:
        state = self.instances.get(instance)
        if state is None:
            state = RbcInstanceState()
            self.instances[instance] = state
        return state

    def make_send(self, instance: BroadcastInstanceId, payload: bytes) -> LinkMessage:
        """The SEND a sender puts on every link to start an instance"""
        return LinkMessage(LinkKind.SEND, instance, payload_digest(payload), payload)

    def step(self, src: int, msg: LinkMessage) -> RbcStep:
        result = RbcStep()
        inst = self.instance(msg.instance)

        if msg.payload is not None:
            if payload_digest(msg.payload) != msg.digest:
                logger.debug(f"node {self.node_id}: dropped {msg.kind.value} with bad digest from {src}")
                return result
            inst.payloads.setdefault(msg.digest, msg.payload)

        if msg.kind == LinkKind.SEND:
            if src != msg.instance.sender or msg.payload is None:
                return result
            if not inst.echo_sent:
                inst.echo_sent = True
                if inst.phase == RbcPhase.IDLE:
                    inst.phase = RbcPhase.ECHOED
                result.outgoing.append(LinkMessage(LinkKind.ECHO, msg.instance, msg.digest, msg.payload))

        elif msg.kind == LinkKind.ECHO:
            if msg.payload is None or src in inst.echo_from:
                return result
            inst.echo_from.add(src)
            inst.echo_counts.setdefault(msg.digest, set()).add(src)
            if len(inst.echo_counts[msg.digest]) >= self.echo_threshold:
                self._send_ready(inst, msg.instance, msg.digest, result)

        elif msg.kind == LinkKind.READY:
            if src in inst.ready_from:
                return result
            inst.ready_from.add(src)
            inst.ready_counts.setdefault(msg.digest, set()).add(src)
            if len(inst.ready_counts[msg.digest]) >= self.ready_threshold:
                self._send_ready(inst, msg.instance, msg.digest, result)

        self._try_deliver(inst, msg.instance, result)
        return result

    def _send_ready(self, inst: RbcInstanceState, instance: BroadcastInstanceId, d: str, result: RbcStep):
        if inst.ready_sent:
            return
        inst.ready_sent = True
        if inst.phase in (RbcPhase.IDLE, RbcPhase.ECHOED):
            inst.phase = RbcPhase.READIED
        result.outgoing.append(LinkMessage(LinkKind.READY, instance, d))

    def _try_deliver(self, inst: RbcInstanceState, instance: BroadcastInstanceId, result: RbcStep):
        if inst.delivered is not None:
            return
        for d, readers in inst.ready_counts.items():
            if len(readers) >= self.deliver_threshold and d in inst.payloads:
                inst.delivered = d
                inst.phase = RbcPhase.DELIVERED
                result.delivery = (instance, inst.payloads[d])
                return


def rbc_step(state: RbcState, src: int, event: LinkMessage):
    """(state, event) -> (state, outgoing link messages, optional delivery)"""
    result = state.step(src, event)
    return state, result.outgoing, result.delivery
