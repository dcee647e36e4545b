# services/protocol.py
"""
Per-node state machine for validated asynchronous multidimensional
approximate agreement.

Every delivery runs the matching handler and then drains the waiting
queues to a fixpoint. All readiness checks are monotone in the growing
values/reports sets, so a message that is not ready now is simply retried
on the next delivery.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Set, Tuple

from config import DEFAULT_HULL_TOL
from services.errors import UsageError
from services.geometry import AttributedSet, Point, as_point, diameter, elim, in_hull, vote_mean
from services.messages import (
    Enough, InitValue, ProtocolMessage, Report, ReportSet, Value, digest,
)
from services.validity import ValidityPredicate, safe_ex_val

logger = logging.getLogger(__name__)

Observer = Callable[..., None]


class Phase(str, Enum):
    INIT = "init"
    RUNNING = "running"
    TERMINATED = "terminated"


def compute_enough(init_diameter: float, epsilon: float) -> int:
    """Round estimate ceil(log2(3D/eps)) + 1, clamped to at least one round"""
    if epsilon <= 0:
        raise UsageError(f"epsilon must be positive, got {epsilon}", field="epsilon")
    if init_diameter <= 0.0:
        return 1
    return max(1, math.ceil(math.log2(3.0 * init_diameter / epsilon)) + 1)


def hull_tolerance(rec_vals: AttributedSet) -> float:
    return DEFAULT_HULL_TOL * max(1.0, diameter(rec_vals))


@dataclass
class NodeState:
    id: int
    n: int
    t: int
    m: int
    epsilon: float
    r: int = 0
    values: Dict[int, AttributedSet] = field(default_factory=dict)
    reports: Dict[int, ReportSet] = field(default_factory=dict)
    waiting_values: List[Tuple[int, Value]] = field(default_factory=list)
    waiting_reports: List[Tuple[int, Report]] = field(default_factory=list)
    termination_times: List[int] = field(default_factory=list)
    enough_senders: Set[int] = field(default_factory=set)
    halt: Optional[int] = None
    current_vote: Optional[Point] = None
    phase: Phase = Phase.INIT
    report_sent: Set[int] = field(default_factory=set)
    output: Optional[Point] = None
    # bookkeeping used by monitors and the trace
    input: Optional[Point] = None
    started: bool = False
    enough: Optional[int] = None
    init_diameter: Optional[float] = None
    init_vals: Optional[AttributedSet] = None
    init_reps: Optional[ReportSet] = None
    accepted_values: Dict[int, Dict[int, Value]] = field(default_factory=dict)
    halt_history: List[int] = field(default_factory=list)
    # lower-bound demonstrations run the protocol with n <= 3t
    allow_small_n: bool = False

    def __post_init__(self):
        if self.t < 0 or (self.n < 3 * self.t + 1 and not self.allow_small_n):
            raise UsageError(f"need n >= 3t + 1, got n={self.n} t={self.t}", field="n")
        if self.m < 1:
            raise UsageError(f"dimension must be positive, got {self.m}", field="m")
        if not self.epsilon > 0:
            raise UsageError(f"epsilon must be positive, got {self.epsilon}", field="epsilon")

    @property
    def quorum(self) -> int:
        return self.n - self.t

    def values_at(self, rnd: int) -> AttributedSet:
        return self.values.get(rnd, _EMPTY_SET)

    def reports_at(self, rnd: int) -> ReportSet:
        return self.reports.get(rnd, _EMPTY_REPORTS)


_EMPTY_SET = AttributedSet()
_EMPTY_REPORTS = ReportSet()


@dataclass
class StepOutput:
    outgoing: List[ProtocolMessage] = field(default_factory=list)
    delivered_output: Optional[Point] = None
    state_changed: bool = False

    def broadcast(self, msg: ProtocolMessage):
        self.outgoing.append(msg)
        self.state_changed = True


class VaadNode:
    """One correct node. Subclasses may override the selection hooks
    (`_select_report`, `_select_witnesses`, `_round_one_vote`) to model
    protocol-legal Byzantine choices."""

    def __init__(self, node_id: int, n: int, t: int, m: int, epsilon: float,
                 predicate: ValidityPredicate, observer: Optional[Observer] = None,
                 allow_small_n: bool = False):
        self.state = NodeState(node_id, n, t, m, epsilon, allow_small_n=allow_small_n)
        self.predicate = predicate
        self.observer = observer

    # -- helpers ---------------------------------------------------------------

    def _note(self, event: str, **fields):
        if self.observer is not None:
            self.observer(self.state.id, event, **fields)

    def _send(self, out: StepOutput, msg: ProtocolMessage):
        out.broadcast(msg)
        self._note("send", round=msg.tag.round, digest=digest(msg), kind=msg.tag.kind.name.lower())

    @property
    def terminated(self) -> bool:
        return self.state.phase == Phase.TERMINATED

    # -- entry points ----------------------------------------------------------

    def start(self, input_point) -> StepOutput:
        s = self.state
        if s.started or s.phase != Phase.INIT:
            raise UsageError(f"node {s.id} already started", field="phase")
        v = as_point(input_point, s.m)
        s.started = True
        s.input = v
        out = StepOutput()
        self._send(out, InitValue(v))
        return out

    def deliver(self, sender: int, msg: ProtocolMessage) -> StepOutput:
        """Dispatch one delivered broadcast"""
        if self.terminated:
            return StepOutput()
        if isinstance(msg, InitValue):
            return self.on_init_value(sender, msg.v)
        if isinstance(msg, Enough):
            return self.on_enough(sender, msg.e)
        if isinstance(msg, Value):
            return self.on_value(sender, msg)
        if isinstance(msg, Report):
            return self.on_report(sender, msg)
        logger.warning(f"node {self.state.id}: ignoring unknown message {type(msg).__name__} from {sender}")
        return StepOutput()

    def on_init_value(self, sender: int, v: Point, ex_val: Optional[ValidityPredicate] = None) -> StepOutput:
        s = self.state
        predicate = ex_val or self.predicate
        out = StepOutput()
        if len(v) != s.m or not safe_ex_val(predicate, v):
            self._note("reject_init_value", round=0, sender=sender)
            return out
        values0 = s.values_at(0)
        if sender in values0:
            return out
        s.values[0] = values0.with_entry(sender, tuple(v))
        out.state_changed = True
        self._note("accept_value", round=0, sender=sender, diameter=diameter(s.values[0]))
        if len(s.values[0]) >= s.quorum and 0 not in s.report_sent:
            s.report_sent.add(0)
            self._send(out, Report(self._select_report(0), 0))
        return self._merge(out, self.drain_waiting())

    def on_enough(self, sender: int, e: int) -> StepOutput:
        s = self.state
        out = StepOutput()
        if sender in s.enough_senders or not isinstance(e, int) or e < 1:
            return out
        s.enough_senders.add(sender)
        s.termination_times.append(e)
        out.state_changed = True
        if len(s.termination_times) >= s.quorum:
            new_halt = sorted(s.termination_times)[s.t]
            if new_halt != s.halt:
                s.halt = new_halt
                s.halt_history.append(new_halt)
                self._note("halt_update", round=s.r, halt=new_halt)
        return self._merge(out, self.drain_waiting())

    def on_value(self, sender: int, msg: Value) -> StepOutput:
        self.state.waiting_values.append((sender, msg))
        return self.drain_waiting()

    def on_report(self, sender: int, msg: Report) -> StepOutput:
        self.state.waiting_reports.append((sender, msg))
        return self.drain_waiting()

    # -- readiness checks ------------------------------------------------------

    def value_message_ready(self, msg: Value, sender: int) -> bool:
        s = self.state
        n_t = s.quorum
        rnd = msg.round
        if rnd < 1 or s.r < rnd:
            return False
        if len(msg.rec_vals) < n_t or len(msg.rec_reps) < n_t:
            return False
        for _, report in msg.rec_reps.items():
            if not report.issubset(msg.rec_vals):
                return False
        if not msg.rec_vals.issubset(s.values_at(rnd - 1)):
            return False
        if not msg.rec_reps.issubset(s.reports_at(rnd - 1)):
            return False
        if len(msg.v) != s.m:
            return False
        try:
            if rnd == 1:
                trimmed = self._trim(msg.rec_vals)
                return in_hull(msg.v, trimmed, hull_tolerance(msg.rec_vals))
            return msg.v == vote_mean(msg.rec_vals)
        except UsageError:
            return False

    def report_message_ready(self, msg: Report, sender: int) -> bool:
        s = self.state
        return (s.r >= msg.round
                and len(msg.rec_vals) >= s.quorum
                and msg.rec_vals.issubset(s.values_at(msg.round)))

    # -- main transition -------------------------------------------------------

    def drain_waiting(self) -> StepOutput:
        s = self.state
        out = StepOutput()
        progress = True
        while progress and s.phase != Phase.TERMINATED:
            progress = False

            pending = []
            for sender, msg in s.waiting_values:
                if s.phase == Phase.TERMINATED:
                    pending.append((sender, msg))
                elif self.value_message_ready(msg, sender):
                    self._accept_value(sender, msg, out)
                    progress = True
                elif sender in s.values_at(msg.round):
                    # sender already has a value for that round
                    continue
                else:
                    pending.append((sender, msg))
            s.waiting_values = pending

            pending = []
            for sender, msg in s.waiting_reports:
                if s.phase == Phase.TERMINATED:
                    pending.append((sender, msg))
                elif self.report_message_ready(msg, sender):
                    self._accept_report(sender, msg, out)
                    progress = True
                elif sender in s.reports_at(msg.round):
                    continue
                else:
                    pending.append((sender, msg))
            s.waiting_reports = pending

            if self._try_finish_init(out):
                progress = True
            self._check_termination(out)
        return out

    def _accept_value(self, sender: int, msg: Value, out: StepOutput):
        s = self.state
        rnd = msg.round
        current = s.values_at(rnd)
        if sender in current:
            return
        s.values[rnd] = current.with_entry(sender, msg.v)
        s.accepted_values.setdefault(rnd, {})[sender] = msg
        out.state_changed = True
        self._note("accept_value", round=rnd, sender=sender, digest=digest(msg),
                   diameter=diameter(s.values[rnd]))
        if rnd == s.r and rnd >= 1 and len(s.values[rnd]) >= s.quorum and rnd not in s.report_sent:
            s.report_sent.add(rnd)
            self._send(out, Report(self._select_report(rnd), rnd))

    def _accept_report(self, sender: int, msg: Report, out: StepOutput):
        s = self.state
        rnd = msg.round
        current = s.reports_at(rnd)
        if sender in current:
            return
        s.reports[rnd] = current.with_entry(sender, msg.rec_vals)
        out.state_changed = True
        self._note("accept_report", round=rnd, sender=sender, digest=digest(msg))

        if s.phase == Phase.INIT and rnd == 0 and s.enough is None and len(s.reports[0]) >= s.quorum:
            self._complete_witness_round_zero(out)
        elif s.phase == Phase.RUNNING and rnd == s.r and len(s.reports[rnd]) >= s.quorum:
            self._advance_round(out)

    def _complete_witness_round_zero(self, out: StepOutput):
        s = self.state
        rec_vals, rec_reps = self._select_witnesses(0)
        s.init_vals = rec_vals
        s.init_reps = rec_reps
        s.current_vote = self._round_one_vote(rec_vals)
        s.init_diameter = diameter(rec_vals)
        s.enough = compute_enough(s.init_diameter, s.epsilon)
        self._send(out, Enough(s.enough))

    def _try_finish_init(self, out: StepOutput) -> bool:
        s = self.state
        if s.phase != Phase.INIT or s.enough is None or len(s.termination_times) < s.quorum:
            return False
        s.phase = Phase.RUNNING
        s.r = 1
        self._note("round_advance", round=1)
        self._send(out, Value(s.current_vote, s.init_vals, s.init_reps, 1))
        return True

    def _advance_round(self, out: StepOutput):
        s = self.state
        finished = s.r
        rec_vals, rec_reps = self._select_witnesses(finished)
        s.r = finished + 1
        s.current_vote = vote_mean(rec_vals)
        self._note("round_advance", round=s.r)
        self._send(out, Value(s.current_vote, rec_vals, rec_reps, s.r))

    def _check_termination(self, out: StepOutput):
        s = self.state
        if s.phase != Phase.RUNNING or s.halt is None or s.r < s.halt:
            return
        s.output = s.current_vote
        s.phase = Phase.TERMINATED
        out.delivered_output = s.output
        out.state_changed = True
        self._note("terminate", round=s.r)

    def _trim(self, rec_vals: AttributedSet) -> AttributedSet:
        t = self.state.t
        if self.state.allow_small_n:
            # with n <= 3t a quorum can hold fewer than 2t+1 points
            t = min(t, (len(rec_vals) - 1) // 2)
        return elim(t, rec_vals)

    # -- selection hooks -------------------------------------------------------

    def _select_report(self, rnd: int) -> AttributedSet:
        return self.state.values_at(rnd)

    def _select_witnesses(self, rnd: int) -> Tuple[AttributedSet, ReportSet]:
        return self.state.values_at(rnd), self.state.reports_at(rnd)

    def _round_one_vote(self, rec_vals: AttributedSet) -> Point:
        return vote_mean(self._trim(rec_vals))

    @staticmethod
    def _merge(first: StepOutput, second: StepOutput) -> StepOutput:
        first.outgoing.extend(second.outgoing)
        if second.delivered_output is not None:
            first.delivered_output = second.delivered_output
        first.state_changed = first.state_changed or second.state_changed
        return first
