# services/monitors.py
"""
Invariant monitors evaluated on every simulation run.

Broadcast uniqueness and viewpoint intersection are checked online as
messages flow; the remaining monitors run once the correct nodes have
terminated, over the union sets V_r of their accepted values.
"""
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

from config import MONITOR_SLACK, VALIDITY_HULL_TOL
from services.geometry import AttributedSet, Point, distance, in_hull, points_diameter
from services.messages import Value
from services.protocol import NodeState, compute_enough
from services.validity import AlwaysTrue, ValidityPredicate

logger = logging.getLogger(__name__)

BROADCAST_UNIQUENESS = "broadcast_uniqueness"
VIEWPOINT_INTERSECTION = "viewpoint_intersection"
HALT_MONOTONICITY = "halt_monotonicity"
SHRINKING_DIAMETER = "shrinking_diameter"
INITIAL_DIAMETER = "initial_diameter"
VALIDITY = "validity"
CORRECTNESS = "correctness"
ROUND_BOUND = "round_bound"
LIVENESS = "liveness"
DELTA_VALIDITY = "delta_validity"

MONITOR_NAMES = (
    BROADCAST_UNIQUENESS, VIEWPOINT_INTERSECTION, HALT_MONOTONICITY, SHRINKING_DIAMETER,
    INITIAL_DIAMETER, VALIDITY, CORRECTNESS, ROUND_BOUND, LIVENESS, DELTA_VALIDITY,
)


class MonitorResult(NamedTuple):
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class MonitorSettings:
    enforce: bool = True
    disabled: FrozenSet[str] = frozenset()

    def enabled(self, name: str) -> bool:
        return name not in self.disabled


def _ok(name: str) -> MonitorResult:
    return MonitorResult(name, True)


class OnlineMonitors:
    """Per-message checks fed by the simulator while the run progresses"""

    def __init__(self, n: int, t: int, correct: Iterable[int]):
        self.n = n
        self.t = t
        self.correct = set(correct)
        self.delivered: Dict[Tuple[int, str], str] = {}
        self.per_node: Dict[int, Dict[str, str]] = {}
        self.witness_sets: Dict[int, List[Tuple[int, AttributedSet]]] = {}
        self.violations: Dict[str, str] = {}

    def _fail(self, name: str, detail: str):
        if name not in self.violations:
            logger.info(f"monitor {name} tripped: {detail}")
            self.violations[name] = detail

    def on_delivery(self, dst: int, sender: int, instance: str, d: str):
        """A broadcast instance delivered to a correct node"""
        if dst not in self.correct:
            return
        seen = self.per_node.setdefault(dst, {})
        previous = seen.get(instance)
        if previous is not None and previous != d:
            self._fail(BROADCAST_UNIQUENESS, f"node {dst} delivered two payloads for {instance}")
        seen.setdefault(instance, d)

        key = (sender, instance)
        first = self.delivered.setdefault(key, d)
        if first != d:
            self._fail(BROADCAST_UNIQUENESS, f"correct nodes delivered different payloads for {instance}")

    def on_value_sent(self, node: int, msg: Value):
        """A correct node completed a round; its witness set is compared with earlier ones"""
        if node not in self.correct:
            return
        previous = self.witness_sets.setdefault(msg.round, [])
        for other, rec_vals in previous:
            shared = len(msg.rec_vals.intersection(rec_vals))
            if shared < self.n - self.t:
                self._fail(VIEWPOINT_INTERSECTION,
                           f"round {msg.round}: nodes {other} and {node} share {shared} < {self.n - self.t} values")
        previous.append((node, msg.rec_vals))

    def results(self) -> List[MonitorResult]:
        return [
            MonitorResult(name, name not in self.violations, self.violations.get(name, ""))
            for name in (BROADCAST_UNIQUENESS, VIEWPOINT_INTERSECTION)
        ]


# -- union views ------------------------------------------------------------------

def union_points(states: Sequence[NodeState], rnd: int) -> List[Point]:
    """V_r as a plain point list: distinct (sender, point) entries over all correct nodes"""
    entries: Set[Tuple[int, Point]] = set()
    for s in states:
        entries.update(s.values_at(rnd).items())
    return [p for _, p in sorted(entries)]


def round_diameters(states: Sequence[NodeState]) -> Dict[int, float]:
    rounds = sorted({r for s in states for r, vals in s.values.items() if len(vals)})
    return {r: points_diameter(union_points(states, r)) for r in rounds}


# -- completion monitors ----------------------------------------------------------

def check_halt_monotonicity(states: Sequence[NodeState]) -> MonitorResult:
    for s in states:
        history = s.halt_history
        for a, b in zip(history, history[1:]):
            if b > a:
                return MonitorResult(HALT_MONOTONICITY, False, f"node {s.id}: halt grew from {a} to {b}")
    return _ok(HALT_MONOTONICITY)


def check_shrinking_diameter(diameters: Dict[int, float]) -> MonitorResult:
    for r, d in sorted(diameters.items()):
        if r < 1 or (r + 1) not in diameters:
            continue
        nxt = diameters[r + 1]
        if nxt > 0.5 * d + MONITOR_SLACK:
            return MonitorResult(SHRINKING_DIAMETER, False,
                                 f"round {r + 1} diameter {nxt!r} exceeds half of round {r} diameter {d!r}")
    return _ok(SHRINKING_DIAMETER)


def check_initial_diameter(states: Sequence[NodeState], diameters: Dict[int, float]) -> MonitorResult:
    known = [s.init_diameter for s in states if s.init_diameter is not None]
    if not known or 1 not in diameters:
        return _ok(INITIAL_DIAMETER)
    bound = 3.0 * min(known)
    if diameters[1] > bound + MONITOR_SLACK:
        return MonitorResult(INITIAL_DIAMETER, False,
                             f"round 1 diameter {diameters[1]!r} exceeds three times {min(known)!r}")
    return _ok(INITIAL_DIAMETER)


def check_validity(states: Sequence[NodeState]) -> MonitorResult:
    points = union_points(states, 0)
    if not points:
        return _ok(VALIDITY)
    hull = AttributedSet.from_points(points)
    for s in states:
        for rnd in sorted(s.values):
            if rnd < 1:
                continue
            for sender, v in s.values[rnd].items():
                if not in_hull(v, hull, VALIDITY_HULL_TOL):
                    return MonitorResult(VALIDITY, False,
                                         f"node {s.id} accepted round {rnd} value {v} from {sender} outside the valid hull")
        if s.output is not None and not in_hull(s.output, hull, VALIDITY_HULL_TOL):
            return MonitorResult(VALIDITY, False, f"node {s.id} output {s.output} outside the valid hull")
    return _ok(VALIDITY)


def max_pairwise(points: Sequence[Point]) -> float:
    return points_diameter(list(points))


def check_correctness(outputs: Dict[int, Point], epsilon: float) -> MonitorResult:
    ids = sorted(outputs)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            d = distance(outputs[a], outputs[b])
            if d > epsilon:
                return MonitorResult(CORRECTNESS, False, f"outputs of {a} and {b} are {d!r} apart (> {epsilon})")
    return _ok(CORRECTNESS)


def round_bound(states: Sequence[NodeState], epsilon: float) -> int:
    points = union_points(states, 0)
    return max(1, compute_enough(points_diameter(points), epsilon))


def check_round_bound(states: Sequence[NodeState], epsilon: float) -> MonitorResult:
    bound = round_bound(states, epsilon)
    for s in states:
        if s.r > bound:
            return MonitorResult(ROUND_BOUND, False, f"node {s.id} finished at round {s.r} > {bound}")
    return _ok(ROUND_BOUND)


def check_liveness(states: Sequence[NodeState]) -> MonitorResult:
    pending = [s.id for s in states if s.output is None]
    if pending:
        return MonitorResult(LIVENESS, False, f"nodes {pending} did not terminate")
    return _ok(LIVENESS)


def check_delta_validity(states: Sequence[NodeState]) -> MonitorResult:
    inputs = [s.input for s in states if s.input is not None]
    if not inputs:
        return _ok(DELTA_VALIDITY)
    radius = points_diameter(inputs) + MONITOR_SLACK
    for s in states:
        for sender, v in s.values_at(1).items():
            if min(distance(v, x) for x in inputs) > radius:
                return MonitorResult(DELTA_VALIDITY, False,
                                     f"node {s.id} accepted round 1 value {v} from {sender} too far from every correct input")
    return _ok(DELTA_VALIDITY)


def evaluate(states: Sequence[NodeState], epsilon: float, predicate: ValidityPredicate,
             online: Optional[OnlineMonitors] = None,
             settings: MonitorSettings = MonitorSettings()) -> List[MonitorResult]:
    """Run every enabled monitor; results come back in a fixed order"""
    states = sorted(states, key=lambda s: s.id)
    diameters = round_diameters(states)
    outputs = {s.id: s.output for s in states if s.output is not None}

    results = list(online.results()) if online is not None else []
    results.extend([
        check_halt_monotonicity(states),
        check_shrinking_diameter(diameters),
        check_initial_diameter(states, diameters),
        check_validity(states),
        check_correctness(outputs, epsilon),
        check_round_bound(states, epsilon),
        check_liveness(states),
    ])
    if isinstance(predicate, AlwaysTrue):
        results.append(check_delta_validity(states))
    return [r for r in results if settings.enabled(r.name)]


def violations(results: Iterable[MonitorResult]) -> List[MonitorResult]:
    return [r for r in results if not r.passed]
