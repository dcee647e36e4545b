# services/geometry.py
"""
Computational-geometry kernel: distance, diameter, furthest pair,
iterated elimination, centroid vote and convex-hull membership.

All functions are pure. Points are tuples of floats so they compare
lexicographically and hash; AttributedSet keys them by sender id.
"""
import logging
import math
from itertools import combinations
from typing import Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog, nnls

from config import DEFAULT_HULL_TOL
from services.errors import UsageError

logger = logging.getLogger(__name__)

Point = Tuple[float, ...]


def as_point(coords: Iterable[float], dim: Optional[int] = None) -> Point:
    """Validate and normalize coordinates into a Point"""
    try:
        point = tuple(float(c) for c in coords)
    except (TypeError, ValueError) as e:
        raise UsageError(f"Point coordinates must be real numbers: {e}", field="coords")
    if not point:
        raise UsageError("Point must have at least one coordinate", field="coords")
    if dim is not None and len(point) != dim:
        raise UsageError(f"Point has dimension {len(point)}, expected {dim}", field="coords")
    if not all(math.isfinite(c) for c in point):
        raise UsageError(f"Point has non-finite coordinate: {point}", field="coords")
    return point


class AttributedSet:
    """Sender-keyed, immutable collection of points (at most one point per sender)"""

    __slots__ = ('_entries', '_hash')

    def __init__(self, entries: Optional[Mapping[int, Point]] = None):
        ordered = sorted((entries or {}).items())
        self._entries: Dict[int, Point] = {int(s): tuple(p) for s, p in ordered}
        self._hash = None

    @classmethod
    def from_points(cls, points: Iterable[Iterable[float]]) -> 'AttributedSet':
        """Attribute points to senders 0..k-1 in the given order"""
        return cls({i: as_point(p) for i, p in enumerate(points)})

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[int]:
        return iter(self._entries)

    def __contains__(self, sender: int) -> bool:
        return sender in self._entries

    def __getitem__(self, sender: int) -> Point:
        return self._entries[sender]

    def __eq__(self, other) -> bool:
        if not isinstance(other, AttributedSet):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._entries.items()))
        return self._hash

    def __repr__(self) -> str:
        inner = ', '.join(f"s{s}:{p}" for s, p in self._entries.items())
        return f"AttributedSet({{{inner}}})"

    def get(self, sender: int) -> Optional[Point]:
        return self._entries.get(sender)

    def items(self):
        return self._entries.items()

    def senders(self) -> List[int]:
        return list(self._entries)

    def points(self) -> List[Point]:
        return list(self._entries.values())

    def dimension(self) -> Optional[int]:
        for p in self._entries.values():
            return len(p)
        return None

    def with_entry(self, sender: int, point: Point) -> 'AttributedSet':
        """Return a copy with sender -> point added; an existing sender is kept as is"""
        if sender in self._entries:
            return self
        entries = dict(self._entries)
        entries[sender] = tuple(point)
        return AttributedSet(entries)

    def without(self, senders: Iterable[int]) -> 'AttributedSet':
        drop = set(senders)
        return AttributedSet({s: p for s, p in self._entries.items() if s not in drop})

    def restricted_to(self, senders: Iterable[int]) -> 'AttributedSet':
        keep = set(senders)
        return AttributedSet({s: p for s, p in self._entries.items() if s in keep})

    def issubset(self, other: 'AttributedSet') -> bool:
        """Sender-keyed containment with bit-equal points"""
        if len(self) > len(other):
            return False
        for sender, point in self._entries.items():
            if other.get(sender) != point:
                return False
        return True

    def intersection(self, other: 'AttributedSet') -> 'AttributedSet':
        """Entries present in both sets under the same sender with the same point"""
        return AttributedSet({s: p for s, p in self._entries.items() if other.get(s) == p})

    def union(self, other: 'AttributedSet') -> 'AttributedSet':
        """Union; on a sender clash the entry from self wins"""
        entries = dict(other._entries)
        entries.update(self._entries)
        return AttributedSet(entries)

    def to_array(self) -> np.ndarray:
        """Points as a (k, m) array in ascending sender order"""
        if not self._entries:
            return np.zeros((0, 0))
        return np.array(list(self._entries.values()), dtype=float)


class PointPair(NamedTuple):
    first: Point
    second: Point


def _check_same_dim(a: Sequence[float], b: Sequence[float]):
    if len(a) != len(b):
        raise UsageError(f"Dimension mismatch: {len(a)} vs {len(b)}", field="dimension")


def distance(a: Point, b: Point) -> float:
    """Euclidean distance"""
    _check_same_dim(a, b)
    return float(np.linalg.norm(np.subtract(a, b, dtype=float)))


def points_diameter(points: Sequence[Point]) -> float:
    """Diameter of a plain point list (no sender attribution); 0 for fewer than two points"""
    if len(points) < 2:
        return 0.0
    arr = np.asarray(points, dtype=float)
    diffs = arr[:, None, :] - arr[None, :, :]
    return float(np.sqrt((diffs ** 2).sum(axis=-1)).max())


def diameter(A: AttributedSet) -> float:
    if len(A) == 0:
        raise UsageError("diameter of an empty set", field="A")
    return points_diameter(A.points())


def _canonical(p: Point, q: Point) -> PointPair:
    return PointPair(p, q) if p <= q else PointPair(q, p)


def _furthest_senders(A: AttributedSet) -> Tuple[PointPair, Tuple[int, int]]:
    """Maximal-distance pair plus the sender ids holding it.

    Ties on distance go to the lexicographically smallest canonical pair,
    then to the smallest sender ids.
    """
    best_key = None
    best = None
    for (s1, p1), (s2, p2) in combinations(A.items(), 2):
        pair = _canonical(p1, p2)
        key = (-distance(p1, p2), pair, (s1, s2))
        if best_key is None or key < best_key:
            best_key = key
            best = (pair, (s1, s2))
    return best


def furthest(A: AttributedSet) -> PointPair:
    if len(A) < 2:
        raise UsageError("furthest needs at least two points", field="A")
    pair, _ = _furthest_senders(A)
    return pair


def elim(t: int, A: AttributedSet) -> AttributedSet:
    """Remove the furthest pair t times"""
    if t < 0:
        raise UsageError(f"t must be nonnegative, got {t}", field="t")
    if len(A) < 2 * t + 1:
        raise UsageError(f"elim({t}) needs at least {2 * t + 1} points, got {len(A)}", field="A")
    current = A
    for _ in range(t):
        _, senders = _furthest_senders(current)
        current = current.without(senders)
    return current


def vote_mean(A: AttributedSet) -> Point:
    """Coordinate-wise mean, summed in ascending sender order"""
    if len(A) == 0:
        raise UsageError("vote over an empty set", field="A")
    total = np.zeros(A.dimension(), dtype=float)
    for sender in A:
        total = total + np.asarray(A[sender], dtype=float)
    mean = total / float(len(A))
    return tuple(float(x) for x in mean)


def _residual(alpha: np.ndarray, pts: np.ndarray, target: np.ndarray) -> np.ndarray:
    alpha = np.clip(alpha, 0.0, None)
    total = float(alpha.sum())
    if total <= 0.0:
        return np.full(target.shape, np.inf)
    return (alpha / total) @ pts - target


def _min_max_residual(system: np.ndarray) -> Optional[np.ndarray]:
    """Convex weights minimizing the largest coordinate residual, via HiGHS.

    `system` is the (m, k) matrix of centered, scaled points; the target is
    the origin. Variables are the k weights plus the bound s.
    """
    m, k = system.shape
    ones = np.ones((m, 1))
    a_ub = np.vstack([np.hstack([system, -ones]), np.hstack([-system, -ones])])
    a_eq = np.hstack([np.ones((1, k)), np.zeros((1, 1))])
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    res = linprog(cost, A_ub=a_ub, b_ub=np.zeros(2 * m), A_eq=a_eq, b_eq=np.ones(1),
                  bounds=[(0.0, None)] * (k + 1), method="highs")
    if res.status != 0:
        logger.warning(f"hull feasibility solve failed for {k} points in dimension {m}: {res.message}")
        return None
    return res.x[:k]


def in_hull(v: Point, A: AttributedSet, tol: float = DEFAULT_HULL_TOL) -> bool:
    """Whether v lies within tol of conv(A).

    Non-negative least squares over the convex weights (sum-to-one row
    appended) is tried first and accepted when the normalized weights
    reproduce v to within 2*tol. nnls can stop at a non-optimal vertex,
    so a failed certificate falls back to a linear program minimizing the
    largest coordinate residual, accepted when that residual is at most
    tol. A True answer is always backed by an explicit convex combination.
    """
    if tol < 0:
        raise UsageError(f"tol must be nonnegative, got {tol}", field="tol")
    if len(A) == 0:
        raise UsageError("hull of an empty set", field="A")
    _check_same_dim(v, A.points()[0])

    pts = A.to_array()
    target = np.asarray(v, dtype=float)

    # outside the bounding box by more than tol in some coordinate
    if np.any(target < pts.min(axis=0) - tol) or np.any(target > pts.max(axis=0) + tol):
        return False

    centered = pts - target
    scale = float(np.abs(centered).max())
    if scale == 0.0:
        return True
    rounding = 64.0 * np.finfo(float).eps * max(scale, float(np.abs(target).max()))

    k = pts.shape[0]
    system = (centered / scale).T
    rhs = np.zeros(system.shape[0] + 1)
    rhs[-1] = 1.0
    try:
        weights, _ = nnls(np.vstack([system, np.ones((1, k))]), rhs)
        if float(np.linalg.norm(_residual(weights, pts, target))) <= 2.0 * tol + rounding:
            return True
    except RuntimeError as e:
        logger.debug(f"nnls did not converge for {k} points in dimension {pts.shape[1]}: {e}")

    alpha = _min_max_residual(system)
    if alpha is None:
        return False
    return bool(float(np.abs(_residual(alpha, pts, target)).max()) <= tol + rounding)
