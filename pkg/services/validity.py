# services/validity.py
"""
External validity predicates (the ex_val black box).

Predicates are immutable and side-effect free; `from_spec` / `to_spec`
translate the predicate block of a scenario file.
"""
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

from config import SIMPLEX_SUM_TOL
from services.errors import UsageError
from services.geometry import Point, as_point, distance


class ValidityPredicate:
    """Base predicate; dim is None when any dimension is accepted"""
    kind = "base"
    dim: Optional[int] = None

    def check(self, v: Point) -> bool:
        raise NotImplementedError

    def to_spec(self) -> Dict[str, Any]:
        raise NotImplementedError

    def __call__(self, v: Point) -> bool:
        return ex_val(self, v)


@dataclass(frozen=True)
class AlwaysTrue(ValidityPredicate):
    kind = "always_true"

    def check(self, v: Point) -> bool:
        return True

    def to_spec(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class BoxPredicate(ValidityPredicate):
    lo: Point
    hi: Point
    kind = "box"

    def __post_init__(self):
        lo = as_point(self.lo)
        hi = as_point(self.hi, len(lo))
        if any(a > b for a, b in zip(lo, hi)):
            raise UsageError(f"Box lower corner {lo} exceeds upper corner {hi}", field="lo")
        object.__setattr__(self, 'lo', lo)
        object.__setattr__(self, 'hi', hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def check(self, v: Point) -> bool:
        return all(a <= x <= b for a, x, b in zip(self.lo, v, self.hi))

    def to_spec(self):
        return {"kind": self.kind, "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class SimplexPredicate(ValidityPredicate):
    """Points with nonnegative coordinates summing to one (resource allocation)"""
    m: int
    kind = "simplex"

    def __post_init__(self):
        if self.m < 1:
            raise UsageError(f"Simplex dimension must be positive, got {self.m}", field="dim")

    @property
    def dim(self) -> int:
        return self.m

    def check(self, v: Point) -> bool:
        if any(x < 0.0 for x in v):
            return False
        return abs(math.fsum(v) - 1.0) <= SIMPLEX_SUM_TOL

    def to_spec(self):
        return {"kind": self.kind, "dim": self.m}


@dataclass(frozen=True)
class FiniteSetPredicate(ValidityPredicate):
    """Stand-in for signature-based validity: a point is valid when close to an allowed point"""
    allowed: Tuple[Point, ...]
    tol: float = 0.0
    kind = "finite_set"

    def __post_init__(self):
        if not self.allowed:
            raise UsageError("FiniteSet needs at least one allowed point", field="allowed")
        first = as_point(self.allowed[0])
        allowed = tuple(as_point(p, len(first)) for p in self.allowed)
        if self.tol < 0:
            raise UsageError(f"tol must be nonnegative, got {self.tol}", field="tol")
        object.__setattr__(self, 'allowed', allowed)

    @property
    def dim(self) -> int:
        return len(self.allowed[0])

    def check(self, v: Point) -> bool:
        return min(distance(v, a) for a in self.allowed) <= self.tol

    def to_spec(self):
        return {"kind": self.kind, "allowed": [list(p) for p in self.allowed], "tol": self.tol}


def ex_val(p: ValidityPredicate, v: Point) -> bool:
    if p.dim is not None and len(v) != p.dim:
        raise UsageError(f"Predicate expects dimension {p.dim}, got {len(v)}", field="dimension")
    return p.check(v)


def safe_ex_val(p: ValidityPredicate, v: Point) -> bool:
    """ex_val for untrusted input: malformed points are simply invalid"""
    try:
        return ex_val(p, as_point(v))
    except UsageError:
        return False


def from_spec(spec: Dict[str, Any]) -> ValidityPredicate:
    kind = spec.get("kind")
    if kind == "always_true":
        return AlwaysTrue()
    if kind == "box":
        return BoxPredicate(tuple(spec["lo"]), tuple(spec["hi"]))
    if kind == "simplex":
        return SimplexPredicate(int(spec["dim"]))
    if kind == "finite_set":
        return FiniteSetPredicate(tuple(tuple(p) for p in spec["allowed"]), float(spec.get("tol", 0.0)))
    raise UsageError(f"Unknown predicate kind: {kind!r}", field="kind")
