# services/messages.py
"""
Protocol message types and their canonical byte encoding.

Layout (all integers big-endian):
    kind:u8, then per kind
      InitValue  point
      Value      round:u32 point attributed_set report_set
      Report     round:u32 attributed_set
      Enough     e:u64
    point           dim:u16, dim x f64
    attributed_set  count:u16, count x (sender:u16, point)      ascending sender
    report_set      count:u16, count x (reporter:u16, attributed_set)  ascending reporter

Equal messages encode to equal bytes, so Uniqueness checks and echo
matching reduce to byte (digest) comparison.
"""
import hashlib
import math
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, Iterator, List, Mapping, NamedTuple, Optional, Union

from services.errors import DecodeError, UsageError
from services.geometry import AttributedSet, Point


class MessageKind(IntEnum):
    INIT_VALUE = 1
    VALUE = 2
    REPORT = 3
    ENOUGH = 4


class MessageTag(NamedTuple):
    round: int
    kind: MessageKind

    def label(self) -> str:
        return f"{self.kind.name.lower()}@{self.round}"


class ReportSet:
    """Reporter-keyed, immutable collection of reported AttributedSets"""

    __slots__ = ('_entries', '_hash')

    def __init__(self, entries: Optional[Mapping[int, AttributedSet]] = None):
        self._entries: Dict[int, AttributedSet] = {int(r): s for r, s in sorted((entries or {}).items())}
        self._hash = None

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[int]:
        return iter(self._entries)

    def __contains__(self, reporter: int) -> bool:
        return reporter in self._entries

    def __getitem__(self, reporter: int) -> AttributedSet:
        return self._entries[reporter]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReportSet):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._entries.items()))
        return self._hash

    def __repr__(self) -> str:
        return f"ReportSet({self._entries!r})"

    def get(self, reporter: int) -> Optional[AttributedSet]:
        return self._entries.get(reporter)

    def items(self):
        return self._entries.items()

    def with_entry(self, reporter: int, report: AttributedSet) -> 'ReportSet':
        if reporter in self._entries:
            return self
        entries = dict(self._entries)
        entries[reporter] = report
        return ReportSet(entries)

    def restricted_to(self, reporters) -> 'ReportSet':
        keep = set(reporters)
        return ReportSet({r: s for r, s in self._entries.items() if r in keep})

    def issubset(self, other: 'ReportSet') -> bool:
        for reporter, report in self._entries.items():
            if other.get(reporter) != report:
                return False
        return True

    def covered_senders(self) -> AttributedSet:
        """Union of all reported entries (first reporter wins on a clash)"""
        merged = AttributedSet()
        for report in self._entries.values():
            merged = report.union(merged)
        return merged


@dataclass(frozen=True)
class InitValue:
    v: Point

    @property
    def tag(self) -> MessageTag:
        return MessageTag(0, MessageKind.INIT_VALUE)


@dataclass(frozen=True)
class Value:
    v: Point
    rec_vals: AttributedSet
    rec_reps: ReportSet
    round: int

    @property
    def tag(self) -> MessageTag:
        return MessageTag(self.round, MessageKind.VALUE)


@dataclass(frozen=True)
class Report:
    rec_vals: AttributedSet
    round: int

    @property
    def tag(self) -> MessageTag:
        return MessageTag(self.round, MessageKind.REPORT)


@dataclass(frozen=True)
class Enough:
    e: int

    @property
    def tag(self) -> MessageTag:
        return MessageTag(0, MessageKind.ENOUGH)


ProtocolMessage = Union[InitValue, Value, Report, Enough]


# -- encoding -----------------------------------------------------------------

_U8 = struct.Struct('>B')
_U16 = struct.Struct('>H')
_U32 = struct.Struct('>I')
_U64 = struct.Struct('>Q')
_F64 = struct.Struct('>d')


def _put_point(out: List[bytes], p: Point):
    out.append(_U16.pack(len(p)))
    # -0.0 == 0.0, so both share one encoding
    out.extend(_F64.pack(c + 0.0) for c in p)


def _put_set(out: List[bytes], s: AttributedSet):
    out.append(_U16.pack(len(s)))
    for sender, point in s.items():
        out.append(_U16.pack(sender))
        _put_point(out, point)


def _put_reports(out: List[bytes], reports: ReportSet):
    out.append(_U16.pack(len(reports)))
    for reporter, report in reports.items():
        out.append(_U16.pack(reporter))
        _put_set(out, report)


def encode(msg: ProtocolMessage) -> bytes:
    out: List[bytes] = []
    try:
        if isinstance(msg, InitValue):
            out.append(_U8.pack(MessageKind.INIT_VALUE))
            _put_point(out, msg.v)
        elif isinstance(msg, Value):
            out.append(_U8.pack(MessageKind.VALUE))
            out.append(_U32.pack(msg.round))
            _put_point(out, msg.v)
            _put_set(out, msg.rec_vals)
            _put_reports(out, msg.rec_reps)
        elif isinstance(msg, Report):
            out.append(_U8.pack(MessageKind.REPORT))
            out.append(_U32.pack(msg.round))
            _put_set(out, msg.rec_vals)
        elif isinstance(msg, Enough):
            out.append(_U8.pack(MessageKind.ENOUGH))
            out.append(_U64.pack(msg.e))
        else:
            raise UsageError(f"Not a protocol message: {type(msg).__name__}", field="msg")
    except struct.error as e:
        raise UsageError(f"Message field out of range: {e}", field="msg")
    return b''.join(out)


def digest(msg: ProtocolMessage) -> str:
    return hashlib.sha256(encode(msg)).hexdigest()


def payload_digest(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


# -- decoding -----------------------------------------------------------------

class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0
        self.dim: Optional[int] = None

    def take(self, fmt: struct.Struct, what: str):
        if self.offset + fmt.size > len(self.data):
            raise DecodeError(f"truncated {what}", self.offset)
        (value,) = fmt.unpack_from(self.data, self.offset)
        self.offset += fmt.size
        return value

    def point(self) -> Point:
        start = self.offset
        dim = self.take(_U16, "point dimension")
        if dim == 0:
            raise DecodeError("zero-dimensional point", start)
        if self.dim is None:
            self.dim = dim
        elif dim != self.dim:
            raise DecodeError(f"point dimension {dim} differs from {self.dim}", start)
        coords = []
        for _ in range(dim):
            at = self.offset
            c = self.take(_F64, "coordinate")
            if not math.isfinite(c):
                raise DecodeError("non-finite coordinate", at)
            coords.append(c)
        return tuple(coords)

    def attributed_set(self) -> AttributedSet:
        count = self.take(_U16, "set size")
        entries = {}
        previous = -1
        for _ in range(count):
            at = self.offset
            sender = self.take(_U16, "sender id")
            if sender <= previous:
                raise DecodeError("sender ids not strictly ascending", at)
            previous = sender
            entries[sender] = self.point()
        return AttributedSet(entries)

    def report_set(self) -> ReportSet:
        count = self.take(_U16, "report count")
        entries = {}
        previous = -1
        for _ in range(count):
            at = self.offset
            reporter = self.take(_U16, "reporter id")
            if reporter <= previous:
                raise DecodeError("reporter ids not strictly ascending", at)
            previous = reporter
            entries[reporter] = self.attributed_set()
        return ReportSet(entries)


def decode(data: bytes) -> ProtocolMessage:
    reader = _Reader(bytes(data))
    if not reader.data:
        raise DecodeError("empty message", 0)
    raw_kind = reader.take(_U8, "message kind")
    try:
        kind = MessageKind(raw_kind)
    except ValueError:
        raise DecodeError(f"unknown message kind {raw_kind}", 0)

    if kind == MessageKind.INIT_VALUE:
        msg = InitValue(reader.point())
    elif kind == MessageKind.VALUE:
        at = reader.offset
        rnd = reader.take(_U32, "round")
        if rnd < 1:
            raise DecodeError("value round must be at least 1", at)
        v = reader.point()
        msg = Value(v, reader.attributed_set(), reader.report_set(), rnd)
    elif kind == MessageKind.REPORT:
        rnd = reader.take(_U32, "round")
        msg = Report(reader.attributed_set(), rnd)
    else:
        at = reader.offset
        e = reader.take(_U64, "enough estimate")
        if e < 1:
            raise DecodeError("enough estimate must be positive", at)
        msg = Enough(e)

    if reader.offset != len(reader.data):
        raise DecodeError("trailing bytes", reader.offset)
    return msg
