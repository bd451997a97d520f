"""Typed run-time information records."""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field


class InfoError(Exception):
    pass


class MalformedRecord(InfoError):
    pass


class RecordKind(enum.IntEnum):
    COUNTER = 1
    GAUGE = 2
    HISTOGRAM = 3
    STATUS = 4
    ERROR = 5


class Severity(enum.IntEnum):
    WARN = 1
    ERROR = 2
    FATAL = 3


@dataclass(frozen=True)
class Histogram:
    edges: tuple[float, ...]
    counts: tuple[int, ...]

    def validate(self):
        if len(self.counts) != len(self.edges) - 1:
            raise MalformedRecord(
                f"histogram needs len(counts) == len(edges)-1, got "
                f"{len(self.counts)} and {len(self.edges)}")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise MalformedRecord("histogram edges must be strictly ascending")
        if any(c < 0 for c in self.counts):
            raise MalformedRecord("histogram counts must be non-negative")


def merge_histograms(a: Histogram, b: Histogram) -> Histogram:
    """Bin-wise sum; refuses mismatched binnings."""
    if a.edges != b.edges:
        raise MalformedRecord("cannot merge histograms with different edges")
    return Histogram(a.edges, tuple(x + y for x, y in zip(a.counts, b.counts)))


@dataclass(frozen=True)
class ErrorInfo:
    severity: Severity
    text: str


@dataclass
class InfoRecord:
    key: str
    kind: RecordKind
    value: object  # kind-dependent: int | float | Histogram | str | ErrorInfo
    source: str = ""
    updated_at: float = 0.0  # server-assigned
    seq: int = 0  # server-assigned, per-key monotonic

    def validate(self):
        if not self.key:
            raise MalformedRecord("empty key")
        kind, value = self.kind, self.value
        if kind is RecordKind.COUNTER:
            if not isinstance(value, int) or isinstance(value, bool):
                raise MalformedRecord("COUNTER value must be an int")
        elif kind is RecordKind.GAUGE:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise MalformedRecord("GAUGE value must be a number")
        elif kind is RecordKind.HISTOGRAM:
            if not isinstance(value, Histogram):
                raise MalformedRecord("HISTOGRAM value must be a Histogram")
            value.validate()
        elif kind is RecordKind.STATUS:
            if not isinstance(value, str):
                raise MalformedRecord("STATUS value must be a string")
        elif kind is RecordKind.ERROR:
            if not isinstance(value, ErrorInfo):
                raise MalformedRecord("ERROR value must be an ErrorInfo")
        else:
            raise MalformedRecord(f"unknown kind {kind!r}")


def float_bits(x: float) -> int:
    return struct.unpack(">Q", struct.pack(">d", float(x)))[0]


def bits_float(u: int) -> float:
    return struct.unpack(">d", struct.pack(">Q", u))[0]
