"""Information-service wire schemas (msg_type range 0x0300-0x03FF).

Floats travel as IEEE-754 bit patterns in UINT fields. The set request
carries the record fields inline (not nested) to keep the hottest path a
single decode pass; `pad` bulks requests up to a target size for load
tests and is never stored.
"""
from __future__ import annotations

import enum

from ..messaging.core import register
from ..messaging.frame import FieldSpec, Kind, MessageSchema
from .records import (
    ErrorInfo,
    Histogram,
    InfoRecord,
    MalformedRecord,
    RecordKind,
    Severity,
    bits_float,
    float_bits,
)

_RECORD_FIELDS = (
    FieldSpec(1, "key", Kind.STRING, required=True),
    FieldSpec(2, "kind", Kind.UINT, required=True),
    FieldSpec(3, "ivalue", Kind.SINT),
    FieldSpec(4, "fvalue", Kind.UINT),  # double bits
    FieldSpec(5, "edges", Kind.UINT, repeated=True),  # double bits each
    FieldSpec(6, "counts", Kind.UINT, repeated=True),
    FieldSpec(7, "status", Kind.STRING),
    FieldSpec(8, "severity", Kind.UINT),
    FieldSpec(9, "text", Kind.STRING),
    FieldSpec(10, "source", Kind.STRING),
    FieldSpec(12, "updated_at_us", Kind.UINT),
    FieldSpec(13, "seq", Kind.UINT),
)

RECORD = MessageSchema(0x0310, "is_record", _RECORD_FIELDS)
register(RECORD)

SET_REQ = register(MessageSchema(0x0301, "is_set_req",
                                 _RECORD_FIELDS + (FieldSpec(11, "pad", Kind.BYTES),)))
SET_REP = register(MessageSchema(0x0302, "is_set_rep", (
    FieldSpec(1, "seq", Kind.UINT, required=True),
    FieldSpec(2, "updated_at_us", Kind.UINT),
)))
QUERY_REQ = register(MessageSchema(0x0303, "is_query_req", (
    FieldSpec(1, "key", Kind.STRING, required=True),
    FieldSpec(2, "prefix", Kind.UINT),
)))
QUERY_REP = register(MessageSchema(0x0304, "is_query_rep", (
    FieldSpec(1, "records", Kind.NESTED, repeated=True, schema=RECORD),
)))
EVENT = register(MessageSchema(0x0305, "is_event", (
    FieldSpec(1, "record", Kind.NESTED, required=True, schema=RECORD),
)))
META_REQ = register(MessageSchema(0x0306, "is_meta_req"))
META_REP = register(MessageSchema(0x0307, "is_meta_rep", (
    FieldSpec(1, "dest", Kind.STRING, required=True),
    FieldSpec(2, "events_address", Kind.STRING, required=True),
    FieldSpec(3, "shard_index", Kind.UINT),
    FieldSpec(4, "shard_count", Kind.UINT),
)))


class ErrorCode(enum.IntEnum):
    MALFORMED_RECORD = 1793
    WRONG_SHARD = 1794


def event_topic(dest: str, key: str) -> bytes:
    return f"is.{dest}.{key}".encode()


def record_to_wire(record: InfoRecord) -> dict:
    record.validate()
    out = {"key": record.key, "kind": int(record.kind)}
    kind, value = record.kind, record.value
    if kind is RecordKind.COUNTER:
        out["ivalue"] = value
    elif kind is RecordKind.GAUGE:
        out["fvalue"] = float_bits(value)
    elif kind is RecordKind.HISTOGRAM:
        out["edges"] = [float_bits(e) for e in value.edges]
        out["counts"] = list(value.counts)
    elif kind is RecordKind.STATUS:
        out["status"] = value
    else:
        out["severity"] = int(value.severity)
        out["text"] = value.text
    if record.source:
        out["source"] = record.source
    if record.updated_at:
        out["updated_at_us"] = int(record.updated_at * 1e6)
    if record.seq:
        out["seq"] = record.seq
    return out


def record_from_wire(v: dict) -> InfoRecord:
    try:
        kind = RecordKind(v["kind"])
    except ValueError as e:
        raise MalformedRecord(str(e)) from None
    if kind is RecordKind.COUNTER:
        value = v.get("ivalue", 0)
    elif kind is RecordKind.GAUGE:
        value = bits_float(v.get("fvalue", 0))
    elif kind is RecordKind.HISTOGRAM:
        value = Histogram(tuple(bits_float(e) for e in v.get("edges", [])),
                          tuple(v.get("counts", [])))
    elif kind is RecordKind.STATUS:
        value = v.get("status", "")
    else:
        try:
            severity = Severity(v.get("severity", 0))
        except ValueError:
            raise MalformedRecord(f"bad severity {v.get('severity')}") from None
        value = ErrorInfo(severity, v.get("text", ""))
    record = InfoRecord(
        key=v["key"], kind=kind, value=value, source=v.get("source", ""),
        updated_at=v.get("updated_at_us", 0) / 1e6, seq=v.get("seq", 0))
    record.validate()
    return record
