"""Process-manager wire schemas (msg_type range 0x0200-0x02FF)."""
from __future__ import annotations

import enum

from ..messaging.core import register
from ..messaging.frame import FieldSpec, Kind, MessageSchema
from .manager import ProcessHandle, ProcStatus

HANDLE = MessageSchema(0x0210, "pm_handle", (
    FieldSpec(1, "object_id", Kind.STRING, required=True),
    FieldSpec(2, "os_pid", Kind.UINT),
    FieldSpec(3, "status", Kind.UINT, required=True),
    FieldSpec(4, "exit_code", Kind.SINT),
    FieldSpec(5, "term_signal", Kind.UINT),
    FieldSpec(6, "reason", Kind.STRING),
    FieldSpec(7, "started_at_us", Kind.UINT),
    FieldSpec(8, "ended_at_us", Kind.UINT),
))
register(HANDLE)

LAUNCH_REQ = register(MessageSchema(0x0201, "pm_launch_req", (
    FieldSpec(1, "object_id", Kind.STRING, required=True),
    FieldSpec(2, "binary", Kind.STRING, required=True),
    FieldSpec(3, "args", Kind.STRING, repeated=True),
    FieldSpec(4, "env", Kind.STRING, repeated=True),  # "KEY=VALUE"
    FieldSpec(5, "working_dir", Kind.STRING),
    FieldSpec(6, "log_dir", Kind.STRING),
)))
HANDLE_REP = register(MessageSchema(0x0202, "pm_handle_rep", (
    FieldSpec(1, "handle", Kind.NESTED, required=True, schema=HANDLE),
)))
STOP_REQ = register(MessageSchema(0x0203, "pm_stop_req", (
    FieldSpec(1, "object_id", Kind.STRING, required=True),
    FieldSpec(2, "grace_ms", Kind.UINT),
)))
STATUS_REQ = register(MessageSchema(0x0205, "pm_status_req", (
    FieldSpec(1, "object_id", Kind.STRING),
)))
STATUS_REP = register(MessageSchema(0x0206, "pm_status_rep", (
    FieldSpec(1, "handles", Kind.NESTED, repeated=True, schema=HANDLE),
)))
REAP_REQ = register(MessageSchema(0x0207, "pm_reap_req"))
REAP_REP = register(MessageSchema(0x0208, "pm_reap_rep", (
    FieldSpec(1, "count", Kind.UINT, required=True),
)))


class ErrorCode(enum.IntEnum):
    BINARY_NOT_FOUND = 1537
    DUPLICATE_OBJECT_ID = 1538
    SPAWN_OS_ERROR = 1539
    NOT_FOUND = 1540


def handle_to_wire(h: ProcessHandle) -> dict:
    out = {"object_id": h.object_id, "os_pid": h.os_pid, "status": int(h.status),
           "started_at_us": int(h.started_at * 1e6), "ended_at_us": int(h.ended_at * 1e6)}
    if h.exit_code is not None:
        out["exit_code"] = h.exit_code
    if h.term_signal is not None:
        out["term_signal"] = h.term_signal
    if h.reason is not None:
        out["reason"] = h.reason
    return out


def handle_from_wire(v: dict) -> ProcessHandle:
    return ProcessHandle(
        object_id=v["object_id"],
        os_pid=v.get("os_pid", 0),
        status=ProcStatus(v["status"]),
        exit_code=v.get("exit_code"),
        term_signal=v.get("term_signal"),
        reason=v.get("reason"),
        started_at=v.get("started_at_us", 0) / 1e6,
        ended_at=v.get("ended_at_us", 0) / 1e6,
    )
