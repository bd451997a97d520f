"""Run-control wire schemas (msg_type range 0x0100-0x01FF)."""
from __future__ import annotations

import enum
from dataclasses import dataclass

from ..messaging.core import register
from ..messaging.frame import FieldSpec, Kind, MessageSchema
from .fsm import RunState

NODE_REPORT = MessageSchema(0x0110, "rc_node_report", (
    FieldSpec(1, "path", Kind.STRING, required=True),
    FieldSpec(2, "old_state", Kind.UINT),
    FieldSpec(3, "new_state", Kind.UINT, required=True),
    FieldSpec(4, "error", Kind.STRING),
))
register(NODE_REPORT)

COMMAND_REQ = register(MessageSchema(0x0101, "rc_command_req", (
    FieldSpec(1, "command", Kind.UINT, required=True),
    FieldSpec(2, "run_number", Kind.UINT),
)))
COMMAND_REP = register(MessageSchema(0x0102, "rc_command_rep", (
    FieldSpec(1, "state", Kind.UINT, required=True),
    FieldSpec(2, "run_number", Kind.UINT),
    FieldSpec(3, "reports", Kind.NESTED, repeated=True, schema=NODE_REPORT),
)))
STATUS_REQ = register(MessageSchema(0x0103, "rc_status_req"))
STATUS_REP = register(MessageSchema(0x0104, "rc_status_rep", (
    FieldSpec(1, "state", Kind.UINT, required=True),
    FieldSpec(2, "run_number", Kind.UINT),
    FieldSpec(3, "reports", Kind.NESTED, repeated=True, schema=NODE_REPORT),
)))
STATE_EVENT = register(MessageSchema(0x0105, "rc_state_event", (
    FieldSpec(1, "partition", Kind.STRING, required=True),
    FieldSpec(2, "node", Kind.STRING, required=True),
    FieldSpec(3, "state", Kind.UINT, required=True),
    FieldSpec(4, "run_number", Kind.UINT),
    FieldSpec(5, "at_us", Kind.UINT),
)))


class ErrorCode(enum.IntEnum):
    ILLEGAL_TRANSITION = 257
    NOT_MASTER = 258
    BUSY = 259


@dataclass(frozen=True)
class NodeReport:
    path: str
    old_state: RunState | None
    new_state: RunState
    error: str = ""

    def to_wire(self) -> dict:
        out = {"path": self.path, "new_state": int(self.new_state)}
        if self.old_state is not None:
            out["old_state"] = int(self.old_state)
        if self.error:
            out["error"] = self.error
        return out

    @classmethod
    def from_wire(cls, v: dict) -> "NodeReport":
        old = v.get("old_state")
        return cls(v["path"], RunState(old) if old else None,
                   RunState(v["new_state"]), v.get("error", ""))


@dataclass
class CommandReport:
    state: RunState
    run_number: int
    reports: list[NodeReport]

    @property
    def errors(self) -> list[NodeReport]:
        return [r for r in self.reports if r.error]

    @classmethod
    def from_wire(cls, v: dict) -> "CommandReport":
        return cls(RunState(v["state"]), v.get("run_number", 0),
                   [NodeReport.from_wire(r) for r in v.get("reports", [])])


def state_topic(partition: str, node: str) -> bytes:
    return f"state.{partition}.{node}".encode()


def node_service(partition: str, object_id: str) -> str:
    return f"rc.{partition}.{object_id}"


def nodes_base(partition: str) -> str:
    return f"/partitions/{partition}/nodes"


def node_path(partition: str, object_id: str) -> str:
    return f"{nodes_base(partition)}/{object_id}"


def snapshot_path(partition: str, controller_id: str) -> str:
    return f"/partitions/{partition}/snap/{controller_id}"
