"""Registry wire schemas (msg_type range 0x0400-0x04FF) and error codes."""
from __future__ import annotations

import enum

from ..messaging.core import register
from ..messaging.frame import FieldSpec, Kind, MessageSchema

CREATE_REQ = register(MessageSchema(0x0401, "reg_create_req", (
    FieldSpec(1, "path", Kind.STRING, required=True),
    FieldSpec(2, "data", Kind.BYTES),
    FieldSpec(3, "ephemeral", Kind.UINT),
    FieldSpec(4, "sequential", Kind.UINT),
    FieldSpec(5, "recursive", Kind.UINT),
    FieldSpec(6, "lease_id", Kind.UINT),
)))
CREATE_REP = register(MessageSchema(0x0402, "reg_create_rep", (
    FieldSpec(1, "path", Kind.STRING, required=True),
    FieldSpec(2, "zxid", Kind.UINT, required=True),
)))
GET_REQ = register(MessageSchema(0x0403, "reg_get_req", (
    FieldSpec(1, "path", Kind.STRING, required=True),
    FieldSpec(2, "watch", Kind.UINT),
    FieldSpec(3, "lease_id", Kind.UINT),
)))
GET_REP = register(MessageSchema(0x0404, "reg_get_rep", (
    FieldSpec(1, "data", Kind.BYTES),
    FieldSpec(2, "mzxid", Kind.UINT),
    FieldSpec(3, "czxid", Kind.UINT),
)))
SET_REQ = register(MessageSchema(0x0405, "reg_set_req", (
    FieldSpec(1, "path", Kind.STRING, required=True),
    FieldSpec(2, "data", Kind.BYTES),
)))
SET_REP = register(MessageSchema(0x0406, "reg_set_rep", (
    FieldSpec(1, "zxid", Kind.UINT, required=True),
)))
DELETE_REQ = register(MessageSchema(0x0407, "reg_delete_req", (
    FieldSpec(1, "path", Kind.STRING, required=True),
)))
DELETE_REP = register(MessageSchema(0x0408, "reg_delete_rep", (
    FieldSpec(1, "zxid", Kind.UINT, required=True),
)))
CHILDREN_REQ = register(MessageSchema(0x0409, "reg_children_req", (
    FieldSpec(1, "path", Kind.STRING, required=True),
    FieldSpec(2, "watch", Kind.UINT),
    FieldSpec(3, "lease_id", Kind.UINT),
)))
CHILDREN_REP = register(MessageSchema(0x040A, "reg_children_rep", (
    FieldSpec(1, "names", Kind.STRING, repeated=True),
    FieldSpec(2, "zxid", Kind.UINT),
)))
LEASE_REQ = register(MessageSchema(0x040B, "reg_lease_req", (
    FieldSpec(1, "ttl_ms", Kind.UINT),
    FieldSpec(2, "resume_lease_id", Kind.UINT),
)))
LEASE_REP = register(MessageSchema(0x040C, "reg_lease_rep", (
    FieldSpec(1, "lease_id", Kind.UINT, required=True),
    FieldSpec(2, "resumed", Kind.UINT),
    FieldSpec(3, "events_address", Kind.STRING, required=True),
    FieldSpec(4, "ttl_ms", Kind.UINT),
)))
HEARTBEAT_REQ = register(MessageSchema(0x040D, "reg_heartbeat_req", (
    FieldSpec(1, "lease_id", Kind.UINT, required=True),
)))
HEARTBEAT_REP = register(MessageSchema(0x040E, "reg_heartbeat_rep"))
EXISTS_REQ = register(MessageSchema(0x040F, "reg_exists_req", (
    FieldSpec(1, "path", Kind.STRING, required=True),
    FieldSpec(2, "watch", Kind.UINT),
    FieldSpec(3, "lease_id", Kind.UINT),
)))
EXISTS_REP = register(MessageSchema(0x0410, "reg_exists_rep", (
    FieldSpec(1, "exists", Kind.UINT, required=True),
    FieldSpec(2, "data", Kind.BYTES),
    FieldSpec(3, "mzxid", Kind.UINT),
)))
WATCH_EVENT = register(MessageSchema(0x0411, "reg_watch_event", (
    FieldSpec(1, "path", Kind.STRING, required=True),
    FieldSpec(2, "event", Kind.UINT, required=True),
    FieldSpec(3, "zxid", Kind.UINT, required=True),
)))
RELEASE_REQ = register(MessageSchema(0x0412, "reg_release_req", (
    FieldSpec(1, "lease_id", Kind.UINT, required=True),
)))
RELEASE_REP = register(MessageSchema(0x0413, "reg_release_rep"))


CATALOG_REPLY = {
    CREATE_REQ.msg_type: CREATE_REP,
    GET_REQ.msg_type: GET_REP,
    SET_REQ.msg_type: SET_REP,
    DELETE_REQ.msg_type: DELETE_REP,
    CHILDREN_REQ.msg_type: CHILDREN_REP,
    LEASE_REQ.msg_type: LEASE_REP,
    HEARTBEAT_REQ.msg_type: HEARTBEAT_REP,
    EXISTS_REQ.msg_type: EXISTS_REP,
    RELEASE_REQ.msg_type: RELEASE_REP,
}


class EventType(enum.IntEnum):
    CREATED = 1
    DELETED = 2
    DATA_CHANGED = 3
    CHILDREN_CHANGED = 4


class ErrorCode(enum.IntEnum):
    NOT_FOUND = 1025
    ALREADY_EXISTS = 1026
    NO_PARENT = 1027
    NOT_EMPTY = 1028
    LEASE_EXPIRED = 1029
    BAD_REQUEST = 1030


def watch_topic(lease_id: int) -> bytes:
    return f"w.{lease_id}/".encode()
