"""Built-in schemas and the shared schema catalog.

Service modules register their own message schemas here at import time.
Type ranges: 0x0001-0x00FF core, 0x0100-0x01FF run control, 0x0200-0x02FF
process manager, 0x0300-0x03FF information service, 0x0400-0x04FF registry.
"""
from __future__ import annotations

from .frame import FieldSpec, Kind, MessageSchema, SchemaRegistry

CATALOG = SchemaRegistry()


def register(schema: MessageSchema) -> MessageSchema:
    return CATALOG.add(schema)


PING = register(MessageSchema(0x0001, "ping"))
PONG = register(MessageSchema(0x0002, "pong"))

ERROR = register(MessageSchema(0x0003, "error", (
    FieldSpec(1, "code", Kind.UINT, required=True),
    FieldSpec(2, "text", Kind.STRING, required=True),
)))

# Subscriber -> publisher: replace the set of subscribed topic prefixes.
SUB_UPDATE = register(MessageSchema(0x0004, "sub_update", (
    FieldSpec(1, "prefixes", Kind.BYTES, repeated=True),
)))

# Puller -> pusher: frame with this correlation id was consumed.
PUSH_ACK = register(MessageSchema(0x0005, "push_ack"))

# Connector -> binder, first frame on every connection.
HELLO = register(MessageSchema(0x0006, "hello", (
    FieldSpec(1, "pattern", Kind.UINT, required=True),
)))
