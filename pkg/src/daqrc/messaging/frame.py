"""Wire envelope and TLV payload codec.

Every message in the framework is a frame: a fixed 20-byte header followed
by a payload of tag-length-value records. The encoding is canonical --
fields are emitted in ascending tag order, so identical inputs always
produce identical bytes. See docs/wire.md for worked byte examples.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

MAGIC = b"JNOS"
VERSION = 1
HEADER_LEN = 20
MAX_PAYLOAD = 16 * 1024 * 1024

FLAG_REPLY = 0x01
FLAG_ERROR = 0x02
RESERVED_FLAGS = 0xFC

_HEADER = struct.Struct(">4sBHBQI")


class MessagingError(Exception):
    """Base class for codec and transport errors."""


class EncodeError(MessagingError):
    pass


class MissingRequiredField(EncodeError):
    pass


class KindMismatch(EncodeError):
    pass


class PayloadTooLarge(EncodeError):
    pass


class DecodeError(MessagingError):
    pass


class BadMagic(DecodeError):
    pass


class UnsupportedVersion(DecodeError):
    pass


class TruncatedPayload(DecodeError):
    pass


class RequiredFieldAbsent(DecodeError):
    pass


class UnknownMsgType(DecodeError):
    pass


class Kind(enum.Enum):
    UINT = "uint"
    SINT = "sint"
    BYTES = "bytes"
    STRING = "string"
    NESTED = "nested"


# Wire codes: 0 = varint scalar, 2 = length-delimited.
_WIRE_VARINT = 0
_WIRE_LEN = 2

_WIRECODE = {
    Kind.UINT: _WIRE_VARINT,
    Kind.SINT: _WIRE_VARINT,
    Kind.BYTES: _WIRE_LEN,
    Kind.STRING: _WIRE_LEN,
    Kind.NESTED: _WIRE_LEN,
}


@dataclass(frozen=True)
class FieldSpec:
    """One field of a message schema.

    ``repeated`` fields encode each element as its own tagged record, in
    list order. ``Kind.NESTED`` fields carry ``schema``, the sub-message
    schema used to encode the value.
    """

    tag: int
    name: str
    kind: Kind
    required: bool = False
    repeated: bool = False
    schema: "MessageSchema | None" = None

    def __post_init__(self):
        if self.tag < 1:
            raise ValueError(f"field tag must be >= 1, got {self.tag}")
        if self.kind is Kind.NESTED and self.schema is None:
            raise ValueError(f"nested field {self.name!r} needs a schema")
        if self.required and self.repeated:
            raise ValueError(f"field {self.name!r}: repeated fields cannot be required")


@dataclass(frozen=True)
class MessageSchema:
    msg_type: int
    name: str
    fields: tuple[FieldSpec, ...] = ()

    def __post_init__(self):
        if not 0 <= self.msg_type <= 0xFFFF:
            raise ValueError(f"msg_type out of range: {self.msg_type}")
        tags = [f.tag for f in self.fields]
        if len(tags) != len(set(tags)):
            raise ValueError(f"schema {self.name!r} has duplicate tags")
        # Canonical emit order is ascending tag; keep the field list sorted
        # so encoding is a straight walk.
        object.__setattr__(self, "fields", tuple(sorted(self.fields, key=lambda f: f.tag)))

    def field_by_name(self, name: str) -> FieldSpec:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)


class SchemaRegistry:
    """msg_type -> schema lookup used by decoders."""

    def __init__(self):
        self._by_type: dict[int, MessageSchema] = {}

    def add(self, schema: MessageSchema) -> MessageSchema:
        existing = self._by_type.get(schema.msg_type)
        if existing is not None and existing is not schema:
            raise ValueError(f"msg_type 0x{schema.msg_type:04X} already registered as {existing.name!r}")
        self._by_type[schema.msg_type] = schema
        return schema

    def get(self, msg_type: int) -> MessageSchema:
        try:
            return self._by_type[msg_type]
        except KeyError:
            raise UnknownMsgType(f"no schema registered for msg_type 0x{msg_type:04X}") from None

    def __contains__(self, msg_type: int) -> bool:
        return msg_type in self._by_type


def encode_varint(value: int) -> bytes:
    if value < 0:
        raise KindMismatch(f"varint cannot encode negative value {value}")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def decode_varint(data, pos: int) -> tuple[int, int]:
    """Return (value, next position). Raises on truncation."""
    result = 0
    shift = 0
    n = len(data)
    while True:
        if pos >= n:
            raise TruncatedPayload("varint runs past end of payload")
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise DecodeError("varint longer than 10 bytes")


def zigzag_encode(value: int) -> int:
    if not -(1 << 63) <= value < (1 << 63):
        raise KindMismatch(f"signed value out of 64-bit range: {value}")
    return (value << 1) ^ (value >> 63)


def zigzag_decode(value: int) -> int:
    return (value >> 1) ^ -(value & 1)


def _encode_scalar(spec: FieldSpec, value, out: bytearray):
    kind = spec.kind
    if kind is Kind.UINT:
        if not isinstance(value, int) or isinstance(value, bool) or value < 0 or value >= (1 << 64):
            raise KindMismatch(f"field {spec.name!r} expects unsigned 64-bit int, got {value!r}")
        out += encode_varint(spec.tag << 3 | _WIRE_VARINT)
        out += encode_varint(value)
    elif kind is Kind.SINT:
        if not isinstance(value, int) or isinstance(value, bool):
            raise KindMismatch(f"field {spec.name!r} expects int, got {value!r}")
        out += encode_varint(spec.tag << 3 | _WIRE_VARINT)
        out += encode_varint(zigzag_encode(value))
    elif kind is Kind.BYTES:
        if not isinstance(value, (bytes, bytearray, memoryview)):
            raise KindMismatch(f"field {spec.name!r} expects bytes, got {value!r}")
        out += encode_varint(spec.tag << 3 | _WIRE_LEN)
        out += encode_varint(len(value))
        out += value
    elif kind is Kind.STRING:
        if not isinstance(value, str):
            raise KindMismatch(f"field {spec.name!r} expects str, got {value!r}")
        raw = value.encode("utf-8")
        out += encode_varint(spec.tag << 3 | _WIRE_LEN)
        out += encode_varint(len(raw))
        out += raw
    elif kind is Kind.NESTED:
        if not isinstance(value, dict):
            raise KindMismatch(f"field {spec.name!r} expects a field-value map, got {value!r}")
        raw = encode_payload(spec.schema, value)
        out += encode_varint(spec.tag << 3 | _WIRE_LEN)
        out += encode_varint(len(raw))
        out += raw
    else:  # pragma: no cover
        raise KindMismatch(f"unhandled kind {kind}")


def encode_payload(schema: MessageSchema, values: dict) -> bytes:
    """Encode a field-value map against a schema, in ascending tag order."""
    known = {f.name for f in schema.fields}
    for name in values:
        if name not in known:
            raise KindMismatch(f"schema {schema.name!r} has no field {name!r}")
    out = bytearray()
    for spec in schema.fields:
        value = values.get(spec.name)
        if value is None:
            if spec.required:
                raise MissingRequiredField(f"{schema.name}.{spec.name}")
            continue
        if spec.repeated:
            if not isinstance(value, (list, tuple)):
                raise KindMismatch(f"field {spec.name!r} is repeated, expects a list")
            for item in value:
                _encode_scalar(spec, item, out)
        else:
            _encode_scalar(spec, value, out)
    return bytes(out)


def decode_payload(schema: MessageSchema, data) -> dict:
    """Decode payload bytes into a field-value map.

    Unknown tags are skipped (forward compatibility); a missing required
    field raises RequiredFieldAbsent.
    """
    specs_by_tag = {f.tag: f for f in schema.fields}
    values: dict = {}
    pos = 0
    n = len(data)
    while pos < n:
        key, pos = decode_varint(data, pos)
        tag = key >> 3
        wirecode = key & 0x7
        if wirecode == _WIRE_VARINT:
            raw, pos = decode_varint(data, pos)
        elif wirecode == _WIRE_LEN:
            length, pos = decode_varint(data, pos)
            if pos + length > n:
                raise TruncatedPayload(f"length-delimited field at tag {tag} runs past end")
            raw = bytes(data[pos:pos + length])
            pos += length
        else:
            raise DecodeError(f"unsupported wire code {wirecode} at tag {tag}")
        spec = specs_by_tag.get(tag)
        if spec is None:
            continue  # unknown tag: skip
        if _WIRECODE[spec.kind] != wirecode:
            raise DecodeError(f"field {spec.name!r}: wire code {wirecode} does not match kind {spec.kind.name}")
        if spec.kind is Kind.UINT:
            value = raw
        elif spec.kind is Kind.SINT:
            value = zigzag_decode(raw)
        elif spec.kind is Kind.BYTES:
            value = raw
        elif spec.kind is Kind.STRING:
            value = raw.decode("utf-8")
        else:
            value = decode_payload(spec.schema, raw)
        if spec.repeated:
            values.setdefault(spec.name, []).append(value)
        else:
            values[spec.name] = value
    for spec in schema.fields:
        if spec.required and spec.name not in values:
            raise RequiredFieldAbsent(f"{schema.name}.{spec.name}")
    return values


@dataclass
class RawFrame:
    """A frame whose payload has not been interpreted against a schema."""

    msg_type: int
    payload: bytes = b""
    correlation_id: int = 0
    flags: int = 0

    def to_bytes(self) -> bytes:
        if len(self.payload) > MAX_PAYLOAD:
            raise PayloadTooLarge(f"payload is {len(self.payload)} bytes, max {MAX_PAYLOAD}")
        if self.flags & RESERVED_FLAGS:
            raise EncodeError(f"reserved flag bits set: 0x{self.flags:02X}")
        return _HEADER.pack(MAGIC, VERSION, self.msg_type, self.flags,
                            self.correlation_id, len(self.payload)) + self.payload

    @property
    def is_reply(self) -> bool:
        return bool(self.flags & FLAG_REPLY)

    @property
    def is_error(self) -> bool:
        return bool(self.flags & FLAG_ERROR)


def parse_header(header: bytes) -> tuple[int, int, int, int]:
    """Validate a 20-byte header; return (msg_type, flags, correlation_id, payload_len)."""
    if len(header) < HEADER_LEN:
        raise TruncatedPayload(f"header is {len(header)} bytes, need {HEADER_LEN}")
    magic, version, msg_type, flags, correlation_id, payload_len = _HEADER.unpack_from(header)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}, expected {VERSION}")
    if flags & RESERVED_FLAGS:
        raise DecodeError(f"reserved flag bits set: 0x{flags:02X}")
    if payload_len > MAX_PAYLOAD:
        raise PayloadTooLarge(f"declared payload {payload_len} bytes exceeds max")
    return msg_type, flags, correlation_id, payload_len


def parse_frame(data: bytes) -> RawFrame:
    msg_type, flags, correlation_id, payload_len = parse_header(data)
    if len(data) != HEADER_LEN + payload_len:
        raise TruncatedPayload(
            f"frame is {len(data)} bytes, header declares {HEADER_LEN + payload_len}")
    return RawFrame(msg_type, data[HEADER_LEN:], correlation_id, flags)


def encode_frame(schema: MessageSchema, values: dict, correlation_id: int = 0,
                 flags: int = 0) -> bytes:
    """Encode header + payload for a schema. Deterministic for equal inputs."""
    payload = encode_payload(schema, values)
    return RawFrame(schema.msg_type, payload, correlation_id, flags).to_bytes()


def decode_frame(data: bytes, registry: SchemaRegistry) -> tuple[int, dict, int, int]:
    """Inverse of encode_frame: (msg_type, values, correlation_id, flags)."""
    raw = parse_frame(data)
    schema = registry.get(raw.msg_type)
    values = decode_payload(schema, raw.payload)
    return raw.msg_type, values, raw.correlation_id, raw.flags
