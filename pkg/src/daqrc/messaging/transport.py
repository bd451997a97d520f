"""Framed TCP transport.

Frames are self-delimiting (the header carries the payload length), so the
stream needs no extra length prefix. Pub-sub traffic additionally prefixes
each frame with a 2-byte topic length and the topic bytes; see docs/wire.md.
"""
from __future__ import annotations

import socket
import struct
import threading

from .frame import HEADER_LEN, MAX_PAYLOAD, MessagingError, parse_header


class ConnectionLost(MessagingError):
    pass


class Timeout(MessagingError):
    pass


_TOPIC_LEN = struct.Struct(">H")


def connect(address: str, timeout: float | None = 5.0) -> socket.socket:
    host, _, port = address.rpartition(":")
    try:
        sock = socket.create_connection((host, int(port)), timeout=timeout)
    except OSError as e:
        raise ConnectionLost(f"connect to {address} failed: {e}") from e
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return sock


def bind(host: str, port: int, backlog: int = 128) -> socket.socket:
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    sock.bind((host, port))
    sock.listen(backlog)
    return sock


def sock_address(sock: socket.socket) -> str:
    host, port = sock.getsockname()[:2]
    return f"{host}:{port}"


class FrameStream:
    """Buffered frame reader/writer over one socket.

    Reads accumulate into a local buffer so several pipelined frames can be
    drained per recv syscall; writes are plain sendall (callers batch where
    it matters). recv_frame is single-reader; send_frame takes a lock so
    multiple threads may interleave whole frames.
    """

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._buf = bytearray()
        self._pos = 0
        self._wlock = threading.Lock()
        sock.settimeout(None)

    def close(self):
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()

    def send_frame(self, data: bytes):
        with self._wlock:
            try:
                self.sock.sendall(data)
            except (OSError, ValueError) as e:
                raise ConnectionLost(str(e)) from e

    def _fill(self, timeout: float | None) -> bool:
        """Pull more bytes into the buffer; False on clean EOF."""
        try:
            self.sock.settimeout(timeout)
            chunk = self.sock.recv(65536)
        except socket.timeout:
            raise Timeout("recv timed out") from None
        except OSError as e:
            raise ConnectionLost(str(e)) from e
        if not chunk:
            return False
        if self._pos and self._pos == len(self._buf):
            self._buf.clear()
            self._pos = 0
        self._buf += chunk
        return True

    def _available(self) -> int:
        return len(self._buf) - self._pos

    def recv_frame(self, timeout: float | None = None) -> bytes | None:
        """Next complete frame (header+payload bytes), or None on clean EOF."""
        while self._available() < HEADER_LEN:
            if not self._fill(timeout):
                if self._available():
                    raise ConnectionLost("peer closed mid-frame")
                return None
        header = bytes(self._buf[self._pos:self._pos + HEADER_LEN])
        _, _, _, payload_len = parse_header(header)
        total = HEADER_LEN + payload_len
        while self._available() < total:
            if not self._fill(timeout):
                raise ConnectionLost("peer closed mid-frame")
        start = self._pos
        self._pos += total
        data = bytes(self._buf[start:start + total])
        if self._pos == len(self._buf):
            self._buf.clear()
            self._pos = 0
        return data

    def has_buffered_frame(self) -> bool:
        """True when a complete frame is already in the local buffer."""
        avail = self._available()
        if avail < HEADER_LEN:
            return False
        _, _, _, payload_len = parse_header(bytes(self._buf[self._pos:self._pos + HEADER_LEN]))
        return avail >= HEADER_LEN + payload_len

    # Topic-prefixed variant used by pub-sub.
    def send_topic_frame(self, topic: bytes, data: bytes):
        if len(topic) > 0xFFFF:
            raise MessagingError("topic longer than 65535 bytes")
        with self._wlock:
            try:
                self.sock.sendall(_TOPIC_LEN.pack(len(topic)) + topic + data)
            except (OSError, ValueError) as e:
                raise ConnectionLost(str(e)) from e

    def recv_topic_frame(self, timeout: float | None = None) -> tuple[bytes, bytes] | None:
        while self._available() < 2:
            if not self._fill(timeout):
                if self._available():
                    raise ConnectionLost("peer closed mid-frame")
                return None
        topic_len = _TOPIC_LEN.unpack_from(self._buf, self._pos)[0]
        while self._available() < 2 + topic_len + HEADER_LEN:
            if not self._fill(timeout):
                raise ConnectionLost("peer closed mid-frame")
        base = self._pos
        header_at = base + 2 + topic_len
        _, _, _, payload_len = parse_header(bytes(self._buf[header_at:header_at + HEADER_LEN]))
        total = 2 + topic_len + HEADER_LEN + payload_len
        if total > 2 + 0xFFFF + HEADER_LEN + MAX_PAYLOAD:
            raise MessagingError("oversized topic frame")
        while self._available() < total:
            if not self._fill(timeout):
                raise ConnectionLost("peer closed mid-frame")
        base = self._pos
        topic = bytes(self._buf[base + 2:base + 2 + topic_len])
        frame = bytes(self._buf[base + 2 + topic_len:base + total])
        self._pos += total
        if self._pos == len(self._buf):
            self._buf.clear()
            self._pos = 0
        return topic, frame
