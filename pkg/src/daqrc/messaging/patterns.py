"""The three communication patterns over framed TCP.

Request-reply: each reply is matched to its request by correlation id;
one connection may carry many requests in flight. Publish-subscribe:
delivery iff the topic starts with a subscribed byte prefix; nothing is
replayed to late or disconnected subscribers. Push-pull: each frame goes
to exactly one puller, round-robin over the connected set, with a consume
ack so frames survive a puller dying mid-stream.

Connectors identify their pattern with a hello frame; binders refuse
incompatible peers, which makes the pairing rule observable on the wire.
"""
from __future__ import annotations

import enum
import itertools
import queue
import socket
import struct
import threading
from dataclasses import dataclass

from . import core
from .frame import (
    FLAG_ERROR,
    FLAG_REPLY,
    MessagingError,
    RawFrame,
    decode_payload,
    encode_frame,
    parse_frame,
)
from .transport import ConnectionLost, FrameStream, Timeout, bind, connect, sock_address

DEFAULT_REQUEST_TIMEOUT = 5.0
DEFAULT_HWM = 10_000

_CID = struct.Struct(">Q")


class Pattern(enum.IntEnum):
    REQUESTER = 1
    REPLIER = 2
    PUBLISHER = 3
    SUBSCRIBER = 4
    PUSHER = 5
    PULLER = 6


class Role(enum.Enum):
    BIND = "bind"
    CONNECT = "connect"


_PAIRS = {
    Pattern.REQUESTER: Pattern.REPLIER,
    Pattern.REPLIER: Pattern.REQUESTER,
    Pattern.PUBLISHER: Pattern.SUBSCRIBER,
    Pattern.SUBSCRIBER: Pattern.PUBLISHER,
    Pattern.PUSHER: Pattern.PULLER,
    Pattern.PULLER: Pattern.PUSHER,
}


@dataclass(frozen=True)
class Endpoint:
    pattern: Pattern
    address: str
    role: Role

    def pairs_with(self, other: "Endpoint") -> bool:
        return _PAIRS[self.pattern] is other.pattern


class IncompatiblePattern(MessagingError):
    pass


class NoPeers(MessagingError):
    pass


class RequestFailed(MessagingError):
    """Peer replied with the error flag set."""

    def __init__(self, code: int, text: str):
        super().__init__(f"[{code}] {text}")
        self.code = code
        self.text = text


def error_frame(correlation_id: int, code: int, text: str) -> bytes:
    return encode_frame(core.ERROR, {"code": code, "text": text},
                        correlation_id, FLAG_REPLY | FLAG_ERROR)


def _with_cid(data: bytes, correlation_id: int) -> bytes:
    """Rewrite the correlation id in place (header bytes 8..16)."""
    return data[:8] + _CID.pack(correlation_id) + data[16:]


def _hello(pattern: Pattern) -> bytes:
    return encode_frame(core.HELLO, {"pattern": int(pattern)})


def _read_hello(stream: FrameStream, expected: Pattern, timeout: float = 5.0) -> bool:
    try:
        data = stream.recv_frame(timeout=timeout)
        if data is None:
            return False
        raw = parse_frame(data)
        if raw.msg_type != core.HELLO.msg_type:
            return False
        got = decode_payload(core.HELLO, raw.payload)["pattern"]
        if got != int(expected):
            stream.send_frame(error_frame(0, 0, f"pattern {got} not accepted here"))
            return False
        return True
    except MessagingError:
        return False


class _PendingReply:
    __slots__ = ("_event", "_value", "_error")

    def __init__(self):
        self._event = threading.Event()
        self._value = None
        self._error = None

    def _resolve(self, value=None, error=None):
        self._value = value
        self._error = error
        self._event.set()

    def result(self, timeout: float | None) -> RawFrame:
        if not self._event.wait(timeout):
            raise Timeout("no reply within timeout")
        if self._error is not None:
            raise self._error
        return self._value


class Requester:
    """Connecting half of request-reply. Thread-safe; many requests may be
    in flight on the one connection, matched back by correlation id."""

    def __init__(self, address: str, timeout: float = DEFAULT_REQUEST_TIMEOUT,
                 connect_timeout: float = 5.0):
        self.address = address
        self.timeout = timeout
        self._stream = FrameStream(connect(address, timeout=connect_timeout))
        self._stream.send_frame(_hello(Pattern.REQUESTER))
        self._pending: dict[int, _PendingReply] = {}
        self._lock = threading.Lock()
        self._cid = itertools.count(1)
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True,
                                        name=f"req-read-{address}")
        self._reader.start()

    def _read_loop(self):
        try:
            while True:
                data = self._stream.recv_frame()
                if data is None:
                    raise ConnectionLost("replier closed the connection")
                raw = parse_frame(data)
                with self._lock:
                    pending = self._pending.pop(raw.correlation_id, None)
                if pending is None:
                    continue  # unsolicited or stale reply: discard
                if raw.is_error:
                    err = decode_payload(core.ERROR, raw.payload)
                    pending._resolve(error=RequestFailed(err["code"], err["text"]))
                else:
                    pending._resolve(value=raw)
        except MessagingError as e:
            with self._lock:
                self._closed = True
                pending = list(self._pending.values())
                self._pending.clear()
            lost = e if isinstance(e, ConnectionLost) else ConnectionLost(str(e))
            for p in pending:
                p._resolve(error=lost)

    def request_async(self, data: bytes) -> _PendingReply:
        pending = _PendingReply()
        with self._lock:
            if self._closed:
                raise ConnectionLost("requester is closed")
            cid = next(self._cid)
            self._pending[cid] = pending
        try:
            self._stream.send_frame(_with_cid(data, cid))
        except MessagingError:
            with self._lock:
                self._pending.pop(cid, None)
            raise
        return pending

    def request(self, data: bytes, timeout: float | None = None) -> RawFrame:
        pending = self.request_async(data)
        return pending.result(self.timeout if timeout is None else timeout)

    def close(self):
        with self._lock:
            self._closed = True
        self._stream.close()


class Replier:
    """Binding half of request-reply. The handler maps a request RawFrame to
    reply bytes (or a RawFrame); raising ErrorReply produces an error reply."""

    def __init__(self, handler, host: str = "127.0.0.1", port: int = 0):
        self._handler = handler
        self._sock = bind(host, port)
        self.address = sock_address(self._sock)
        self._closed = False
        self._streams: set[FrameStream] = set()
        self._lock = threading.Lock()
        self._accepter = threading.Thread(target=self._accept_loop, daemon=True,
                                          name=f"rep-accept-{self.address}")
        self._accepter.start()

    def _accept_loop(self):
        while not self._closed:
            try:
                sock, _ = self._sock.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            threading.Thread(target=self._serve_conn, args=(FrameStream(sock),),
                             daemon=True, name=f"rep-conn-{self.address}").start()

    def _serve_conn(self, stream: FrameStream):
        with self._lock:
            self._streams.add(stream)
        try:
            if not _read_hello(stream, Pattern.REQUESTER):
                return
            while not self._closed:
                data = stream.recv_frame()
                if data is None:
                    return
                raw = parse_frame(data)
                try:
                    reply = self._handler(raw)
                    if isinstance(reply, RawFrame):
                        reply.correlation_id = raw.correlation_id
                        reply.flags |= FLAG_REPLY
                        reply = reply.to_bytes()
                    else:
                        reply = _with_cid(reply, raw.correlation_id)
                except ErrorReply as e:
                    reply = error_frame(raw.correlation_id, e.code, e.text)
                except Exception as e:  # handler bug: surface, keep serving
                    reply = error_frame(raw.correlation_id, 0, f"{type(e).__name__}: {e}")
                stream.send_frame(reply)
        except MessagingError:
            pass
        finally:
            with self._lock:
                self._streams.discard(stream)
            stream.close()

    def close(self):
        self._closed = True
        self._sock.close()
        with self._lock:
            streams = list(self._streams)
        for s in streams:
            s.close()


class ErrorReply(Exception):
    """Raised inside replier handlers to produce an error reply."""

    def __init__(self, code: int, text: str):
        super().__init__(text)
        self.code = code
        self.text = text


def reply_frame(schema, values: dict, flags: int = 0) -> bytes:
    """Build reply bytes; the replier fills in the correlation id."""
    return encode_frame(schema, values, 0, flags | FLAG_REPLY)


class _SubscriberConn:
    __slots__ = ("stream", "prefixes", "queue", "alive")

    def __init__(self, stream: FrameStream, hwm: int):
        self.stream = stream
        self.prefixes: tuple[bytes, ...] = ()
        self.queue: queue.Queue = queue.Queue(maxsize=hwm)
        self.alive = True


class Publisher:
    """Binding half of publish-subscribe with per-subscriber send queues.

    A subscriber whose queue overflows the high-water mark is disconnected
    rather than allowed to stall the publisher.
    """

    def __init__(self, host: str = "127.0.0.1", port: int = 0, hwm: int = DEFAULT_HWM):
        self._hwm = hwm
        self._sock = bind(host, port)
        self.address = sock_address(self._sock)
        self._subs: list[_SubscriberConn] = []
        self._lock = threading.Lock()
        self._closed = False
        threading.Thread(target=self._accept_loop, daemon=True,
                         name=f"pub-accept-{self.address}").start()

    def _accept_loop(self):
        while not self._closed:
            try:
                sock, _ = self._sock.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            stream = FrameStream(sock)
            threading.Thread(target=self._serve_sub, args=(stream,), daemon=True,
                             name=f"pub-conn-{self.address}").start()

    def _serve_sub(self, stream: FrameStream):
        if not _read_hello(stream, Pattern.SUBSCRIBER):
            stream.close()
            return
        conn = _SubscriberConn(stream, self._hwm)
        with self._lock:
            self._subs.append(conn)
        writer = threading.Thread(target=self._write_loop, args=(conn,), daemon=True)
        writer.start()
        try:
            while conn.alive:
                data = stream.recv_frame()
                if data is None:
                    break
                raw = parse_frame(data)
                if raw.msg_type == core.SUB_UPDATE.msg_type:
                    values = decode_payload(core.SUB_UPDATE, raw.payload)
                    conn.prefixes = tuple(values.get("prefixes", []))
        except MessagingError:
            pass
        finally:
            self._drop(conn)

    def _write_loop(self, conn: _SubscriberConn):
        while True:
            item = conn.queue.get()
            if item is None:
                return
            topic, data = item
            try:
                conn.stream.send_topic_frame(topic, data)
            except MessagingError:
                self._drop(conn)
                return

    def _drop(self, conn: _SubscriberConn):
        with self._lock:
            if conn in self._subs:
                self._subs.remove(conn)
        conn.alive = False
        conn.stream.close()
        try:
            conn.queue.put_nowait(None)
        except queue.Full:
            pass

    def publish(self, topic: bytes, data: bytes):
        """Queue the frame for every subscriber with a matching prefix."""
        with self._lock:
            subs = list(self._subs)
        for conn in subs:
            prefixes = conn.prefixes
            if not any(topic.startswith(p) for p in prefixes):
                continue
            try:
                conn.queue.put_nowait((topic, data))
            except queue.Full:
                self._drop(conn)  # slow subscriber: over the high-water mark

    @property
    def subscriber_count(self) -> int:
        with self._lock:
            return len(self._subs)

    def has_subscribers(self) -> bool:
        return self.subscriber_count > 0

    def wait_for_subscribers(self, n: int, timeout: float = 5.0) -> bool:
        import time
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.subscriber_count >= n:
                return True
            time.sleep(0.005)
        return self.subscriber_count >= n

    def close(self):
        self._closed = True
        self._sock.close()
        with self._lock:
            subs = list(self._subs)
        for conn in subs:
            self._drop(conn)


class Subscriber:
    """Connecting half of publish-subscribe. May connect to several
    publishers; received (topic, frame) pairs merge into one queue."""

    def __init__(self, address: str | None = None, prefixes: tuple[bytes, ...] = (),
                 queue_size: int = DEFAULT_HWM):
        self._prefixes = tuple(prefixes)
        self._queue: queue.Queue = queue.Queue(maxsize=queue_size)
        self._streams: dict[str, FrameStream] = {}
        self._lock = threading.Lock()
        self._closed = False
        if address is not None:
            self.connect(address)

    def connect(self, address: str):
        with self._lock:
            if address in self._streams:
                return
            stream = FrameStream(connect(address))
            self._streams[address] = stream
        stream.send_frame(_hello(Pattern.SUBSCRIBER))
        stream.send_frame(encode_frame(core.SUB_UPDATE, {"prefixes": list(self._prefixes)}))
        threading.Thread(target=self._read_loop, args=(address, stream), daemon=True,
                         name=f"sub-read-{address}").start()

    def subscribe(self, *prefixes: bytes):
        """Replace the subscribed prefix set on all connections."""
        with self._lock:
            self._prefixes = tuple(prefixes)
            streams = list(self._streams.values())
        update = encode_frame(core.SUB_UPDATE, {"prefixes": list(prefixes)})
        for stream in streams:
            try:
                stream.send_frame(update)
            except MessagingError:
                pass

    def _read_loop(self, address: str, stream: FrameStream):
        try:
            while not self._closed:
                item = stream.recv_topic_frame()
                if item is None:
                    return
                topic, data = item
                self._queue.put((topic, parse_frame(data)))
        except MessagingError:
            pass
        finally:
            with self._lock:
                self._streams.pop(address, None)

    def recv(self, timeout: float | None = None) -> tuple[bytes, RawFrame]:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            raise Timeout("no publication within timeout") from None

    def close(self):
        self._closed = True
        with self._lock:
            streams = list(self._streams.values())
            self._streams.clear()
        for s in streams:
            s.close()


class _PullerPeer:
    __slots__ = ("stream", "outstanding")

    def __init__(self, stream: FrameStream):
        self.stream = stream
        self.outstanding: dict[int, bytes] = {}  # cid -> sent, not yet acked


class Pusher:
    """Binding half of push-pull. Frames go round-robin over connected
    pullers. The puller acks each frame as it consumes it; frames still
    unacked when a puller dies are rerouted to the survivors, so a puller
    dying mid-stream loses nothing already pushed."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self._sock = bind(host, port)
        self.address = sock_address(self._sock)
        self._peers: list[_PullerPeer] = []
        self._cond = threading.Condition()
        self._rr = 0
        self._cid = itertools.count(1)
        self._closed = False
        threading.Thread(target=self._accept_loop, daemon=True,
                         name=f"push-accept-{self.address}").start()

    def _accept_loop(self):
        while not self._closed:
            try:
                sock, _ = self._sock.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            stream = FrameStream(sock)
            if not _read_hello(stream, Pattern.PULLER):
                stream.close()
                continue
            peer = _PullerPeer(stream)
            with self._cond:
                self._peers.append(peer)
                self._cond.notify_all()
            threading.Thread(target=self._ack_loop, args=(peer,), daemon=True,
                             name=f"push-acks-{self.address}").start()

    def _ack_loop(self, peer: _PullerPeer):
        try:
            while True:
                data = peer.stream.recv_frame()
                if data is None:
                    break
                ack = parse_frame(data)
                if ack.msg_type == core.PUSH_ACK.msg_type:
                    with self._cond:
                        peer.outstanding.pop(ack.correlation_id, None)
        except MessagingError:
            pass
        self._drop_and_reroute(peer)

    def _drop_and_reroute(self, peer: _PullerPeer):
        with self._cond:
            if peer not in self._peers:
                return
            idx = self._peers.index(peer)
            self._peers.remove(peer)
            if idx < self._rr:
                self._rr -= 1
            self._rr = self._rr % len(self._peers) if self._peers else 0
            orphans = list(peer.outstanding.items())
            peer.outstanding.clear()
        peer.stream.close()
        for cid, data in orphans:
            if self._closed:
                return
            self._route(data, cid, timeout=None)

    def push(self, data: bytes, timeout: float | None = None):
        """Hand the frame to exactly one puller; blocks only while no
        puller is connected (NoPeers after the timeout)."""
        cid = next(self._cid)
        self._route(_with_cid(data, cid), cid, timeout)

    def _route(self, data: bytes, cid: int, timeout: float | None):
        while not self._closed:
            with self._cond:
                if not self._peers:
                    if not self._cond.wait_for(lambda: bool(self._peers) or self._closed,
                                               timeout=timeout):
                        raise NoPeers("no puller connected within timeout")
                if self._closed:
                    break
                peer = self._peers[self._rr % len(self._peers)]
                self._rr = (self._rr + 1) % len(self._peers)
                peer.outstanding[cid] = data
            try:
                peer.stream.send_frame(data)
                return
            except MessagingError:
                with self._cond:
                    peer.outstanding.pop(cid, None)
                self._drop_and_reroute(peer)
        raise ConnectionLost("pusher closed")

    @property
    def peer_count(self) -> int:
        with self._cond:
            return len(self._peers)

    def wait_for_peers(self, n: int, timeout: float = 5.0) -> bool:
        with self._cond:
            return self._cond.wait_for(lambda: len(self._peers) >= n, timeout=timeout)

    def close(self):
        self._closed = True
        self._sock.close()
        with self._cond:
            peers = list(self._peers)
            self._peers.clear()
            self._cond.notify_all()
        for p in peers:
            p.stream.close()


class Puller:
    """Connecting half of push-pull."""

    def __init__(self, address: str):
        self._stream = FrameStream(connect(address))
        self._stream.send_frame(_hello(Pattern.PULLER))

    def pull(self, timeout: float | None = None) -> RawFrame:
        data = self._stream.recv_frame(timeout=timeout)
        if data is None:
            raise ConnectionLost("pusher closed")
        raw = parse_frame(data)
        self._stream.send_frame(
            encode_frame(core.PUSH_ACK, {}, raw.correlation_id, FLAG_REPLY))
        return raw

    def close(self):
        self._stream.close()
