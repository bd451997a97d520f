"""Information-service server.

Last-writer-wins upserts with a per-key monotonic seq, exact and prefix
queries, and change notifications on "is.<dest>.<key>" topics. The
connection loop drains every complete frame already buffered before
answering with one write, so pipelined clients batch syscalls on both
sides. Optionally writes an append-only snapshot (encoded set frames,
bit-exact wire format) on shutdown and can restore one at startup.
"""
from __future__ import annotations

import json
import socket
import threading
import time

from ..messaging import core
from ..messaging.frame import HEADER_LEN, decode_payload, encode_frame, parse_frame
from ..messaging.patterns import Pattern, Publisher, _read_hello, error_frame, reply_frame
from ..messaging.transport import FrameStream, MessagingError, bind, sock_address
from . import protocol as p
from .records import MalformedRecord, RecordKind
from .sharding import shard_for


class InfoServer:
    def __init__(self, host: str = "127.0.0.1", port: int = 0, dest: str = "default",
                 shard_index: int = 0, shard_count: int = 0,
                 snapshot_path: str | None = None, restore_path: str | None = None,
                 events_port: int = 0):
        self.dest = dest
        self.shard_index = shard_index
        self.shard_count = shard_count  # 0: ownership not checked
        self._snapshot_path = snapshot_path
        self._store: dict[str, dict] = {}
        self._lock = threading.Lock()
        self._events = Publisher(host, events_port)
        self.events_address = self._events.address
        self._sock = bind(host, port)
        self.address = sock_address(self._sock)
        self._closed = False
        self._election = None
        if restore_path:
            self._restore(restore_path)
        threading.Thread(target=self._accept_loop, daemon=True,
                         name=f"is-accept-{self.address}").start()

    # ------------------------------------------------------------------ wire

    def _accept_loop(self):
        while not self._closed:
            try:
                sock, _ = self._sock.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            threading.Thread(target=self._serve_conn, args=(FrameStream(sock),),
                             daemon=True, name=f"is-conn-{self.address}").start()

    def _serve_conn(self, stream: FrameStream):
        try:
            if not _read_hello(stream, Pattern.REQUESTER):
                return
            out = []
            while not self._closed:
                data = stream.recv_frame()
                if data is None:
                    return
                out.append(self._handle_one(data))
                # drain whatever arrived in the same read: one reply write
                # per batch is what makes pipelining pay off
                while stream.has_buffered_frame():
                    out.append(self._handle_one(stream.recv_frame()))
                stream.send_frame(b"".join(out))
                out.clear()
        except MessagingError:
            pass
        finally:
            stream.close()

    def _handle_one(self, data: bytes) -> bytes:
        raw = parse_frame(data)
        try:
            if raw.msg_type == p.SET_REQ.msg_type:
                return self._handle_set(raw)
            if raw.msg_type == p.QUERY_REQ.msg_type:
                return self._handle_query(raw)
            if raw.msg_type == p.META_REQ.msg_type:
                return self._with_cid(reply_frame(p.META_REP, {
                    "dest": self.dest, "events_address": self.events_address,
                    "shard_index": self.shard_index, "shard_count": self.shard_count,
                }), raw.correlation_id)
            if raw.msg_type == core.PING.msg_type:
                return self._with_cid(reply_frame(core.PONG, {}), raw.correlation_id)
            return error_frame(raw.correlation_id, 0, f"unexpected msg_type 0x{raw.msg_type:04X}")
        except MalformedRecord as e:
            return error_frame(raw.correlation_id, p.ErrorCode.MALFORMED_RECORD, str(e))
        except Exception as e:
            return error_frame(raw.correlation_id, 0, f"{type(e).__name__}: {e}")

    @staticmethod
    def _with_cid(data: bytes, cid: int) -> bytes:
        import struct
        return data[:8] + struct.pack(">Q", cid) + data[16:]

    def _handle_set(self, raw) -> bytes:
        values = decode_payload(p.SET_REQ, raw.payload)
        key = values["key"]
        if self.shard_count > 1 and shard_for(key, self.shard_count) != self.shard_index:
            return error_frame(raw.correlation_id, p.ErrorCode.WRONG_SHARD,
                               f"{key!r} belongs to shard "
                               f"{shard_for(key, self.shard_count)}")
        self._validate_set(values)
        values.pop("pad", None)
        now_us = int(time.time() * 1e6)
        with self._lock:
            prev = self._store.get(key)
            seq = (prev["seq"] + 1) if prev else 1
            values["seq"] = seq
            values["updated_at_us"] = now_us
            self._store[key] = values
        if self._events.subscriber_count:
            self._events.publish(p.event_topic(self.dest, key),
                                 encode_frame(p.EVENT, {"record": values}))
        return self._with_cid(
            reply_frame(p.SET_REP, {"seq": seq, "updated_at_us": now_us}),
            raw.correlation_id)

    @staticmethod
    def _validate_set(values: dict):
        kind = values.get("kind")
        if kind == RecordKind.HISTOGRAM:
            edges = values.get("edges", [])
            counts = values.get("counts", [])
            if len(counts) != len(edges) - 1:
                raise MalformedRecord("histogram needs len(counts) == len(edges)-1")
            from .records import bits_float
            decoded = [bits_float(e) for e in edges]
            if any(b <= a for a, b in zip(decoded, decoded[1:])):
                raise MalformedRecord("histogram edges must be strictly ascending")
        elif kind not in (RecordKind.COUNTER, RecordKind.GAUGE, RecordKind.STATUS,
                          RecordKind.ERROR):
            raise MalformedRecord(f"unknown kind {kind}")

    def _handle_query(self, raw) -> bytes:
        values = decode_payload(p.QUERY_REQ, raw.payload)
        key = values["key"]
        with self._lock:
            if values.get("prefix"):
                records = [dict(v) for k, v in self._store.items() if k.startswith(key)]
            else:
                hit = self._store.get(key)
                records = [dict(hit)] if hit else []
        records.sort(key=lambda r: r["key"])
        return self._with_cid(reply_frame(p.QUERY_REP, {"records": records}),
                              raw.correlation_id)

    # ------------------------------------------------------------- lifecycle

    def elect(self, registry_client, on_role=None):
        """Join the per-shard master election and publish our addresses."""
        from ..registry.election import Election
        data = json.dumps({"addr": self.address, "events": self.events_address}).encode()
        self._election = Election(registry_client, f"is.{self.dest}.{self.shard_index}",
                                  data, on_role=on_role)
        return self._election.start()

    def record_count(self) -> int:
        with self._lock:
            return len(self._store)

    def _restore(self, path: str):
        with open(path, "rb") as f:
            blob = f.read()
        pos = 0
        while pos < len(blob):
            raw = parse_frame(blob[pos:pos + HEADER_LEN +
                                   int.from_bytes(blob[pos + 16:pos + 20], "big")])
            values = decode_payload(p.SET_REQ, raw.payload)
            self._store[values["key"]] = values
            pos += HEADER_LEN + len(raw.payload)

    def write_snapshot(self, path: str | None = None) -> int:
        path = path or self._snapshot_path
        if not path:
            return 0
        with self._lock:
            items = [dict(v) for v in self._store.values()]
        with open(path, "wb") as f:
            for values in items:
                f.write(encode_frame(p.SET_REQ, values))
        return len(items)

    def close(self):
        if self._snapshot_path:
            self.write_snapshot()
        self._closed = True
        if self._election is not None:
            self._election.resign()
        self._sock.close()
        self._events.close()
