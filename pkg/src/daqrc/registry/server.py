"""In-memory coordination service.

A single tree of nodes with leases, one-shot watches, and a global
mutation counter (zxid). All mutations run under one lock, which is what
makes the history linearizable; watch events are published while that
lock is held, so every client observes events in zxid order. State lives
only in memory: a restart is a fresh epoch and clients re-register
through their reconnection callbacks.
"""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

from ..messaging import core
from ..messaging.frame import RawFrame, decode_payload
from ..messaging.patterns import ErrorReply, Publisher, Replier, reply_frame
from . import protocol as p

MAX_DATA = 64 * 1024
DEFAULT_TTL_MS = 3000
SWEEP_INTERVAL_S = 0.05


class _Node:
    __slots__ = ("data", "ephemeral", "lease_id", "czxid", "mzxid", "children", "seq_counter")

    def __init__(self, data: bytes, ephemeral: bool, lease_id: int, zxid: int):
        self.data = data
        self.ephemeral = ephemeral
        self.lease_id = lease_id
        self.czxid = zxid
        self.mzxid = zxid
        self.children: dict[str, _Node] = {}
        self.seq_counter = 0


@dataclass
class _Lease:
    lease_id: int
    ttl_ms: int
    last_beat: float
    ephemerals: set[str] = field(default_factory=set)


def split_path(path: str) -> list[str]:
    if not path.startswith("/"):
        raise ErrorReply(p.ErrorCode.BAD_REQUEST, f"path must be absolute: {path!r}")
    parts = [part for part in path.split("/") if part]
    if path != "/" + "/".join(parts):
        raise ErrorReply(p.ErrorCode.BAD_REQUEST, f"malformed path: {path!r}")
    return parts


class RegistryServer:
    def __init__(self, host: str = "127.0.0.1", port: int = 0, events_port: int = 0):
        self._lock = threading.RLock()
        self._root = _Node(b"", ephemeral=False, lease_id=0, zxid=0)
        self._zxid = 0
        self._leases: dict[int, _Lease] = {}
        self._next_lease = 1
        # (kind, path) -> lease ids with a one-shot watch armed
        self._watches: dict[tuple[str, str], set[int]] = {}
        self._events = Publisher(host, events_port)
        self._replier = Replier(self._handle, host, port)
        self.address = self._replier.address
        self.events_address = self._events.address
        self._closed = False
        self._sweeper = threading.Thread(target=self._sweep_loop, daemon=True,
                                         name="registry-sweeper")
        self._sweeper.start()

    # ------------------------------------------------------------------ tree

    def _find(self, parts: list[str]) -> _Node | None:
        node = self._root
        for part in parts:
            node = node.children.get(part)
            if node is None:
                return None
        return node

    def _next_zxid(self) -> int:
        self._zxid += 1
        return self._zxid

    def _fire(self, kind: str, path: str, event: p.EventType, zxid: int):
        watchers = self._watches.pop((kind, path), None)
        if not watchers:
            return
        frame = reply_frame(p.WATCH_EVENT, {"path": path, "event": int(event), "zxid": zxid})
        for lease_id in watchers:
            self._events.publish(p.watch_topic(lease_id), frame)

    def _fire_created(self, path: str, parent_path: str, zxid: int):
        self._fire("data", path, p.EventType.CREATED, zxid)
        self._fire("children", parent_path, p.EventType.CHILDREN_CHANGED, zxid)

    def _live_lease(self, lease_id: int) -> _Lease:
        lease = self._leases.get(lease_id)
        if lease is None:
            raise ErrorReply(p.ErrorCode.LEASE_EXPIRED, f"lease {lease_id} unknown or expired")
        return lease

    def _create_one(self, parent: _Node, parent_path: str, name: str, data: bytes,
                    ephemeral: bool, lease_id: int) -> tuple[str, int]:
        if parent.ephemeral:
            raise ErrorReply(p.ErrorCode.BAD_REQUEST, "ephemeral nodes cannot have children")
        zxid = self._next_zxid()
        node = _Node(data, ephemeral, lease_id, zxid)
        parent.children[name] = node
        path = (parent_path if parent_path != "/" else "") + "/" + name
        if ephemeral:
            self._leases[lease_id].ephemerals.add(path)
        self._fire_created(path, parent_path or "/", zxid)
        return path, zxid

    def create(self, path: str, data: bytes = b"", ephemeral: bool = False,
               sequential: bool = False, recursive: bool = False,
               lease_id: int = 0) -> tuple[str, int]:
        if len(data) > MAX_DATA:
            raise ErrorReply(p.ErrorCode.BAD_REQUEST, f"data exceeds {MAX_DATA} bytes")
        parts = split_path(path)
        if not parts:
            raise ErrorReply(p.ErrorCode.ALREADY_EXISTS, "/")
        with self._lock:
            if ephemeral:
                self._live_lease(lease_id)
            node = self._root
            walked = ""
            for part in parts[:-1]:
                child = node.children.get(part)
                if child is None:
                    if not recursive:
                        raise ErrorReply(p.ErrorCode.NO_PARENT,
                                         f"missing parent {walked + '/' + part!r}")
                    _, _ = self._create_one(node, walked or "/", part, b"",
                                            ephemeral=False, lease_id=0)
                    child = node.children[part]
                node = child
                walked += "/" + part
            name = parts[-1]
            if sequential:
                suffix = node.seq_counter
                node.seq_counter += 1
                name = f"{name}{suffix:010d}"
            if name in node.children:
                raise ErrorReply(p.ErrorCode.ALREADY_EXISTS, walked + "/" + name)
            return self._create_one(node, walked or "/", name, data, ephemeral, lease_id)

    def get(self, path: str, watch: bool = False, lease_id: int = 0) -> tuple[bytes, int, int]:
        parts = split_path(path)
        with self._lock:
            node = self._find(parts)
            if node is None:
                raise ErrorReply(p.ErrorCode.NOT_FOUND, path)
            if watch:
                self._live_lease(lease_id)
                self._watches.setdefault(("data", path), set()).add(lease_id)
            return node.data, node.mzxid, node.czxid

    def exists(self, path: str, watch: bool = False, lease_id: int = 0) -> tuple[bool, bytes, int]:
        parts = split_path(path)
        with self._lock:
            node = self._find(parts)
            if watch:
                self._live_lease(lease_id)
                self._watches.setdefault(("data", path), set()).add(lease_id)
            if node is None:
                return False, b"", 0
            return True, node.data, node.mzxid

    def set(self, path: str, data: bytes) -> int:
        if len(data) > MAX_DATA:
            raise ErrorReply(p.ErrorCode.BAD_REQUEST, f"data exceeds {MAX_DATA} bytes")
        parts = split_path(path)
        with self._lock:
            node = self._find(parts)
            if node is None:
                raise ErrorReply(p.ErrorCode.NOT_FOUND, path)
            zxid = self._next_zxid()
            node.data = data
            node.mzxid = zxid
            self._fire("data", path, p.EventType.DATA_CHANGED, zxid)
            return zxid

    def delete(self, path: str) -> int:
        parts = split_path(path)
        if not parts:
            raise ErrorReply(p.ErrorCode.BAD_REQUEST, "cannot delete /")
        with self._lock:
            parent = self._find(parts[:-1])
            node = parent.children.get(parts[-1]) if parent else None
            if node is None:
                raise ErrorReply(p.ErrorCode.NOT_FOUND, path)
            if node.children:
                raise ErrorReply(p.ErrorCode.NOT_EMPTY, path)
            return self._delete_locked(parent, parts, node)

    def _delete_locked(self, parent: _Node, parts: list[str], node: _Node) -> int:
        path = "/" + "/".join(parts)
        zxid = self._next_zxid()
        del parent.children[parts[-1]]
        if node.ephemeral:
            lease = self._leases.get(node.lease_id)
            if lease:
                lease.ephemerals.discard(path)
        parent_path = "/" + "/".join(parts[:-1]) if len(parts) > 1 else "/"
        self._fire("data", path, p.EventType.DELETED, zxid)
        self._fire("children", path, p.EventType.DELETED, zxid)
        self._fire("children", parent_path, p.EventType.CHILDREN_CHANGED, zxid)
        return zxid

    def children(self, path: str, watch: bool = False, lease_id: int = 0) -> tuple[list[str], int]:
        parts = split_path(path)
        with self._lock:
            node = self._find(parts)
            if node is None:
                raise ErrorReply(p.ErrorCode.NOT_FOUND, path)
            if watch:
                self._live_lease(lease_id)
                self._watches.setdefault(("children", path), set()).add(lease_id)
            return sorted(node.children), self._zxid

    # ---------------------------------------------------------------- leases

    def grant_lease(self, ttl_ms: int, resume_lease_id: int = 0) -> tuple[int, bool]:
        ttl_ms = ttl_ms or DEFAULT_TTL_MS
        with self._lock:
            if resume_lease_id and resume_lease_id in self._leases:
                lease = self._leases[resume_lease_id]
                lease.last_beat = time.monotonic()
                return lease.lease_id, True
            lease_id = self._next_lease
            self._next_lease += 1
            self._leases[lease_id] = _Lease(lease_id, ttl_ms, time.monotonic())
            return lease_id, False

    def heartbeat(self, lease_id: int):
        with self._lock:
            self._live_lease(lease_id).last_beat = time.monotonic()

    def release(self, lease_id: int):
        with self._lock:
            lease = self._leases.get(lease_id)
            if lease is not None:
                self._expire_locked(lease)

    def _expire_locked(self, lease: _Lease):
        for path in sorted(lease.ephemerals, reverse=True):
            parts = split_path(path)
            parent = self._find(parts[:-1])
            node = parent.children.get(parts[-1]) if parent else None
            if node is not None:
                self._delete_locked(parent, parts, node)
        lease.ephemerals.clear()
        self._leases.pop(lease.lease_id, None)
        for key in [k for k, v in self._watches.items() if lease.lease_id in v]:
            self._watches[key].discard(lease.lease_id)
            if not self._watches[key]:
                del self._watches[key]

    def _sweep_loop(self):
        while not self._closed:
            time.sleep(SWEEP_INTERVAL_S)
            now = time.monotonic()
            with self._lock:
                expired = [lease for lease in self._leases.values()
                           if (now - lease.last_beat) * 1000 > lease.ttl_ms]
                for lease in expired:
                    self._expire_locked(lease)

    # ------------------------------------------------------------- transport

    def _handle(self, raw: RawFrame) -> bytes:
        t = raw.msg_type
        if t == p.CREATE_REQ.msg_type:
            v = decode_payload(p.CREATE_REQ, raw.payload)
            path, zxid = self.create(
                v["path"], v.get("data", b""), bool(v.get("ephemeral")),
                bool(v.get("sequential")), bool(v.get("recursive")), v.get("lease_id", 0))
            return reply_frame(p.CREATE_REP, {"path": path, "zxid": zxid})
        if t == p.GET_REQ.msg_type:
            v = decode_payload(p.GET_REQ, raw.payload)
            data, mzxid, czxid = self.get(v["path"], bool(v.get("watch")), v.get("lease_id", 0))
            return reply_frame(p.GET_REP, {"data": data, "mzxid": mzxid, "czxid": czxid})
        if t == p.EXISTS_REQ.msg_type:
            v = decode_payload(p.EXISTS_REQ, raw.payload)
            found, data, mzxid = self.exists(v["path"], bool(v.get("watch")), v.get("lease_id", 0))
            return reply_frame(p.EXISTS_REP, {"exists": int(found), "data": data, "mzxid": mzxid})
        if t == p.SET_REQ.msg_type:
            v = decode_payload(p.SET_REQ, raw.payload)
            return reply_frame(p.SET_REP, {"zxid": self.set(v["path"], v.get("data", b""))})
        if t == p.DELETE_REQ.msg_type:
            v = decode_payload(p.DELETE_REQ, raw.payload)
            return reply_frame(p.DELETE_REP, {"zxid": self.delete(v["path"])})
        if t == p.CHILDREN_REQ.msg_type:
            v = decode_payload(p.CHILDREN_REQ, raw.payload)
            names, zxid = self.children(v["path"], bool(v.get("watch")), v.get("lease_id", 0))
            return reply_frame(p.CHILDREN_REP, {"names": names, "zxid": zxid})
        if t == p.LEASE_REQ.msg_type:
            v = decode_payload(p.LEASE_REQ, raw.payload)
            lease_id, resumed = self.grant_lease(v.get("ttl_ms", 0), v.get("resume_lease_id", 0))
            ttl = self._leases[lease_id].ttl_ms if lease_id in self._leases else 0
            return reply_frame(p.LEASE_REP, {
                "lease_id": lease_id, "resumed": int(resumed),
                "events_address": self.events_address, "ttl_ms": ttl})
        if t == p.HEARTBEAT_REQ.msg_type:
            v = decode_payload(p.HEARTBEAT_REQ, raw.payload)
            self.heartbeat(v["lease_id"])
            return reply_frame(p.HEARTBEAT_REP, {})
        if t == p.RELEASE_REQ.msg_type:
            v = decode_payload(p.RELEASE_REQ, raw.payload)
            self.release(v["lease_id"])
            return reply_frame(p.RELEASE_REP, {})
        if t == core.PING.msg_type:
            return reply_frame(core.PONG, {})
        raise ErrorReply(p.ErrorCode.BAD_REQUEST, f"unexpected msg_type 0x{t:04X}")

    def dump_tree(self) -> dict[str, bytes]:
        """Snapshot of all paths to data, for tests and the CLI."""
        out: dict[str, bytes] = {}

        def walk(node: _Node, path: str):
            for name, child in sorted(node.children.items()):
                child_path = (path if path != "/" else "") + "/" + name
                out[child_path] = child.data
                walk(child, child_path)

        with self._lock:
            walk(self._root, "/")
        return out

    def close(self):
        self._closed = True
        self._replier.close()
        self._events.close()
