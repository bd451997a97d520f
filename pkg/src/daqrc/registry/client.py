"""Registry session: lease keeping, watches, reconnection.

One background keeper thread heartbeats the lease and, after a connection
loss, retries with exponential backoff. A blip shorter than the lease ttl
resumes the same session (ephemerals intact, armed watches re-armed and
missed changes synthesized); a longer outage yields a fresh lease and the
registered re-establishment callbacks run so the owner can re-register,
re-elect, and re-watch.
"""
from __future__ import annotations

import queue
import random
import threading
import time
from dataclasses import dataclass

from ..messaging.frame import encode_frame, decode_payload
from ..messaging.patterns import RequestFailed, Requester, Subscriber
from ..messaging.transport import ConnectionLost, MessagingError, Timeout
from . import protocol as p
from .protocol import EventType


class RegistryError(Exception):
    pass


class NodeNotFound(RegistryError):
    pass


class AlreadyExists(RegistryError):
    pass


class NoParent(RegistryError):
    pass


class NotEmpty(RegistryError):
    pass


class LeaseExpired(RegistryError):
    pass


class BadRequest(RegistryError):
    pass


class GaveUp(RegistryError):
    pass


class NoMaster(RegistryError):
    pass


_CODE_MAP = {
    p.ErrorCode.NOT_FOUND: NodeNotFound,
    p.ErrorCode.ALREADY_EXISTS: AlreadyExists,
    p.ErrorCode.NO_PARENT: NoParent,
    p.ErrorCode.NOT_EMPTY: NotEmpty,
    p.ErrorCode.LEASE_EXPIRED: LeaseExpired,
    p.ErrorCode.BAD_REQUEST: BadRequest,
}


def _map_error(e: RequestFailed) -> RegistryError:
    exc = _CODE_MAP.get(e.code, RegistryError)
    return exc(e.text)


@dataclass(frozen=True)
class WatchEvent:
    path: str
    event: EventType
    zxid: int


def backoff_delays(base_ms: int = 100, cap_ms: int = 5000, jitter: float = 0.2,
                   rng: random.Random | None = None):
    """Exponential backoff delays in seconds: base, 2x, 4x ... capped,
    with multiplicative jitter of +-jitter."""
    delay = base_ms
    while True:
        value = min(delay, cap_ms)
        if jitter and rng is not None:
            value *= 1 + rng.uniform(-jitter, jitter)
        elif jitter:
            value *= 1 + random.uniform(-jitter, jitter)
        yield value / 1000.0
        delay = min(delay * 2, cap_ms)


class _Armed:
    __slots__ = ("callbacks", "snapshot")

    def __init__(self):
        self.callbacks: list = []
        self.snapshot = None  # data watch: (exists, mzxid); children: tuple of names


class RegistryClient:
    def __init__(self, address: str, ttl_ms: int = 3000, request_timeout: float = 5.0,
                 reconnect_base_ms: int = 100, reconnect_cap_ms: int = 5000,
                 reconnect_jitter: float = 0.2, max_elapsed_s: float | None = None):
        self.address = address
        self.ttl_ms = ttl_ms
        self.request_timeout = request_timeout
        self._backoff_params = (reconnect_base_ms, reconnect_cap_ms, reconnect_jitter)
        self._max_elapsed_s = max_elapsed_s

        self.lease_id = 0
        self._requester: Requester | None = None
        self._subscriber: Subscriber | None = None
        self._events_address = ""
        self._session_gen = 0

        self._lock = threading.RLock()
        self._connected = threading.Event()
        self._closed = False
        self._armed: dict[tuple[str, str], _Armed] = {}
        self.events: queue.Queue[WatchEvent] = queue.Queue()
        self.last_event_zxid = 0

        self._reestablish_cbs: list = []
        self._session_lost_cbs: list = []
        self._session_lost_fired = False
        self._last_beat_ok = time.monotonic()
        self._keeper: threading.Thread | None = None

    # -------------------------------------------------------------- session

    def connect(self) -> "RegistryClient":
        self._establish(resume=False)
        self._keeper = threading.Thread(target=self._keeper_loop, daemon=True,
                                        name=f"registry-keeper-{self.address}")
        self._keeper.start()
        return self

    def _establish(self, resume: bool):
        """Build requester + lease + event subscription. Raises on failure."""
        requester = Requester(self.address, timeout=self.request_timeout)
        try:
            reply = requester.request(encode_frame(p.LEASE_REQ, {
                "ttl_ms": self.ttl_ms,
                "resume_lease_id": self.lease_id if resume else 0,
            }))
        except MessagingError:
            requester.close()
            raise
        values = decode_payload(p.LEASE_REP, reply.payload)
        lease_id = values["lease_id"]
        resumed = bool(values.get("resumed"))
        events_address = values["events_address"]

        subscriber = Subscriber(events_address, prefixes=(p.watch_topic(lease_id),))
        with self._lock:
            old_requester, old_subscriber = self._requester, self._subscriber
            self._requester, self._subscriber = requester, subscriber
            self.lease_id = lease_id
            self._events_address = events_address
            self._session_gen += 1
            gen = self._session_gen
            self._last_beat_ok = time.monotonic()
            self._session_lost_fired = False
        for old in (old_requester, old_subscriber):
            if old is not None:
                old.close()
        threading.Thread(target=self._event_loop, args=(subscriber, gen), daemon=True,
                         name=f"registry-events-{self.address}").start()

        if resumed:
            self._connected.set()
            self._rearm_watches()
        else:
            with self._lock:
                stale = list(self._armed)
                self._armed.clear()
            self._connected.set()
            if resume or stale:
                # fresh lease after an outage: owners must rebuild their state
                for cb in list(self._reestablish_cbs):
                    self._safe_cb(cb)

    def _safe_cb(self, cb, *args):
        try:
            cb(*args)
        except Exception:
            pass

    def on_reestablish(self, cb):
        """cb() runs after a NEW session replaces an expired one."""
        self._reestablish_cbs.append(cb)

    def on_session_lost(self, cb):
        """cb() runs as soon as the lease must be presumed expired."""
        self._session_lost_cbs.append(cb)

    def _fire_session_lost(self):
        with self._lock:
            if self._session_lost_fired:
                return
            self._session_lost_fired = True
        for cb in list(self._session_lost_cbs):
            self._safe_cb(cb)

    def _keeper_loop(self):
        interval = self.ttl_ms / 3000.0
        backoff = None
        next_attempt = 0.0
        lost_at = None
        while not self._closed:
            time.sleep(min(interval, 0.1))
            if self._closed:
                return
            now = time.monotonic()
            if self._connected.is_set():
                backoff = None
                lost_at = None
                if now - self._last_beat_ok < interval:
                    continue
                try:
                    self._requester.request(encode_frame(p.HEARTBEAT_REQ,
                                                         {"lease_id": self.lease_id}))
                    self._last_beat_ok = time.monotonic()
                except RequestFailed as e:
                    if e.code == p.ErrorCode.LEASE_EXPIRED:
                        self._fire_session_lost()
                        try:
                            self._establish(resume=True)  # server says not resumable
                        except MessagingError:
                            self._connected.clear()
                except MessagingError:
                    self._connected.clear()
            else:
                if backoff is None:
                    base, cap, jitter = self._backoff_params
                    backoff = backoff_delays(base, cap, jitter)
                    next_attempt = now
                    lost_at = lost_at or now
                if self._max_elapsed_s is not None and now - lost_at > self._max_elapsed_s:
                    self._fire_session_lost()
                    self._closed = True
                    return
                if (time.monotonic() - self._last_beat_ok) * 1000 > self.ttl_ms:
                    self._fire_session_lost()
                if now < next_attempt:
                    continue
                try:
                    self._establish(resume=True)
                except MessagingError:
                    next_attempt = time.monotonic() + next(backoff)

    def _event_loop(self, subscriber: Subscriber, gen: int):
        while not self._closed and self._session_gen == gen:
            try:
                _, raw = subscriber.recv(timeout=0.5)
            except Timeout:
                continue
            except MessagingError:
                return
            if raw.msg_type != p.WATCH_EVENT.msg_type:
                continue
            values = decode_payload(p.WATCH_EVENT, raw.payload)
            self._dispatch(WatchEvent(values["path"], EventType(values["event"]),
                                      values["zxid"]))

    def _dispatch(self, event: WatchEvent):
        self.last_event_zxid = max(self.last_event_zxid, event.zxid)
        kinds = {
            EventType.CREATED: ("data",),
            EventType.DATA_CHANGED: ("data",),
            EventType.DELETED: ("data", "children"),
            EventType.CHILDREN_CHANGED: ("children",),
        }[event.event]
        callbacks = []
        with self._lock:
            for kind in kinds:
                armed = self._armed.pop((kind, event.path), None)
                if armed:
                    callbacks.extend(armed.callbacks)
        self.events.put(event)
        for cb in callbacks:
            self._safe_cb(cb, event)

    def _rearm_watches(self):
        """After a resumed session: re-register server-side watches and
        synthesize events for changes missed during the outage."""
        with self._lock:
            entries = list(self._armed.items())
        for (kind, path), armed in entries:
            if armed.snapshot is None:
                continue  # arming request never completed; owner will retry
            try:
                if kind == "data":
                    exists, _, mzxid = self._exists_op(path, watch=True)
                    prev_exists, prev_mzxid = armed.snapshot
                    if prev_exists and not exists:
                        self._dispatch(WatchEvent(path, EventType.DELETED, mzxid))
                    elif not prev_exists and exists:
                        self._dispatch(WatchEvent(path, EventType.CREATED, mzxid))
                    elif exists and mzxid > prev_mzxid:
                        self._dispatch(WatchEvent(path, EventType.DATA_CHANGED, mzxid))
                else:
                    try:
                        names, zxid = self._children_op(path, watch=True)
                        if tuple(names) != armed.snapshot:
                            self._dispatch(WatchEvent(path, EventType.CHILDREN_CHANGED, zxid))
                    except NodeNotFound:
                        self._dispatch(WatchEvent(path, EventType.DELETED, 0))
            except MessagingError:
                return

    # ------------------------------------------------------------------- ops

    def _call(self, schema, values: dict, deadline_s: float | None = None):
        deadline = time.monotonic() + (deadline_s if deadline_s is not None else
                                       self.request_timeout * 3)
        while True:
            if self._closed:
                raise GaveUp("client closed")
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ConnectionLost("registry unreachable within deadline")
            if not self._connected.wait(timeout=min(remaining, 0.5)):
                continue
            requester = self._requester
            try:
                reply = requester.request(encode_frame(schema, values),
                                          timeout=min(remaining, self.request_timeout))
                return decode_payload(p.CATALOG_REPLY[schema.msg_type], reply.payload)
            except RequestFailed as e:
                raise _map_error(e) from None
            except (ConnectionLost, Timeout):
                self._connected.clear()

    def _arm_before(self, kind: str, path: str, callback) -> _Armed:
        """Register the local callback BEFORE the watch-setting request goes
        out: the event travels on a different connection than the reply and
        may arrive first."""
        with self._lock:
            armed = self._armed.setdefault((kind, path), _Armed())
            if callback is not None:
                armed.callbacks.append(callback)
            return armed

    def _arm_snapshot(self, kind: str, path: str, armed: _Armed, snapshot):
        with self._lock:
            # the event may already have consumed this registration; a stale
            # snapshot must not resurrect it
            if self._armed.get((kind, path)) is armed:
                armed.snapshot = snapshot

    def _disarm(self, kind: str, path: str, callback):
        with self._lock:
            armed = self._armed.get((kind, path))
            if armed is None:
                return
            if callback in armed.callbacks:
                armed.callbacks.remove(callback)
            if not armed.callbacks and armed.snapshot is None:
                del self._armed[(kind, path)]

    def create(self, path: str, data: bytes = b"", ephemeral: bool = False,
               sequential: bool = False, recursive: bool = False) -> str:
        values = {"path": path, "data": data, "ephemeral": int(ephemeral),
                  "sequential": int(sequential), "recursive": int(recursive)}
        if ephemeral:
            values["lease_id"] = self.lease_id
        return self._call(p.CREATE_REQ, values)["path"]

    def get(self, path: str, watch=None) -> bytes:
        callback = watch if callable(watch) else None
        armed = self._arm_before("data", path, callback) if watch is not None else None
        values = {"path": path, "watch": int(watch is not None), "lease_id": self.lease_id}
        try:
            reply = self._call(p.GET_REQ, values)
        except Exception:
            if watch is not None:
                self._disarm("data", path, callback)
            raise
        if watch is not None:
            self._arm_snapshot("data", path, armed, (True, reply.get("mzxid", 0)))
        return reply.get("data", b"")

    def _exists_op(self, path: str, watch: bool):
        values = {"path": path, "watch": int(watch), "lease_id": self.lease_id}
        reply = self._call(p.EXISTS_REQ, values)
        return bool(reply["exists"]), reply.get("data", b""), reply.get("mzxid", 0)

    def exists(self, path: str, watch=None) -> tuple[bool, bytes]:
        callback = watch if callable(watch) else None
        armed = self._arm_before("data", path, callback) if watch is not None else None
        try:
            found, data, mzxid = self._exists_op(path, watch is not None)
        except Exception:
            if watch is not None:
                self._disarm("data", path, callback)
            raise
        if watch is not None:
            self._arm_snapshot("data", path, armed, (found, mzxid))
        return found, data

    def set(self, path: str, data: bytes) -> int:
        return self._call(p.SET_REQ, {"path": path, "data": data})["zxid"]

    def delete(self, path: str) -> int:
        return self._call(p.DELETE_REQ, {"path": path})["zxid"]

    def _children_op(self, path: str, watch: bool):
        values = {"path": path, "watch": int(watch), "lease_id": self.lease_id}
        reply = self._call(p.CHILDREN_REQ, values)
        return reply.get("names", []), reply.get("zxid", 0)

    def children(self, path: str, watch=None) -> list[str]:
        callback = watch if callable(watch) else None
        armed = self._arm_before("children", path, callback) if watch is not None else None
        try:
            names, zxid = self._children_op(path, watch is not None)
        except Exception:
            if watch is not None:
                self._disarm("children", path, callback)
            raise
        if watch is not None:
            self._arm_snapshot("children", path, armed, tuple(names))
        return names

    def ensure_path(self, path: str):
        try:
            self.create(path, recursive=True)
        except AlreadyExists:
            pass

    def close(self):
        if self._closed:
            return
        self._closed = True
        try:
            if self._connected.is_set() and self._requester is not None:
                self._requester.request(
                    encode_frame(p.RELEASE_REQ, {"lease_id": self.lease_id}), timeout=1.0)
        except MessagingError:
            pass
        with self._lock:
            requester, subscriber = self._requester, self._subscriber
        for conn in (requester, subscriber):
            if conn is not None:
                conn.close()

    def kill(self):
        """Sever connections without releasing the lease (crash simulation:
        the server only learns of the death when the lease expires)."""
        self._closed = True
        with self._lock:
            requester, subscriber = self._requester, self._subscriber
        for conn in (requester, subscriber):
            if conn is not None:
                conn.close()

    @property
    def connected(self) -> bool:
        return self._connected.is_set()
