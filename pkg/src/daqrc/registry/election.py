"""Master/slave election and service discovery.

Each candidate creates an ephemeral sequential node under
/services/<name>/candidates; the lowest suffix is the master and writes
its serving address to /services/<name>/master. Every other candidate
watches only its immediate predecessor, so a death wakes exactly the
next in line and nobody else. Role changes stream to the owner; losing
the lease demotes immediately, and a fresh session re-enters the
election automatically.
"""
from __future__ import annotations

import enum
import queue
import threading
import time
from dataclasses import dataclass

from .client import AlreadyExists, NodeNotFound, NoMaster, RegistryClient, RegistryError
from ..messaging.transport import MessagingError


class Role(enum.Enum):
    MASTER = "MASTER"
    SLAVE = "SLAVE"


@dataclass(frozen=True)
class RoleChange:
    role: Role
    watching: str | None = None  # predecessor path while SLAVE
    at: float = 0.0


def service_base(service_name: str) -> str:
    return f"/services/{service_name}"


def master_path(service_name: str) -> str:
    return service_base(service_name) + "/master"


class Election:
    def __init__(self, client: RegistryClient, service_name: str, candidate_data: bytes,
                 on_role=None):
        self._client = client
        self._name = service_name
        self._data = candidate_data
        self._on_role = on_role
        self.roles: queue.Queue[RoleChange] = queue.Queue()
        self.role: Role | None = None
        self._my_path: str | None = None
        self._lock = threading.RLock()
        self._stopped = False
        client.on_session_lost(self._demote)
        client.on_reestablish(self._re_enter)

    # ----------------------------------------------------------------- state

    def _emit(self, role: Role, watching: str | None = None):
        with self._lock:
            if self._stopped or role is self.role:
                return
            self.role = role
        change = RoleChange(role, watching, time.monotonic())
        self.roles.put(change)
        if self._on_role is not None:
            try:
                self._on_role(change)
            except Exception:
                pass

    def start(self):
        base = service_base(self._name)
        self._client.ensure_path(base + "/candidates")
        self._my_path = self._client.create(base + "/candidates/c-", data=self._data,
                                            ephemeral=True, sequential=True)
        self._evaluate()
        return self

    def _re_enter(self):
        if self._stopped:
            return
        with self._lock:
            self.role = None
            self._my_path = None
        try:
            self.start()
        except (RegistryError, MessagingError):
            pass  # keeper retries connectivity; owner sees no role until then

    def _demote(self):
        self._emit(Role.SLAVE, watching=None)

    def _evaluate(self):
        if self._stopped:
            return
        base = service_base(self._name)
        try:
            names = sorted(self._client.children(base + "/candidates"))
            mine = self._my_path.rsplit("/", 1)[1] if self._my_path else None
            if mine not in names:
                return  # candidate vanished with an old session; re-entry handles it
            idx = names.index(mine)
            if idx == 0:
                self._become_master()
                return
            predecessor = f"{base}/candidates/{names[idx - 1]}"
            found, _ = self._client.exists(predecessor, watch=self._on_predecessor_event)
            if not found:
                self._evaluate()  # predecessor vanished between list and watch
            else:
                self._emit(Role.SLAVE, watching=predecessor)
        except (RegistryError, MessagingError):
            # transient (reconnect in flight): keep the election alive
            if not self._stopped:
                timer = threading.Timer(0.5, self._evaluate)
                timer.daemon = True
                timer.start()

    def _on_predecessor_event(self, event):
        self._evaluate()

    def _become_master(self):
        path = master_path(self._name)
        deadline = time.monotonic() + 5.0
        while not self._stopped:
            try:
                self._client.create(path, data=self._data, ephemeral=True)
                break
            except AlreadyExists:
                # a resigning master deletes its node; an expired one loses it
                # with its lease. Brief retry while that settles.
                if time.monotonic() > deadline:
                    raise
                time.sleep(0.05)
        self._emit(Role.MASTER)

    # ------------------------------------------------------------------- api

    def wait_for_role(self, role: Role, timeout: float = 10.0) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.role is role:
                return True
            time.sleep(0.01)
        return self.role is role

    def resign(self):
        """Leave the election; the master deletes its address node first so
        the successor can publish without colliding."""
        self._stopped = True
        try:
            if self.role is Role.MASTER:
                self._client.delete(master_path(self._name))
        except (RegistryError, MessagingError):
            pass
        try:
            if self._my_path:
                self._client.delete(self._my_path)
        except (RegistryError, MessagingError):
            pass


def discover(client: RegistryClient, service_name: str) -> bytes:
    """Current master address; NoMaster when nobody holds the role."""
    try:
        return client.get(master_path(service_name))
    except NodeNotFound:
        raise NoMaster(service_name) from None


class MasterWatch:
    """Continuous discovery: a stream of master addresses (None while the
    role is vacant), re-armed across changes and reconnects."""

    def __init__(self, client: RegistryClient, service_name: str):
        self._client = client
        self._name = service_name
        self.updates: queue.Queue[bytes | None] = queue.Queue()
        self._last: bytes | None = "unset"
        self._stopped = False
        self._refresh_lock = threading.Lock()
        client.on_reestablish(self._refresh)

    def start(self) -> "MasterWatch":
        self._refresh()
        return self

    def _refresh(self, _event=None):
        if self._stopped:
            return
        with self._refresh_lock:
            try:
                found, data = self._client.exists(master_path(self._name),
                                                  watch=self._refresh)
            except (RegistryError, MessagingError):
                if not self._stopped:  # transient: keep the watch chain alive
                    timer = threading.Timer(0.5, self._refresh)
                    timer.daemon = True
                    timer.start()
                return
            current = data if found else None
            if current != self._last:
                self._last = current
                self.updates.put(current)

    def current(self) -> bytes | None:
        return None if self._last == "unset" else self._last

    def stop(self):
        self._stopped = True
