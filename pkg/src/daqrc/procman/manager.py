"""Per-node process supervision.

Children run in their own process group (session), so stopping is
transitive to grandchildren. Exits are observed by a waiter thread per
child, not by polling. Ended handles stay readable for a retention
window so controllers can fetch post-mortem status.
"""
from __future__ import annotations

import enum
import os
import signal
import subprocess
import threading
import time
from dataclasses import dataclass, field, replace

DEFAULT_GRACE_MS = 5000
DEFAULT_RETENTION_S = 600.0


class ProcmanError(Exception):
    pass


class BinaryNotFound(ProcmanError):
    pass


class DuplicateObjectId(ProcmanError):
    pass


class SpawnOsError(ProcmanError):
    pass


class NotFound(ProcmanError):
    pass


class ProcStatus(enum.IntEnum):
    STARTING = 1
    ALIVE = 2
    EXITED = 3
    SIGNALED = 4
    FAILED_TO_START = 5


@dataclass(frozen=True)
class ProcessSpec:
    object_id: str
    binary: str
    args: tuple[str, ...] = ()
    env: dict[str, str] = field(default_factory=dict)
    working_dir: str | None = None
    log_dir: str | None = None


@dataclass
class ProcessHandle:
    object_id: str
    os_pid: int = 0
    status: ProcStatus = ProcStatus.STARTING
    exit_code: int | None = None
    term_signal: int | None = None
    reason: str | None = None
    started_at: float = 0.0
    ended_at: float = 0.0

    @property
    def live(self) -> bool:
        return self.status in (ProcStatus.STARTING, ProcStatus.ALIVE)


class ProcessManager:
    def __init__(self, log_dir: str, retention_s: float = DEFAULT_RETENTION_S,
                 on_exit=None):
        self._log_dir = log_dir
        self._retention_s = retention_s
        self._on_exit = on_exit
        self._lock = threading.RLock()
        self._live: dict[str, tuple[ProcessHandle, subprocess.Popen]] = {}
        self._ended: dict[str, ProcessHandle] = {}
        os.makedirs(log_dir, exist_ok=True)

    def launch(self, spec: ProcessSpec) -> ProcessHandle:
        if not (os.path.isfile(spec.binary) and os.access(spec.binary, os.X_OK)):
            raise BinaryNotFound(spec.binary)
        log_dir = spec.log_dir or self._log_dir
        os.makedirs(log_dir, exist_ok=True)
        with self._lock:
            if spec.object_id in self._live:
                raise DuplicateObjectId(spec.object_id)
            env = dict(os.environ)
            env.update(spec.env)
            log_name = spec.object_id.replace(os.sep, "_")
            out = open(os.path.join(log_dir, f"{log_name}.out"), "ab")
            err = open(os.path.join(log_dir, f"{log_name}.err"), "ab")
            try:
                proc = subprocess.Popen(
                    [spec.binary, *spec.args],
                    env=env,
                    cwd=spec.working_dir or None,
                    stdout=out,
                    stderr=err,
                    start_new_session=True,  # own process group: stop is transitive
                )
            except OSError as e:
                out.close()
                err.close()
                raise SpawnOsError(str(e)) from e
            finally:
                # parent keeps no descriptors on the logs
                out.close()
                err.close()
            handle = ProcessHandle(spec.object_id, os_pid=proc.pid,
                                   status=ProcStatus.ALIVE, started_at=time.time())
            self._live[spec.object_id] = (handle, proc)
        threading.Thread(target=self._wait_exit, args=(spec.object_id, proc),
                         daemon=True, name=f"pmg-wait-{spec.object_id}").start()
        return replace(handle)

    def _wait_exit(self, object_id: str, proc: subprocess.Popen):
        code = proc.wait()
        with self._lock:
            entry = self._live.pop(object_id, None)
            if entry is None:
                return
            handle, _ = entry
            handle.ended_at = time.time()
            if code < 0:
                handle.status = ProcStatus.SIGNALED
                handle.term_signal = -code
            else:
                handle.status = ProcStatus.EXITED
                handle.exit_code = code
            self._ended[object_id] = handle
        if self._on_exit is not None:
            try:
                self._on_exit(replace(handle))
            except Exception:
                pass

    def stop(self, object_id: str, grace_ms: int = DEFAULT_GRACE_MS) -> ProcessHandle:
        with self._lock:
            entry = self._live.get(object_id)
        if entry is None:
            raise NotFound(object_id)
        handle, proc = entry
        self._signal_group(proc.pid, signal.SIGTERM)
        try:
            proc.wait(timeout=grace_ms / 1000.0)
        except subprocess.TimeoutExpired:
            self._signal_group(proc.pid, signal.SIGKILL)
            proc.wait()
        deadline = time.monotonic() + 5
        while time.monotonic() < deadline:  # waiter thread records the outcome
            with self._lock:
                done = self._ended.get(object_id)
            if done is not None:
                return replace(done)
            time.sleep(0.005)
        raise ProcmanError(f"exit of {object_id!r} was not recorded")

    @staticmethod
    def _signal_group(pid: int, sig: int):
        try:
            os.killpg(pid, sig)
        except ProcessLookupError:
            pass

    def status(self, object_id: str | None = None) -> list[ProcessHandle]:
        self._purge()
        with self._lock:
            if object_id is not None:
                if object_id in self._live:
                    return [replace(self._live[object_id][0])]
                if object_id in self._ended:
                    return [replace(self._ended[object_id])]
                raise NotFound(object_id)
            handles = [replace(h) for h, _ in self._live.values()]
            handles += [replace(h) for h in self._ended.values()]
            return sorted(handles, key=lambda h: h.started_at)

    def _purge(self):
        cutoff = time.time() - self._retention_s
        with self._lock:
            for oid in [oid for oid, h in self._ended.items() if h.ended_at < cutoff]:
                del self._ended[oid]

    def live_ids(self) -> list[str]:
        with self._lock:
            return list(self._live)

    def reap_all(self, grace_ms: int = DEFAULT_GRACE_MS) -> int:
        ids = self.live_ids()
        threads = []
        for oid in ids:
            t = threading.Thread(target=self._stop_quiet, args=(oid, grace_ms))
            t.start()
            threads.append(t)
        for t in threads:
            t.join()
        return len(ids)

    def _stop_quiet(self, object_id: str, grace_ms: int):
        try:
            self.stop(object_id, grace_ms)
        except ProcmanError:
            pass
