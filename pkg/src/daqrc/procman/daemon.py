"""The per-node process-manager daemon and its client.

The daemon serves launch/stop/status/reap over request-reply, announces
itself in the registry under /nodes/<host>, and hands crash notices
(nonzero exit or signal) to an optional sink so they reach the
information service.
"""
from __future__ import annotations

import json

from ..messaging.frame import RawFrame, decode_payload, encode_frame
from ..messaging.patterns import ErrorReply, Replier, Requester, RequestFailed, reply_frame
from ..registry.client import RegistryClient
from . import protocol as p
from .manager import (
    BinaryNotFound,
    DuplicateObjectId,
    NotFound,
    ProcessHandle,
    ProcessManager,
    ProcessSpec,
    ProcmanError,
    SpawnOsError,
)

NODES_BASE = "/nodes"


def node_path(host_name: str) -> str:
    return f"{NODES_BASE}/{host_name}"


_ERROR_CODES = {
    BinaryNotFound: p.ErrorCode.BINARY_NOT_FOUND,
    DuplicateObjectId: p.ErrorCode.DUPLICATE_OBJECT_ID,
    SpawnOsError: p.ErrorCode.SPAWN_OS_ERROR,
    NotFound: p.ErrorCode.NOT_FOUND,
}


class PmgDaemon:
    def __init__(self, log_dir: str, host: str = "127.0.0.1", port: int = 0,
                 host_name: str = "localhost", registry: RegistryClient | None = None,
                 crash_sink=None, retention_s: float = 600.0):
        self.host_name = host_name
        self._crash_sink = crash_sink
        self.manager = ProcessManager(log_dir, retention_s=retention_s,
                                      on_exit=self._exited)
        self._replier = Replier(self._handle, host, port)
        self.address = self._replier.address
        self._registry = registry
        if registry is not None:
            self._register()
            registry.on_reestablish(self._register)

    def _register(self):
        try:
            self._registry.ensure_path(NODES_BASE)
            self._registry.create(node_path(self.host_name),
                                  data=json.dumps({"addr": self.address}).encode(),
                                  ephemeral=True)
        except Exception:
            pass

    def _exited(self, handle: ProcessHandle):
        crashed = (handle.status.name == "SIGNALED"
                   or (handle.exit_code is not None and handle.exit_code != 0))
        if crashed and self._crash_sink is not None:
            try:
                self._crash_sink(self.host_name, handle)
            except Exception:
                pass

    def _handle(self, raw: RawFrame) -> bytes:
        t = raw.msg_type
        try:
            if t == p.LAUNCH_REQ.msg_type:
                v = decode_payload(p.LAUNCH_REQ, raw.payload)
                env = dict(item.split("=", 1) for item in v.get("env", []))
                spec = ProcessSpec(
                    object_id=v["object_id"], binary=v["binary"],
                    args=tuple(v.get("args", [])), env=env,
                    working_dir=v.get("working_dir") or None,
                    log_dir=v.get("log_dir") or None)
                handle = self.manager.launch(spec)
                return reply_frame(p.HANDLE_REP, {"handle": p.handle_to_wire(handle)})
            if t == p.STOP_REQ.msg_type:
                v = decode_payload(p.STOP_REQ, raw.payload)
                handle = self.manager.stop(v["object_id"], v.get("grace_ms", 5000))
                return reply_frame(p.HANDLE_REP, {"handle": p.handle_to_wire(handle)})
            if t == p.STATUS_REQ.msg_type:
                v = decode_payload(p.STATUS_REQ, raw.payload)
                handles = self.manager.status(v.get("object_id") or None)
                return reply_frame(p.STATUS_REP,
                                   {"handles": [p.handle_to_wire(h) for h in handles]})
            if t == p.REAP_REQ.msg_type:
                return reply_frame(p.REAP_REP, {"count": self.manager.reap_all()})
        except ProcmanError as e:
            raise ErrorReply(_ERROR_CODES[type(e)], str(e)) from e
        raise ErrorReply(0, f"unexpected msg_type 0x{t:04X}")

    def close(self):
        self._replier.close()
        self.manager.reap_all()


class PmgClient:
    """Talks to one process-manager daemon."""

    def __init__(self, address: str, timeout: float = 30.0):
        self._requester = Requester(address, timeout=timeout)

    @classmethod
    def for_host(cls, registry: RegistryClient, host_name: str) -> "PmgClient":
        from .manager import NotFound as _NotFound
        found, data = registry.exists(node_path(host_name))
        if not found:
            raise _NotFound(f"no process manager registered for host {host_name!r}")
        return cls(json.loads(data)["addr"])

    def _call(self, schema, values, reply_schema):
        try:
            reply = self._requester.request(encode_frame(schema, values))
        except RequestFailed as e:
            for exc, code in _ERROR_CODES.items():
                if e.code == code:
                    raise exc(e.text) from None
            raise
        return decode_payload(reply_schema, reply.payload)

    def launch(self, spec: ProcessSpec) -> ProcessHandle:
        values = {"object_id": spec.object_id, "binary": spec.binary,
                  "args": list(spec.args),
                  "env": [f"{k}={v}" for k, v in spec.env.items()]}
        if spec.working_dir:
            values["working_dir"] = spec.working_dir
        if spec.log_dir:
            values["log_dir"] = spec.log_dir
        reply = self._call(p.LAUNCH_REQ, values, p.HANDLE_REP)
        return p.handle_from_wire(reply["handle"])

    def stop(self, object_id: str, grace_ms: int = 5000) -> ProcessHandle:
        reply = self._call(p.STOP_REQ, {"object_id": object_id, "grace_ms": grace_ms},
                           p.HANDLE_REP)
        return p.handle_from_wire(reply["handle"])

    def status(self, object_id: str | None = None) -> list[ProcessHandle]:
        values = {"object_id": object_id} if object_id else {}
        reply = self._call(p.STATUS_REQ, values, p.STATUS_REP)
        return [p.handle_from_wire(h) for h in reply.get("handles", [])]

    def reap_all(self) -> int:
        return self._call(p.REAP_REQ, {}, p.REAP_REP)["count"]

    def close(self):
        self._requester.close()
