"""Leaf adapter: the shim that makes any application a tree leaf.

User callbacks (on_boot, on_configure, on_start(run_number), on_pause,
on_resume, on_stop, on_unconfigure, on_shutdown) run inside the command
handler; a raising callback reports ERROR with the message text, and the
parent aggregates it. State changes publish on state.<partition>.<id>.
"""
from __future__ import annotations

import threading

from ..messaging.frame import RawFrame, decode_payload
from ..messaging.patterns import ErrorReply, reply_frame
from ..registry.client import RegistryClient
from . import protocol as p
from .fsm import IllegalTransition, RunCommand, RunState, next_state
from .node import NodeRuntime

_CALLBACK_NAMES = {
    RunCommand.BOOT: "on_boot",
    RunCommand.CONFIGURE: "on_configure",
    RunCommand.START: "on_start",
    RunCommand.PAUSE: "on_pause",
    RunCommand.RESUME: "on_resume",
    RunCommand.STOP: "on_stop",
    RunCommand.UNCONFIGURE: "on_unconfigure",
    RunCommand.SHUTDOWN: "on_shutdown",
}


class LeafApp:
    def __init__(self, partition: str, object_id: str, registry: RegistryClient,
                 callbacks: object | None = None, parent: str | None = None,
                 kind: str = "APPLICATION", host: str = "127.0.0.1"):
        self._callbacks = callbacks
        self._lock = threading.Lock()
        self._shutdown_event = threading.Event()
        self.node = NodeRuntime(partition, object_id, kind, parent, registry,
                                self._handle, host=host)

    def start(self) -> "LeafApp":
        self.node.start_election(on_role=self._on_role)
        return self

    def _on_role(self, change):
        from ..registry.election import Role
        if change.role is Role.MASTER:
            self.node.register_node()
            self.node.set_state(self.node.state)

    def _handle(self, raw: RawFrame) -> bytes:
        if raw.msg_type == p.STATUS_REQ.msg_type:
            return reply_frame(p.STATUS_REP, {
                "state": int(self.node.state), "run_number": self.node.run_number,
                "reports": [p.NodeReport(self.node.object_id, None,
                                         self.node.state).to_wire()]})
        if raw.msg_type != p.COMMAND_REQ.msg_type:
            raise ErrorReply(0, f"unexpected msg_type 0x{raw.msg_type:04X}")
        values = decode_payload(p.COMMAND_REQ, raw.payload)
        command = RunCommand(values["command"])
        run_number = values.get("run_number", 0)
        with self._lock:
            old = self.node.state
            try:
                target = next_state(old, command)
            except IllegalTransition as e:
                raise ErrorReply(p.ErrorCode.ILLEGAL_TRANSITION, str(e)) from None
            error_text = ""
            try:
                self._invoke(command, run_number)
                new = target
            except Exception as e:
                error_text = f"{type(e).__name__}: {e}"
                new = RunState.ERROR
            self.node.set_state(new, run_number if command is RunCommand.START else None)
        report = p.NodeReport(self.node.object_id, old, new, error_text)
        if command is RunCommand.SHUTDOWN and new is RunState.ABSENT:
            self._shutdown_event.set()
        return reply_frame(p.COMMAND_REP, {
            "state": int(new), "run_number": self.node.run_number,
            "reports": [report.to_wire()]})

    def _invoke(self, command: RunCommand, run_number: int):
        if self._callbacks is None:
            return
        fn = getattr(self._callbacks, _CALLBACK_NAMES[command], None)
        if fn is None:
            return
        if command is RunCommand.START:
            fn(run_number)
        else:
            fn()

    def wait_for_shutdown(self, timeout: float | None = None) -> bool:
        """Block until a SHUTDOWN command completes (process entry points
        exit afterwards, which empties the process-manager inventory)."""
        return self._shutdown_event.wait(timeout)

    def close(self):
        self.node.close()
