"""Tree controller: fans commands down, aggregates states up.

Each controller elects a master instance per node (a hot slave can take
over), discovers its children through their per-node elections, and
mirrors both its own state and a reported-states snapshot into the
registry so a promoted slave resumes from the last quiescent picture.
One dispatch runs at a time per node; fan-out within a dispatch is
concurrent, and a timed-out child is marked ERROR for the operator to
sort out rather than silently retried.
"""
from __future__ import annotations

import json
import threading
import time

from ..config import ConfigDatabase, PartitionView, resolve_partition
from ..messaging.frame import RawFrame, decode_payload, encode_frame
from ..messaging.patterns import ErrorReply, Requester, RequestFailed, Subscriber, reply_frame
from ..messaging.transport import ConnectionLost, MessagingError, Timeout
from ..registry.client import RegistryClient
from ..registry.election import MasterWatch, Role
from . import protocol as p
from .fsm import IllegalTransition, RunCommand, RunState, aggregate, next_state
from .node import NodeRuntime

DEFAULT_CHILD_TIMEOUT_S = 10.0
# extra budget per level of subtree below a controller child, so a parent
# always outwaits its child's own fan-out and gets the detailed report
SUBTREE_GRACE_S = 5.0


class ChildTimeout(Exception):
    def __init__(self, child_id: str):
        super().__init__(f"child {child_id!r} did not report within the command timeout")
        self.child_id = child_id


class _ChildLink:
    """Connection to one child node, re-resolved across its failovers."""

    def __init__(self, controller: "Controller", child_id: str):
        self._controller = controller
        self.child_id = child_id
        self._requester: Requester | None = None
        self._connected_pub: str | None = None
        self._watch = MasterWatch(controller.registry,
                                  p.node_service(controller.partition, child_id))
        self._lock = threading.Lock()

    def start(self):
        self._watch.start()
        threading.Thread(target=self._track, daemon=True,
                         name=f"child-track-{self.child_id}").start()

    def _track(self):
        while not self._controller.closed:
            try:
                update = self._watch.updates.get(timeout=0.5)
            except Exception:
                continue
            if update is None:
                continue
            info = json.loads(update)
            with self._lock:
                if self._requester is not None:
                    self._requester.close()
                    self._requester = None
            if info.get("pub") and info["pub"] != self._connected_pub:
                self._connected_pub = info["pub"]
                try:
                    self._controller.state_subscriber.connect(info["pub"])
                except MessagingError:
                    pass
            self._controller.on_child_available(self.child_id)

    def _resolve(self, deadline: float) -> str:
        while time.monotonic() < deadline:
            current = self._watch.current()
            if current:
                return json.loads(current)["cmd"]
            time.sleep(0.02)
        raise ChildTimeout(self.child_id)

    def request(self, data: bytes, timeout: float) -> dict:
        """One re-resolution retry after a connection loss (child failover)."""
        deadline = time.monotonic() + timeout
        backoff_once = False
        while True:
            address = self._resolve(deadline)
            with self._lock:
                if self._requester is None:
                    try:
                        self._requester = Requester(address)
                    except MessagingError as e:
                        if backoff_once or time.monotonic() > deadline:
                            raise ChildTimeout(self.child_id) from e
                        backoff_once = True
                        time.sleep(0.1)
                        continue
                requester = self._requester
            try:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise ChildTimeout(self.child_id)
                return requester.request(data, timeout=remaining)
            except (ConnectionLost, Timeout) as e:
                with self._lock:
                    if self._requester is requester:
                        requester.close()
                        self._requester = None
                if backoff_once or isinstance(e, Timeout):
                    raise ChildTimeout(self.child_id) from e
                backoff_once = True
                time.sleep(0.1)

    def close(self):
        self._watch.stop()
        with self._lock:
            if self._requester is not None:
                self._requester.close()


class Controller:
    def __init__(self, db: ConfigDatabase, partition_id: str, object_id: str,
                 registry: RegistryClient, host: str = "127.0.0.1",
                 child_timeout_s: float = DEFAULT_CHILD_TIMEOUT_S):
        self.partition = partition_id
        self.object_id = object_id
        self.registry = registry
        self.child_timeout_s = child_timeout_s
        self.closed = False
        self.view: PartitionView = resolve_partition(db, partition_id)
        self.is_root = self.view.root_controller == object_id
        child_ids = self.view.children_of(object_id)
        self._child_kinds = {
            cid: ("CONTROLLER" if cid in self.view.controllers
                  else db.query_by_id(cid).type.upper())
            for cid in child_ids
        }
        self._child_depth = {cid: self._subtree_depth(cid) for cid in child_ids}
        parent = self.view.controller_assignments.get(object_id)
        self.node = NodeRuntime(partition_id, object_id, "CONTROLLER", parent,
                                registry, self._handle, host=host)
        self.reported: dict[str, RunState] = {cid: RunState.ABSENT for cid in child_ids}
        self._links: dict[str, _ChildLink] = {}
        self.state_subscriber = Subscriber(prefixes=(f"state.{partition_id}.".encode(),))
        self._dispatch_lock = threading.Lock()
        self._report_lock = threading.Lock()
        self._shutdown_event = threading.Event()
        self._activated = False

    def _subtree_depth(self, object_id: str) -> int:
        children = self.view.children_of(object_id)
        if not children:
            return 0
        return 1 + max(self._subtree_depth(c) for c in children)

    # -------------------------------------------------------------- lifecycle

    def start(self) -> "Controller":
        threading.Thread(target=self._state_event_loop, daemon=True,
                         name=f"ctl-events-{self.object_id}").start()
        self.node.start_election(on_role=self._on_role)
        return self

    def _on_role(self, change):
        if change.role is Role.MASTER:
            self._activate_master()

    def _activate_master(self):
        self._load_snapshot()
        self.node.register_node()
        self.node.set_state(self._settled_state())
        if not self._activated:
            self._activated = True
            for cid in self.reported:
                link = _ChildLink(self, cid)
                self._links[cid] = link
                link.start()

    def _load_snapshot(self):
        try:
            found, data = self.registry.exists(p.snapshot_path(self.partition, self.object_id))
            if not found:
                return
            snap = json.loads(data)
            with self._report_lock:
                for cid, name in snap.get("children", {}).items():
                    if cid in self.reported:
                        self.reported[cid] = RunState[name]
            self.node.run_number = snap.get("run_number", 0)
        except Exception:
            pass

    def _persist_snapshot(self):
        try:
            path = p.snapshot_path(self.partition, self.object_id)
            with self._report_lock:
                payload = json.dumps({
                    "children": {cid: s.name for cid, s in self.reported.items()},
                    "run_number": self.node.run_number,
                }).encode()
            self.registry.ensure_path(f"/partitions/{self.partition}/snap")
            found, _ = self.registry.exists(path)
            if found:
                self.registry.set(path, payload)
            else:
                self.registry.create(path, data=payload)
        except Exception:
            pass

    def on_child_available(self, child_id: str):
        """Pull the child's current state when it (re)appears."""
        link = self._links.get(child_id)
        if link is None:
            return

        def sync():
            try:
                reply = link.request(encode_frame(p.STATUS_REQ, {}), timeout=3.0)
                values = decode_payload(p.STATUS_REP, reply.payload)
                self._merge_child_state(child_id, RunState(values["state"]))
            except Exception:
                pass

        threading.Thread(target=sync, daemon=True).start()

    def _state_event_loop(self):
        """Track spontaneous child state changes (a leaf erroring out mid-run
        must turn every ancestor ERROR without a command in flight)."""
        while not self.closed:
            try:
                _, raw = self.state_subscriber.recv(timeout=0.5)
            except Timeout:
                continue
            except MessagingError:
                return
            if raw.msg_type != p.STATE_EVENT.msg_type:
                continue
            values = decode_payload(p.STATE_EVENT, raw.payload)
            node = values["node"]
            if node in self.reported:
                self._merge_child_state(node, RunState(values["state"]))

    def _merge_child_state(self, child_id: str, state: RunState):
        with self._report_lock:
            if self.reported.get(child_id) is state:
                return
            self.reported[child_id] = state
        if self._dispatch_lock.acquire(blocking=False):
            try:
                settled = self._settled_state()
                if settled is not self.node.state and self.node.is_master:
                    self.node.set_state(settled)
                    self._persist_snapshot()
            finally:
                self._dispatch_lock.release()

    def _settled_state(self) -> RunState:
        with self._report_lock:
            states = list(self.reported.values())
        return aggregate(states) if states else self.node.state

    # ---------------------------------------------------------------- handler

    def _handle(self, raw: RawFrame) -> bytes:
        if raw.msg_type == p.STATUS_REQ.msg_type:
            with self._report_lock:
                reports = [p.NodeReport(f"{self.object_id}/{cid}", None, s).to_wire()
                           for cid, s in self.reported.items()]
            reports.insert(0, p.NodeReport(self.object_id, None, self.node.state).to_wire())
            return reply_frame(p.STATUS_REP, {
                "state": int(self.node.state), "run_number": self.node.run_number,
                "reports": reports})
        if raw.msg_type != p.COMMAND_REQ.msg_type:
            raise ErrorReply(0, f"unexpected msg_type 0x{raw.msg_type:04X}")
        if not self.node.is_master:
            raise ErrorReply(p.ErrorCode.NOT_MASTER,
                             f"{self.object_id} is not the master instance")
        values = decode_payload(p.COMMAND_REQ, raw.payload)
        command = RunCommand(values["command"])
        run_number = values.get("run_number", 0)
        with self._dispatch_lock:
            return self._dispatch(command, run_number)

    def _dispatch(self, command: RunCommand, run_number: int) -> bytes:
        old = self.node.state
        try:
            expected = next_state(old, command)
        except IllegalTransition as e:
            raise ErrorReply(p.ErrorCode.ILLEGAL_TRANSITION, str(e)) from None
        if command is RunCommand.START and run_number == 0 and self.is_root:
            run_number = self._allocate_run_number()
        self.node.set_state(RunState.TRANSITIONING,
                            run_number if command is RunCommand.START else None)

        reports: list[p.NodeReport] = []
        if not self.reported:
            new = expected  # childless controller walks the table itself
        else:
            reports = self._fan_out(command, run_number)
            new = self._settled_state()
        self.node.set_state(new)
        self._persist_snapshot()
        all_reports = [p.NodeReport(self.object_id, old, new)] + reports
        if command is RunCommand.SHUTDOWN and new is RunState.ABSENT:
            self._shutdown_event.set()
        return reply_frame(p.COMMAND_REP, {
            "state": int(new), "run_number": self.node.run_number,
            "reports": [r.to_wire() for r in all_reports]})

    def _fan_out(self, command: RunCommand, run_number: int) -> list[p.NodeReport]:
        request = encode_frame(p.COMMAND_REQ,
                               {"command": int(command), "run_number": run_number})
        results: dict[str, list[p.NodeReport] | Exception] = {}

        def send(child_id: str, link: _ChildLink):
            before = self.reported.get(child_id, RunState.ABSENT)
            budget = self.child_timeout_s + SUBTREE_GRACE_S * self._child_depth[child_id]
            try:
                reply = link.request(request, timeout=budget)
                values = decode_payload(p.COMMAND_REP, reply.payload)
                child_state = RunState(values["state"])
                self._merge_quiet(child_id, child_state)
                entries = []
                for wire in values.get("reports", []):
                    entry = p.NodeReport.from_wire(wire)
                    entries.append(p.NodeReport(f"{self.object_id}/{entry.path}",
                                                entry.old_state, entry.new_state,
                                                entry.error))
                results[child_id] = entries
            except RequestFailed as e:
                # the child refused (illegal from its state): no state change
                results[child_id] = [p.NodeReport(
                    f"{self.object_id}/{child_id}", before,
                    self.reported.get(child_id, before), e.text)]
            except (ChildTimeout, MessagingError) as e:
                self._merge_quiet(child_id, RunState.ERROR)
                results[child_id] = [p.NodeReport(
                    f"{self.object_id}/{child_id}", before, RunState.ERROR, str(e))]

        threads = [threading.Thread(target=send, args=(cid, link), daemon=True,
                                    name=f"fanout-{cid}")
                   for cid, link in self._links.items()]
        for t in threads:
            t.start()
        max_depth = max(self._child_depth.values(), default=0)
        for t in threads:
            t.join(timeout=self.child_timeout_s + SUBTREE_GRACE_S * max_depth + 5)
        reports: list[p.NodeReport] = []
        for cid in self._links:
            reports.extend(results.get(cid) or [p.NodeReport(
                f"{self.object_id}/{cid}", None, RunState.ERROR, "no result")])
        return reports

    def _merge_quiet(self, child_id: str, state: RunState):
        with self._report_lock:
            self.reported[child_id] = state

    def _allocate_run_number(self) -> int:
        self.registry.ensure_path("/runs")
        path = self.registry.create("/runs/r-", sequential=True)
        return int(path.rsplit("-", 1)[1]) + 1

    def wait_for_shutdown(self, timeout: float | None = None) -> bool:
        return self._shutdown_event.wait(timeout)

    def close(self):
        self.closed = True
        for link in self._links.values():
            link.close()
        self.state_subscriber.close()
        self.node.close()
