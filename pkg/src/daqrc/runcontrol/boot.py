"""Partition boot: spawn the controller tree and leaf applications through
the per-host process managers, wait for every node to elect a master, and
drive the root through its first BOOT.

Launch attributes come from the deployment description (binary, args,
env, host, replicas; see docs/config.md). Spawned processes receive
DAQRC_REGISTRY / DAQRC_PARTITION / DAQRC_OBJECT / DAQRC_CONFIG in their
environment so the description itself stays host-independent. An
infrastructure failure mid-boot reaps everything already spawned: no
orphans.
"""
from __future__ import annotations

import json
import shlex
import time

from ..config import ConfigDatabase
from ..config.partition import resolve_partition
from ..messaging.frame import decode_payload, encode_frame
from ..messaging.patterns import Requester, RequestFailed
from ..messaging.transport import MessagingError
from ..procman.daemon import PmgClient, node_path as pmg_node_path
from ..procman.manager import ProcessSpec
from ..registry.client import NodeNotFound, NoMaster, RegistryClient
from . import protocol as p
from .fsm import RunCommand, RunState

DEFAULT_BOOT_TIMEOUT_S = 60.0


class BootError(Exception):
    pass


class HostUnreachable(BootError):
    def __init__(self, host: str):
        super().__init__(f"no process manager registered for host {host!r}")
        self.host = host


class SpawnFailed(BootError):
    def __init__(self, object_id: str, reason: str = ""):
        super().__init__(f"failed to bring up {object_id!r}: {reason}")
        self.object_id = object_id


class RegistryUnavailable(BootError):
    pass


class CommandRefused(BootError):
    """The target controller rejected or could not take the command."""

    def __init__(self, code: int, text: str):
        super().__init__(text)
        self.code = code
        self.text = text


class PartialFailure(BootError):
    def __init__(self, report: p.CommandReport):
        failed = "; ".join(f"{r.path}: {r.error}" for r in report.errors)
        super().__init__(f"command completed with errors at: {failed}")
        self.report = report


class RootHandle:
    """Dispatches commands to a partition's root controller, re-discovering
    the master across failovers."""

    def __init__(self, registry: RegistryClient, partition: str, root_id: str,
                 timeout_s: float = 30.0):
        self._registry = registry
        self.partition = partition
        self.root_id = root_id
        self._timeout_s = timeout_s
        self._requester: Requester | None = None
        self._address: str | None = None

    def _resolve(self) -> str:
        found, data = self._registry.exists(
            f"/services/{p.node_service(self.partition, self.root_id)}/master")
        if not found:
            raise NoMaster(self.root_id)
        return json.loads(data)["cmd"]

    def _request(self, data: bytes, timeout: float):
        address = self._resolve()
        if address != self._address or self._requester is None:
            if self._requester is not None:
                self._requester.close()
            self._requester = Requester(address)
            self._address = address
        return self._requester.request(data, timeout=timeout)

    def dispatch(self, command: RunCommand, run_number: int = 0,
                 timeout_s: float | None = None) -> p.CommandReport:
        timeout = timeout_s if timeout_s is not None else self._timeout_s
        request = encode_frame(p.COMMAND_REQ,
                               {"command": int(command), "run_number": run_number})
        try:
            reply = self._request(request, timeout)
        except RequestFailed as e:
            raise CommandRefused(e.code, e.text) from None
        except MessagingError as e:
            self._requester = None
            self._address = None
            raise NoMaster(f"{self.root_id}: {e}") from e
        return p.CommandReport.from_wire(decode_payload(p.COMMAND_REP, reply.payload))

    def status(self) -> p.CommandReport:
        try:
            reply = self._request(encode_frame(p.STATUS_REQ, {}), timeout=5.0)
        except RequestFailed as e:
            raise CommandRefused(e.code, e.text) from None
        except MessagingError as e:
            self._requester = None
            raise NoMaster(f"{self.root_id}: {e}") from e
        return p.CommandReport.from_wire(decode_payload(p.STATUS_REP, reply.payload))

    def close(self):
        if self._requester is not None:
            self._requester.close()


class BootedPartition:
    def __init__(self, partition: str, root: RootHandle, registry: RegistryClient,
                 spawned: list[tuple[PmgClient, str]], owns_registry_client: bool):
        self.partition = partition
        self.root = root
        self.registry = registry
        self.spawned = spawned
        self._owns_registry_client = owns_registry_client

    def dispatch(self, command: RunCommand, run_number: int = 0) -> p.CommandReport:
        return self.root.dispatch(command, run_number)

    def live_process_ids(self) -> list[str]:
        ids = []
        for pmg, object_id in self.spawned:
            for handle in pmg.status():
                if handle.object_id == object_id and handle.live:
                    ids.append(object_id)
        return ids

    def shutdown(self, timeout_s: float = 30.0) -> p.CommandReport | None:
        """SHUTDOWN through the tree; node processes exit by themselves, so
        the process-manager inventory drains. Stragglers are stopped."""
        report = None
        try:
            state = RunState(int(self.root.status().state))
            for command in (RunCommand.STOP, RunCommand.UNCONFIGURE, RunCommand.SHUTDOWN):
                if state in (RunState.ABSENT,):
                    break
                try:
                    report = self.root.dispatch(command)
                    state = report.state
                except CommandRefused:
                    continue
        except (NoMaster, MessagingError):
            pass
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline and self.live_process_ids():
            time.sleep(0.1)
        self.teardown()
        return report

    def teardown(self):
        """Stop every process this boot spawned (idempotent)."""
        for pmg, object_id in self.spawned:
            try:
                pmg.stop(object_id, grace_ms=3000)
            except Exception:
                pass
        self.close()

    def close(self):
        self.root.close()
        seen = set()
        for pmg, _ in self.spawned:
            if id(pmg) not in seen:
                seen.add(id(pmg))
                pmg.close()
        if self._owns_registry_client:
            self.registry.close()


def _launch_attrs(obj, config_path: str, partition: str, registry_address: str) -> dict:
    attrs = obj.attributes
    if "binary" not in attrs:
        raise SpawnFailed(obj.id, "object has no binary attribute")
    env = dict(item.split("=", 1) for item in shlex.split(attrs.get("env", "")))
    env.update({
        "DAQRC_REGISTRY": registry_address,
        "DAQRC_PARTITION": partition,
        "DAQRC_OBJECT": obj.id,
        "DAQRC_CONFIG": config_path,
    })
    return {
        "host": attrs.get("host", "localhost"),
        "binary": attrs["binary"],
        "args": tuple(shlex.split(attrs.get("args", ""))),
        "env": env,
        "replicas": int(attrs.get("replicas", "1")),
    }


def boot_partition(db: ConfigDatabase, partition_id: str, registry_address: str,
                   config_path: str, registry: RegistryClient | None = None,
                   boot_timeout_s: float = DEFAULT_BOOT_TIMEOUT_S) -> BootedPartition:
    owns_client = registry is None
    if registry is None:
        try:
            registry = RegistryClient(registry_address).connect()
        except MessagingError as e:
            raise RegistryUnavailable(str(e)) from e
    view = resolve_partition(db, partition_id)
    node_ids = list(view.controllers) + [oid for oid in view.controller_assignments
                                         if oid not in view.controllers]

    plans = {oid: _launch_attrs(db.query_by_id(oid), config_path, partition_id,
                                registry_address)
             for oid in node_ids}

    spawned: list[tuple[PmgClient, str]] = []
    pmg_clients: dict[str, PmgClient] = {}

    def fail_cleanup(exc: BootError):
        for pmg, object_id in spawned:
            try:
                pmg.stop(object_id, grace_ms=2000)
            except Exception:
                pass
        for pmg in pmg_clients.values():
            pmg.close()
        if owns_client:
            registry.close()
        raise exc

    # all hosts must have a reachable process manager before anything spawns
    for oid in node_ids:
        host = plans[oid]["host"]
        if host not in pmg_clients:
            try:
                found, data = registry.exists(pmg_node_path(host))
            except MessagingError as e:
                fail_cleanup(RegistryUnavailable(str(e)))
            if not found:
                fail_cleanup(HostUnreachable(host))
            pmg_clients[host] = PmgClient(json.loads(data)["addr"])

    for oid in node_ids:
        plan = plans[oid]
        pmg = pmg_clients[plan["host"]]
        for replica in range(plan["replicas"]):
            process_id = f"{partition_id}/{oid}"
            if replica:
                process_id += f"#r{replica + 1}"
            spec = ProcessSpec(object_id=process_id, binary=plan["binary"],
                               args=plan["args"], env=plan["env"])
            try:
                pmg.launch(spec)
            except Exception as e:
                fail_cleanup(SpawnFailed(oid, str(e)))
            spawned.append((pmg, process_id))

    # every node must elect a master before the first command
    deadline = time.monotonic() + boot_timeout_s
    for oid in node_ids:
        service = p.node_service(partition_id, oid)
        while True:
            try:
                found, _ = registry.exists(f"/services/{service}/master")
            except MessagingError as e:
                fail_cleanup(RegistryUnavailable(str(e)))
            if found:
                break
            if time.monotonic() > deadline:
                fail_cleanup(SpawnFailed(oid, "node never elected a master"))
            time.sleep(0.05)

    root = RootHandle(registry, partition_id, view.root_controller)
    booted = BootedPartition(partition_id, root, registry, spawned, owns_client)
    try:
        report = root.dispatch(RunCommand.BOOT, timeout_s=boot_timeout_s)
    except (CommandRefused, NoMaster) as e:
        booted.teardown()
        raise SpawnFailed(view.root_controller, str(e)) from e
    if report.errors:
        booted.teardown()
        raise PartialFailure(report)
    return booted
