"""Shared runtime for tree nodes (controllers and leaf apps).

Every node binds a command replier and a state publisher, then joins its
per-node election under rc.<partition>.<id>. Only the master instance
registers the node entry in the registry and serves commands; the entry
carries the addresses, tree position, and current state, which is what
the status CLI and the web gateway render.
"""
from __future__ import annotations

import json
import time

from ..messaging.frame import encode_frame
from ..messaging.patterns import Publisher, Replier
from ..registry.client import AlreadyExists, RegistryClient
from ..registry.election import Election, Role
from . import protocol as p
from .fsm import RunState


class NodeRuntime:
    def __init__(self, partition: str, object_id: str, kind: str,
                 parent: str | None, registry: RegistryClient, handler,
                 host: str = "127.0.0.1"):
        self.partition = partition
        self.object_id = object_id
        self.kind = kind
        self.parent = parent
        self.registry = registry
        self.run_number = 0
        self._replier = Replier(handler, host=host)
        self._publisher = Publisher(host=host)
        self.address = self._replier.address
        self.events_address = self._publisher.address
        self.election: Election | None = None
        self._state = RunState.ABSENT

    # -------------------------------------------------------------- election

    def start_election(self, on_role=None) -> Election:
        data = json.dumps({"cmd": self.address, "pub": self.events_address}).encode()
        self.election = Election(self.registry, p.node_service(self.partition, self.object_id),
                                 data, on_role=on_role)
        return self.election.start()

    @property
    def is_master(self) -> bool:
        return self.election is not None and self.election.role is Role.MASTER

    # ------------------------------------------------------------------ state

    @property
    def state(self) -> RunState:
        return self._state

    def register_node(self):
        try:
            self.registry.ensure_path(p.nodes_base(self.partition))
            self.registry.create(p.node_path(self.partition, self.object_id),
                                 data=self._node_data(), ephemeral=True)
        except AlreadyExists:
            # stale entry from a dying master; it vanishes with its lease
            pass

    def _node_data(self) -> bytes:
        import os
        return json.dumps({
            "kind": self.kind,
            "parent": self.parent,
            "cmd": self.address,
            "pub": self.events_address,
            "state": self._state.name,
            "run_number": self.run_number,
            "pid": os.getpid(),
            "updated_at": time.time(),
        }).encode()

    def set_state(self, state: RunState, run_number: int | None = None):
        """Record, publish, and mirror the node state into the registry."""
        self._state = state
        if run_number is not None:
            self.run_number = run_number
        event = encode_frame(p.STATE_EVENT, {
            "partition": self.partition, "node": self.object_id,
            "state": int(state), "run_number": self.run_number,
            "at_us": int(time.time() * 1e6)})
        self._publisher.publish(p.state_topic(self.partition, self.object_id), event)
        if self.is_master:
            try:
                self.registry.set(p.node_path(self.partition, self.object_id),
                                  self._node_data())
            except Exception:
                pass

    def close(self):
        if self.election is not None:
            self.election.resign()
        self._replier.close()
        self._publisher.close()
