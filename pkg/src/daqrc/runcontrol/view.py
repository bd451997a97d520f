"""Registry-derived tree snapshots, shared by the status CLI and gateway.

Every value comes from the node entries the masters maintain; nothing is
invented here.
"""
from __future__ import annotations

import json

from ..registry.client import NodeNotFound, RegistryClient
from . import protocol as p


class UnknownPartition(Exception):
    pass


def list_partitions(registry: RegistryClient) -> list[str]:
    try:
        return sorted(registry.children("/partitions"))
    except NodeNotFound:
        return []


def tree_snapshot(registry: RegistryClient, partition: str) -> dict:
    try:
        names = registry.children(p.nodes_base(partition))
    except NodeNotFound:
        raise UnknownPartition(partition) from None
    nodes = {}
    for name in names:
        found, data = registry.exists(p.node_path(partition, name))
        if found:
            nodes[name] = json.loads(data)

    def path_of(node_id: str) -> str:
        seen = []
        cur = node_id
        while cur is not None and cur not in seen and cur in nodes:
            seen.append(cur)
            cur = nodes[cur].get("parent")
        return "/".join(reversed(seen))

    run_number = 0
    entries = []
    for node_id, info in nodes.items():
        if info.get("parent") is None:
            run_number = info.get("run_number", 0)
        entries.append({
            "id": node_id,
            "path": path_of(node_id),
            "kind": info.get("kind", "APPLICATION"),
            "parent": info.get("parent"),
            "state": info.get("state", "ABSENT"),
            "run_number": info.get("run_number", 0),
            "updated_at": info.get("updated_at", 0),
        })
    entries.sort(key=lambda e: e["path"])
    return {"partition": partition, "run_number": run_number, "nodes": entries}


def render_tree(snapshot: dict) -> str:
    """ASCII rendering for the status CLI."""
    lines = [f"partition {snapshot['partition']}  run_number={snapshot['run_number']}"]
    for node in snapshot["nodes"]:
        depth = node["path"].count("/")
        lines.append(f"{'  ' * depth}{node['id']} [{node['kind']}] {node['state']}")
    return "\n".join(lines)
