"""Partition resolution: flatten the segment tree into controller and
info-destination assignments.

Scoping rule: an object's own IsControlledBy/InfoDestTo relation wins over
its segment's, which wins over the enclosing segment's, up to the
partition. The controller service named by a scope is itself assigned to
the parent scope's controller, which is what makes the controllers form a
tree rooted at the partition's controller.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .model import (
    REL_CONTAINS,
    REL_CONTROLLED_BY,
    REL_INFO_DEST,
    ConfigDatabase,
    ConfigError,
    ConfigObject,
    INITIAL_PARTITION_ID,
    NotFound,
)


class NoController(ConfigError):
    def __init__(self, object_id: str):
        super().__init__(f"no IsControlledBy reachable for {object_id!r}")
        self.object_id = object_id


class NotAPartition(ConfigError):
    pass


@dataclass
class SegmentNode:
    segment_id: str
    subsegments: list["SegmentNode"] = field(default_factory=list)
    members: list[str] = field(default_factory=list)  # non-segment objects contained here


@dataclass
class PartitionView:
    partition_id: str
    segments: list[SegmentNode]
    root_controller: str
    controller_assignments: dict[str, str]  # object id -> controller id
    info_destinations: dict[str, str]  # object id -> destination id
    controllers: list[str]  # every controller, root first, document order after

    @property
    def is_initial(self) -> bool:
        return self.partition_id == INITIAL_PARTITION_ID

    def children_of(self, controller_id: str) -> list[str]:
        return [oid for oid, ctl in self.controller_assignments.items() if ctl == controller_id]


def _scope_controller(obj: ConfigObject) -> str | None:
    rel = obj.first_relation(REL_CONTROLLED_BY)
    return rel.target_id if rel else None


def _scope_info_dest(obj: ConfigObject) -> str | None:
    rel = obj.first_relation(REL_INFO_DEST)
    return rel.target_id if rel else None


def resolve_partition(db: ConfigDatabase, partition_id: str) -> PartitionView:
    partition = db.query_by_id(partition_id)
    if partition.type != "Partition":
        raise NotAPartition(f"{partition_id!r} is a {partition.type!r}, not a Partition")

    root_controller = _scope_controller(partition)
    if root_controller is None:
        raise NoController(partition_id)

    assignments: dict[str, str] = {}
    info_dests: dict[str, str] = {}
    controllers: list[str] = [root_controller]
    segments: list[SegmentNode] = []

    partition_dest = _scope_info_dest(partition)
    if partition_dest is not None:
        info_dests[root_controller] = partition_dest

    def assign_controller_object(controller_id: str, parent_controller: str | None,
                                 scope_dest: str | None):
        if controller_id not in controllers:
            controllers.append(controller_id)
        if controller_id == root_controller or parent_controller is None:
            return
        assignments[controller_id] = parent_controller
        own_dest = _scope_info_dest(db.query_by_id(controller_id)) or scope_dest
        if own_dest is not None:
            info_dests[controller_id] = own_dest

    def walk(obj: ConfigObject, controller: str | None, dest: str | None,
             node: SegmentNode | None):
        for rel in obj.relations_named(REL_CONTAINS):
            member = db.query_by_id(rel.target_id)
            if member.type == "segment":
                seg_controller = _scope_controller(member)
                seg_dest = _scope_info_dest(member) or dest
                child_node = SegmentNode(member.id)
                if node is None:
                    segments.append(child_node)
                else:
                    node.subsegments.append(child_node)
                if seg_controller is not None and seg_controller != controller:
                    # the segment's controller is managed by the enclosing scope
                    assign_controller_object(seg_controller, controller, dest)
                walk(member, seg_controller or controller, seg_dest, child_node)
            else:
                own_controller = _scope_controller(member) or controller
                if own_controller is None:
                    raise NoController(member.id)
                if own_controller == member.id:
                    raise NoController(member.id)  # object cannot control itself
                if own_controller not in controllers:
                    assign_controller_object(own_controller, controller, dest)
                assignments[member.id] = own_controller
                own_dest = _scope_info_dest(member) or dest
                if own_dest is not None:
                    info_dests[member.id] = own_dest
                if node is not None:
                    node.members.append(member.id)

    walk(partition, root_controller, partition_dest, None)

    # every controller must chain up to the root
    for ctl in controllers:
        seen = {ctl}
        cur = ctl
        while cur != root_controller:
            cur = assignments.get(cur)
            if cur is None or cur in seen:
                raise NoController(ctl)
            seen.add(cur)

    return PartitionView(
        partition_id=partition_id,
        segments=segments,
        root_controller=root_controller,
        controller_assignments=assignments,
        info_destinations=info_dests,
        controllers=controllers,
    )
