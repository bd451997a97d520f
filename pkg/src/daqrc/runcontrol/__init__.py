from .boot import (
    BootedPartition,
    BootError,
    CommandRefused,
    HostUnreachable,
    PartialFailure,
    RegistryUnavailable,
    RootHandle,
    SpawnFailed,
    boot_partition,
)
from .controller import ChildTimeout, Controller
from .fsm import (
    EmptyChildren,
    FsmError,
    IllegalTransition,
    RunCommand,
    RunState,
    TRANSITIONS,
    aggregate,
    legal_commands,
    next_state,
)
from .leaf import LeafApp
from .protocol import CommandReport, NodeReport
from .view import UnknownPartition, list_partitions, render_tree, tree_snapshot

__all__ = [
    "BootedPartition", "BootError", "CommandRefused", "HostUnreachable",
    "PartialFailure", "RegistryUnavailable", "RootHandle", "SpawnFailed",
    "boot_partition", "ChildTimeout", "Controller", "EmptyChildren", "FsmError",
    "IllegalTransition", "RunCommand", "RunState", "TRANSITIONS", "aggregate",
    "legal_commands", "next_state", "LeafApp", "CommandReport", "NodeReport",
    "UnknownPartition", "list_partitions", "render_tree", "tree_snapshot",
]
