from .daemon import PmgClient, PmgDaemon, node_path
from .manager import (
    BinaryNotFound,
    DuplicateObjectId,
    NotFound,
    ProcessHandle,
    ProcessManager,
    ProcessSpec,
    ProcmanError,
    ProcStatus,
    SpawnOsError,
)

__all__ = [
    "PmgClient", "PmgDaemon", "node_path", "BinaryNotFound", "DuplicateObjectId",
    "NotFound", "ProcessHandle", "ProcessManager", "ProcessSpec", "ProcmanError",
    "ProcStatus", "SpawnOsError",
]
