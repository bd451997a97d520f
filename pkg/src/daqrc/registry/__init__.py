from .client import (
    AlreadyExists,
    BadRequest,
    GaveUp,
    LeaseExpired,
    NoMaster,
    NodeNotFound,
    NoParent,
    NotEmpty,
    RegistryClient,
    RegistryError,
    WatchEvent,
    backoff_delays,
)
from .election import Election, MasterWatch, Role, RoleChange, discover, master_path, service_base
from .protocol import EventType
from .server import RegistryServer

__all__ = [
    "AlreadyExists", "BadRequest", "GaveUp", "LeaseExpired", "NoMaster",
    "NodeNotFound", "NoParent", "NotEmpty", "RegistryClient", "RegistryError",
    "WatchEvent", "backoff_delays", "Election", "MasterWatch", "Role",
    "RoleChange", "discover", "master_path", "service_base", "EventType",
    "RegistryServer",
]
