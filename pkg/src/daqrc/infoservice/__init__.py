from .client import (
    InfoClient,
    InfoSubscription,
    WrongShard,
    registry_events_addresses,
    shard_map_from_registry,
)
from .records import (
    ErrorInfo,
    Histogram,
    InfoError,
    InfoRecord,
    MalformedRecord,
    RecordKind,
    Severity,
    merge_histograms,
)
from .server import InfoServer
from .sharding import FNV_OFFSET_BASIS, FNV_PRIME, ShardMap, fnv1a_64, shard_for

__all__ = [
    "InfoClient", "InfoSubscription", "WrongShard", "registry_events_addresses",
    "shard_map_from_registry", "ErrorInfo", "Histogram", "InfoError", "InfoRecord",
    "MalformedRecord", "RecordKind", "Severity", "merge_histograms", "InfoServer",
    "FNV_OFFSET_BASIS", "FNV_PRIME", "ShardMap", "fnv1a_64", "shard_for",
]
