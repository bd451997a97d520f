from .model import (
    BadPattern,
    ConfigDatabase,
    ConfigError,
    ConfigObject,
    ContainmentCycle,
    DanglingRelation,
    DuplicateId,
    INITIAL_PARTITION_ID,
    InvalidRelation,
    NotFound,
    REL_CONTAINS,
    REL_CONTROLLED_BY,
    REL_INFO_DEST,
    Relation,
    XmlSyntax,
    load,
    serialize,
)
from .partition import NoController, NotAPartition, PartitionView, SegmentNode, resolve_partition

__all__ = [
    "BadPattern", "ConfigDatabase", "ConfigError", "ConfigObject",
    "ContainmentCycle", "DanglingRelation", "DuplicateId", "INITIAL_PARTITION_ID",
    "InvalidRelation", "NotFound", "REL_CONTAINS", "REL_CONTROLLED_BY",
    "REL_INFO_DEST", "Relation", "XmlSyntax", "load", "serialize",
    "NoController", "NotAPartition", "PartitionView", "SegmentNode", "resolve_partition",
]
