"""Static load balancing: key-hash sharding with FNV-1a 64.

Pure and bit-stable across processes and languages, so any client can
route a key to its shard without asking anyone.
"""
from __future__ import annotations

from dataclasses import dataclass

FNV_OFFSET_BASIS = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK
    return h


def shard_for(key: str, server_count: int) -> int:
    if server_count < 1:
        raise ValueError("shard map must be non-empty")
    return fnv1a_64(key.encode("utf-8")) % server_count


@dataclass(frozen=True)
class ShardMap:
    """Ordered server list for one info destination. The order defines the
    shard index, so reordering is a re-shard."""

    destination_id: str
    servers: tuple[str, ...]

    def __post_init__(self):
        if not self.servers:
            raise ValueError("shard map must be non-empty")

    def server_for(self, key: str) -> str:
        return self.servers[shard_for(key, len(self.servers))]
