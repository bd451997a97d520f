"""Information-service client: sharded publish/query and subscriptions."""
from __future__ import annotations

import json

from ..messaging.frame import decode_payload, encode_frame
from ..messaging.patterns import Requester, RequestFailed, Subscriber
from ..messaging.transport import MessagingError
from ..registry.client import NoMaster, RegistryClient
from . import protocol as p
from .records import InfoRecord, MalformedRecord
from .sharding import ShardMap, shard_for


class WrongShard(Exception):
    pass


class InfoClient:
    def __init__(self, shard_map: ShardMap | list[str] | str, timeout: float = 5.0):
        if isinstance(shard_map, str):
            shard_map = ShardMap("direct", (shard_map,))
        elif isinstance(shard_map, (list, tuple)):
            shard_map = ShardMap("direct", tuple(shard_map))
        self.shard_map = shard_map
        self._timeout = timeout
        self._requesters: dict[str, Requester] = {}

    def _requester(self, address: str) -> Requester:
        req = self._requesters.get(address)
        if req is None:
            req = Requester(address, timeout=self._timeout)
            self._requesters[address] = req
        return req

    def _request(self, address: str, data: bytes):
        try:
            return self._requester(address).request(data)
        except RequestFailed as e:
            if e.code == p.ErrorCode.MALFORMED_RECORD:
                raise MalformedRecord(e.text) from None
            if e.code == p.ErrorCode.WRONG_SHARD:
                raise WrongShard(e.text) from None
            raise

    def publish(self, record: InfoRecord, pad: bytes = b"") -> int:
        """Upsert; returns the server-assigned per-key seq."""
        values = p.record_to_wire(record)
        if pad:
            values["pad"] = pad
        address = self.shard_map.server_for(record.key)
        reply = self._request(address, encode_frame(p.SET_REQ, values))
        return decode_payload(p.SET_REP, reply.payload)["seq"]

    def publish_async(self, record: InfoRecord, pad: bytes = b""):
        """Pipelined upsert: returns a pending handle; .result(timeout) gives
        the ack values."""
        values = p.record_to_wire(record)
        if pad:
            values["pad"] = pad
        address = self.shard_map.server_for(record.key)
        return self._requester(address).request_async(encode_frame(p.SET_REQ, values))

    def query(self, key: str) -> InfoRecord | None:
        address = self.shard_map.server_for(key)
        reply = self._request(address, encode_frame(p.QUERY_REQ, {"key": key}))
        records = decode_payload(p.QUERY_REP, reply.payload).get("records", [])
        return p.record_from_wire(records[0]) if records else None

    def query_prefix(self, prefix: str) -> list[InfoRecord]:
        """Fan out to every shard and merge, sorted by key."""
        merged: list[InfoRecord] = []
        for address in self.shard_map.servers:
            reply = self._request(address, encode_frame(p.QUERY_REQ,
                                                        {"key": prefix, "prefix": 1}))
            for values in decode_payload(p.QUERY_REP, reply.payload).get("records", []):
                merged.append(p.record_from_wire(values))
        merged.sort(key=lambda r: r.key)
        return merged

    def meta(self, address: str) -> dict:
        reply = self._request(address, encode_frame(p.META_REQ, {}))
        return decode_payload(p.META_REP, reply.payload)

    def subscribe(self, key_prefix: str) -> "InfoSubscription":
        """Stream of updates whose key starts with the prefix, across all
        shards; no history is replayed."""
        metas = [self.meta(address) for address in self.shard_map.servers]
        subscriber = Subscriber(
            prefixes=(f"is.{metas[0]['dest']}.{key_prefix}".encode(),))
        for meta in metas:
            subscriber.connect(meta["events_address"])
        return InfoSubscription(subscriber)

    def close(self):
        for req in self._requesters.values():
            req.close()
        self._requesters.clear()


class InfoSubscription:
    def __init__(self, subscriber: Subscriber):
        self._subscriber = subscriber

    def recv(self, timeout: float | None = None) -> InfoRecord:
        _, raw = self._subscriber.recv(timeout=timeout)
        values = decode_payload(p.EVENT, raw.payload)
        return p.record_from_wire(values["record"])

    def close(self):
        self._subscriber.close()


def shard_map_from_registry(registry: RegistryClient, dest: str,
                            timeout: float = 5.0) -> ShardMap:
    """Build the shard map for a destination from per-shard master nodes."""
    try:
        names = registry.children("/services")
    except Exception:
        raise NoMaster(dest) from None
    indexed: list[tuple[int, str]] = []
    prefix = f"is.{dest}."
    for name in names:
        if not name.startswith(prefix):
            continue
        try:
            index = int(name[len(prefix):])
        except ValueError:
            continue
        found, data = registry.exists(f"/services/{name}/master")
        if not found:
            raise NoMaster(name)
        indexed.append((index, json.loads(data)["addr"]))
    if not indexed:
        raise NoMaster(dest)
    indexed.sort()
    return ShardMap(dest, tuple(addr for _, addr in indexed))


def registry_events_addresses(registry: RegistryClient, dest: str) -> list[str]:
    """Event-publisher addresses for every shard of a destination."""
    out = []
    prefix = f"is.{dest}."
    for name in registry.children("/services"):
        if name.startswith(prefix):
            found, data = registry.exists(f"/services/{name}/master")
            if found:
                out.append(json.loads(data)["events"])
    return out
