"""Operator gateway: JSON over HTTP plus a WebSocket event stream.

A pure view layer: trees come from registry node entries, command reports
from the partition's root controller, info records from the information
service. The gateway holds no state of its own beyond live subscriptions
and a short idempotency cache for command deduplication.
"""
from __future__ import annotations

import asyncio
import json
import threading
import time

from fastapi import FastAPI, Query, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from ..infoservice.client import InfoClient, registry_events_addresses, shard_map_from_registry
from ..messaging.frame import decode_payload
from ..messaging.patterns import Subscriber
from ..messaging.transport import MessagingError, Timeout
from ..registry.client import NodeNotFound, NoMaster, RegistryClient
from ..runcontrol import protocol as rcp
from ..runcontrol.boot import CommandRefused, RootHandle
from ..runcontrol.fsm import RunCommand, RunState
from ..runcontrol.view import UnknownPartition, list_partitions, tree_snapshot

IDEMPOTENCY_WINDOW_S = 60.0


class GatewayContext:
    def __init__(self, registry_address: str):
        self.registry_address = registry_address
        self.registry = RegistryClient(registry_address).connect()
        self._roots: dict[str, RootHandle] = {}
        self._idempotency: dict[str, tuple[float, dict]] = {}
        self._lock = threading.Lock()

    def close(self):
        for handle in self._roots.values():
            handle.close()
        self.registry.close()

    # ----------------------------------------------------------------- reads

    def partitions(self) -> list[str]:
        return list_partitions(self.registry)

    def tree(self, partition: str) -> dict:
        return tree_snapshot(self.registry, partition)

    def info(self, prefix: str, dest: str | None) -> list[dict]:
        dests = [dest] if dest else self._known_destinations()
        records = []
        for d in dests:
            try:
                shard_map = shard_map_from_registry(self.registry, d)
            except NoMaster:
                continue
            client = InfoClient(shard_map)
            try:
                for record in client.query_prefix(prefix):
                    records.append(record_json(d, record))
            finally:
                client.close()
        records.sort(key=lambda r: r["key"])
        return records

    def _known_destinations(self) -> list[str]:
        try:
            names = self.registry.children("/services")
        except NodeNotFound:
            return []
        dests = set()
        for name in names:
            if name.startswith("is."):
                parts = name.split(".")
                if len(parts) == 3:
                    dests.add(parts[1])
        return sorted(dests)

    # -------------------------------------------------------------- commands

    def _root_handle(self, partition: str) -> RootHandle:
        with self._lock:
            handle = self._roots.get(partition)
            if handle is None:
                snapshot = self.tree(partition)
                roots = [n for n in snapshot["nodes"] if n["parent"] is None]
                if not roots:
                    raise UnknownPartition(partition)
                handle = RootHandle(self.registry, partition, roots[0]["id"])
                self._roots[partition] = handle
            return handle

    def command(self, partition: str, command_name: str, run_number: int,
                issued_by: str, token: str | None) -> dict:
        now = time.monotonic()
        if token:
            with self._lock:
                self._idempotency = {t: v for t, v in self._idempotency.items()
                                     if v[0] > now}
                cached = self._idempotency.get(token)
            if cached:
                return cached[1]
        handle = self._root_handle(partition)
        report = handle.dispatch(RunCommand[command_name], run_number)
        response = {
            "partition": partition,
            "command": command_name,
            "issued_by": issued_by,
            "state": report.state.name,
            "run_number": report.run_number,
            "reports": [
                {"path": r.path,
                 "old_state": r.old_state.name if r.old_state else None,
                 "new_state": r.new_state.name,
                 "error": r.error}
                for r in report.reports
            ],
        }
        if token:
            with self._lock:
                self._idempotency[token] = (now + IDEMPOTENCY_WINDOW_S, response)
        return response


def record_json(dest: str, record) -> dict:
    from ..infoservice.records import ErrorInfo, Histogram, RecordKind
    value = record.value
    if isinstance(value, Histogram):
        value = {"edges": list(value.edges), "counts": list(value.counts)}
    elif isinstance(value, ErrorInfo):
        value = {"severity": value.severity.name, "text": value.text}
    return {"dest": dest, "key": record.key, "kind": record.kind.name,
            "value": value, "source": record.source, "seq": record.seq,
            "updated_at": record.updated_at}


class _EventFeed:
    """Merges a partition's state events and matching info updates into one
    thread-safe queue for a WebSocket connection."""

    def __init__(self, ctx: GatewayContext, partition: str, filters: list[str]):
        import queue as _queue
        self.queue: _queue.Queue = _queue.Queue(maxsize=10_000)
        self._ctx = ctx
        self._partition = partition
        self._closed = False
        self._state_sub = Subscriber(prefixes=(f"state.{partition}.".encode(),))
        self._info_sub: Subscriber | None = None
        self._connected_pubs: set[str] = set()
        threading.Thread(target=self._track_nodes, daemon=True).start()
        threading.Thread(target=self._pump, args=(self._state_sub, "state"),
                         daemon=True).start()
        if filters:
            self._subscribe_info(filters)

    def _subscribe_info(self, filters: list[str]):
        prefixes = []
        addresses = set()
        for dest in self._ctx._known_destinations():
            for f in filters:
                prefixes.append(f"is.{dest}.{f}".encode())
            for addr in registry_events_addresses(self._ctx.registry, dest):
                addresses.add(addr)
        if not addresses:
            return
        self._info_sub = Subscriber(prefixes=tuple(prefixes))
        for addr in addresses:
            try:
                self._info_sub.connect(addr)
            except MessagingError:
                pass
        threading.Thread(target=self._pump, args=(self._info_sub, "info"),
                         daemon=True).start()

    def _track_nodes(self):
        """Connect to every node publisher of the partition as nodes appear."""
        base = rcp.nodes_base(self._partition)
        while not self._closed:
            try:
                names = self._ctx.registry.children(base)
            except Exception:
                names = []
            for name in names:
                try:
                    found, data = self._ctx.registry.exists(
                        rcp.node_path(self._partition, name))
                    if not found:
                        continue
                    pub = json.loads(data).get("pub")
                    if pub and pub not in self._connected_pubs:
                        self._state_sub.connect(pub)
                        self._connected_pubs.add(pub)
                except Exception:
                    continue
            time.sleep(0.5)

    def _pump(self, subscriber: Subscriber, kind: str):
        while not self._closed:
            try:
                topic, raw = subscriber.recv(timeout=0.5)
            except Timeout:
                continue
            except MessagingError:
                return
            try:
                event = self._decode(kind, topic, raw)
            except MessagingError:
                continue
            try:
                self.queue.put_nowait(event)
            except Exception:
                pass

    def _decode(self, kind: str, topic: bytes, raw) -> dict:
        if kind == "state":
            values = decode_payload(rcp.STATE_EVENT, raw.payload)
            return {"type": "state", "partition": values["partition"],
                    "node": values["node"], "state": RunState(values["state"]).name,
                    "run_number": values.get("run_number", 0),
                    "at": values.get("at_us", 0) / 1e6}
        from ..infoservice import protocol as isp
        values = decode_payload(isp.EVENT, raw.payload)
        record = isp.record_from_wire(values["record"])
        dest = topic.decode().split(".", 2)[1]
        return {"type": "info", **record_json(dest, record)}

    def close(self):
        self._closed = True
        self._state_sub.close()
        if self._info_sub is not None:
            self._info_sub.close()


def create_app(registry_address: str, static_dir: str | None = None) -> FastAPI:
    from contextlib import asynccontextmanager

    ctx = GatewayContext(registry_address)

    @asynccontextmanager
    async def lifespan(_app):
        yield
        ctx.close()

    app = FastAPI(title="daqrc gateway", lifespan=lifespan)
    app.state.ctx = ctx

    @app.get("/api/partitions")
    def get_partitions():
        return {"partitions": ctx.partitions()}

    @app.get("/api/partitions/{partition}/tree")
    def get_tree(partition: str):
        try:
            return ctx.tree(partition)
        except UnknownPartition:
            return JSONResponse({"error": f"unknown partition {partition!r}"},
                                status_code=404)

    @app.post("/api/partitions/{partition}/command")
    async def post_command(partition: str, request: Request):
        body = await request.json()
        command_name = str(body.get("command", ""))
        if command_name not in RunCommand.__members__:
            return JSONResponse({"error": f"unknown command {command_name!r}"},
                                status_code=400)
        try:
            response = await asyncio.to_thread(
                ctx.command, partition, command_name,
                int(body.get("run_number", 0)),
                str(body.get("issued_by", "anonymous")),
                body.get("token"))
            return response
        except UnknownPartition:
            return JSONResponse({"error": f"unknown partition {partition!r}"},
                                status_code=404)
        except CommandRefused as e:
            if e.code == int(rcp.ErrorCode.ILLEGAL_TRANSITION):
                return JSONResponse({"error": e.text}, status_code=409)
            return JSONResponse({"error": e.text}, status_code=503)
        except (NoMaster, MessagingError) as e:
            return JSONResponse({"error": str(e)}, status_code=503)

    @app.get("/api/info")
    def get_info(prefix: str = Query(default=""), dest: str | None = Query(default=None)):
        return {"records": ctx.info(prefix, dest)}

    @app.websocket("/api/partitions/{partition}/events")
    async def ws_events(websocket: WebSocket, partition: str,
                        filter: str = Query(default="")):
        await websocket.accept()
        import re as _re
        filters = [f for f in filter.split(",") if f] if filter else []
        if any(not _re.fullmatch(r"[A-Za-z0-9_.\-]+", f) for f in filters):
            await websocket.close(code=1008, reason="malformed filter prefix")
            return
        feed = _EventFeed(ctx, partition, filters)
        seq = 0
        try:
            while True:
                try:
                    event = await asyncio.to_thread(feed.queue.get, True, 2.0)
                except Exception:
                    event = {"type": "heartbeat"}
                seq += 1
                event["seq"] = seq
                await websocket.send_json(event)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            feed.close()

    if static_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
