"""The gateway serves the built console and its API over real HTTP/WS.

Skipped when frontend/dist has not been built (`npm run build`).
"""
from __future__ import annotations

import json
import os
import threading
import time
import urllib.request

import pytest

from daqrc import config as cfg
from daqrc.gateway.app import create_app
from daqrc.procman import PmgDaemon
from daqrc.registry import RegistryClient
from daqrc.runcontrol import RunCommand, boot_partition

from partition_fixtures import small_partition_xml

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DIST = os.path.join(REPO_ROOT, "frontend", "dist")

pytestmark = pytest.mark.skipif(not os.path.isdir(DIST),
                                reason="frontend/dist not built")


@pytest.fixture
def served_stack(registry, tmp_path):
    import uvicorn
    reg = RegistryClient(registry.address, ttl_ms=3000).connect()
    pmg = PmgDaemon(str(tmp_path / "logs"), host_name="localhost", registry=reg)
    config_path = tmp_path / "deploy.xml"
    config_path.write_text(small_partition_xml("web"))
    db = cfg.load(config_path.read_text())
    booted = boot_partition(db, "web", registry.address, str(config_path))

    app = create_app(registry.address, static_dir=DIST)
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=0,
                                           log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started and time.monotonic() < deadline:
        time.sleep(0.05)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}", booted
    booted.shutdown()
    server.should_exit = True
    thread.join(timeout=10)
    pmg.close()
    reg.close()


def test_console_and_api_over_real_http(served_stack):
    base, booted = served_stack

    with urllib.request.urlopen(f"{base}/") as response:
        page = response.read().decode()
    assert response.status == 200 and "daqrc console" in page
    asset = next(part.split('"')[0] for part in page.split('src="')[1:])
    with urllib.request.urlopen(f"{base}{asset}") as response:
        bundle = response.read().decode()
    assert "TRANSITIONING" in bundle  # the FSM table shipped inside the bundle

    with urllib.request.urlopen(f"{base}/api/partitions") as response:
        assert json.loads(response.read())["partitions"] == ["web"]

    request = urllib.request.Request(
        f"{base}/api/partitions/web/command",
        data=json.dumps({"command": "CONFIGURE", "token": "t1"}).encode(),
        headers={"content-type": "application/json"})
    with urllib.request.urlopen(request) as response:
        assert json.loads(response.read())["state"] == "CONFIGURED"

    # websocket event stream through the real server
    import asyncio
    import websockets

    async def collect():
        url = f"{base.replace('http', 'ws')}/api/partitions/web/events"
        async with websockets.connect(url) as ws:
            await asyncio.sleep(0.8)  # feed discovers the node publishers

            def start():
                req = urllib.request.Request(
                    f"{base}/api/partitions/web/command",
                    data=json.dumps({"command": "START"}).encode(),
                    headers={"content-type": "application/json"})
                urllib.request.urlopen(req)

            await asyncio.to_thread(start)
            running = []
            for _ in range(60):
                event = json.loads(await asyncio.wait_for(ws.recv(), 15))
                if event.get("type") == "state" and event.get("state") == "RUNNING":
                    running.append(event["node"])
                    if "web_root" in running:
                        return running
            return running

    running = asyncio.run(collect())
    assert "web_root" in running
    leaf_events = [n for n in running if n != "web_root"]
    assert leaf_events and running.index("web_root") > running.index(leaf_events[0])
