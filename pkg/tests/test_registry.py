"""Coordination-service semantics: tree ops, leases, watches, reconnection,
and the randomized linearizability check against a sequential oracle."""
from __future__ import annotations

import random
import threading
import time

import pytest

from daqrc.registry import (
    AlreadyExists,
    EventType,
    LeaseExpired,
    NodeNotFound,
    NoParent,
    NotEmpty,
    RegistryClient,
    backoff_delays,
)


@pytest.fixture
def client(registry):
    c = RegistryClient(registry.address, ttl_ms=600).connect()
    yield c
    c.close()


class TestTreeOps:
    def test_sequential_suffixes_from_zero(self, client):
        client.create("/svc/is/candidates", recursive=True)
        first = client.create("/svc/is/candidates/c-", ephemeral=True, sequential=True)
        second = client.create("/svc/is/candidates/c-", ephemeral=True, sequential=True)
        assert first == "/svc/is/candidates/c-0000000000"
        assert second == "/svc/is/candidates/c-0000000001"

    def test_recursive_create(self, client):
        client.create("/a/b/c", recursive=True)
        for path in ("/a", "/a/b", "/a/b/c"):
            found, _ = client.exists(path)
            assert found, path

    def test_create_twice_already_exists(self, client):
        client.create("/a")
        with pytest.raises(AlreadyExists):
            client.create("/a")

    def test_no_parent_without_recursive(self, client):
        with pytest.raises(NoParent):
            client.create("/missing/child")

    def test_set_get(self, client):
        client.create("/x", data=b"one")
        client.set("/x", b"two")
        assert client.get("/x") == b"two"

    def test_get_missing(self, client):
        with pytest.raises(NodeNotFound):
            client.get("/ghost")

    def test_children_sorted(self, client):
        client.create("/svc/q/candidates", recursive=True)
        client.create("/svc/q/candidates/c-", sequential=True)
        client.create("/svc/q/candidates/c-", sequential=True)
        names = client.children("/svc/q/candidates")
        assert names == ["c-0000000000", "c-0000000001"]

    def test_delete_not_empty(self, client):
        client.create("/p/c", recursive=True)
        with pytest.raises(NotEmpty):
            client.delete("/p")
        client.delete("/p/c")
        client.delete("/p")
        assert client.exists("/p")[0] is False

    def test_ephemeral_cannot_have_children(self, client):
        from daqrc.registry import BadRequest
        client.create("/e", ephemeral=True)
        with pytest.raises(BadRequest):
            client.create("/e/child")

    def test_sequential_monotonic_across_clients(self, registry, client):
        other = RegistryClient(registry.address, ttl_ms=600).connect()
        try:
            client.create("/seq", recursive=True)
            paths = []
            for i in range(20):
                c = client if i % 2 == 0 else other
                paths.append(c.create("/seq/n-", sequential=True))
            suffixes = [int(p.rsplit("-", 1)[1]) for p in paths]
            assert suffixes == list(range(20))
            assert all(len(p.rsplit("-", 1)[1]) == 10 for p in paths)
        finally:
            other.close()


class TestWatches:
    def test_data_watch_fires_once(self, client):
        client.create("/w", data=b"0")
        events = []
        client.get("/w", watch=events.append)
        client.set("/w", b"1")
        deadline = time.monotonic() + 2
        while not events and time.monotonic() < deadline:
            time.sleep(0.01)
        assert len(events) == 1
        assert events[0].event is EventType.DATA_CHANGED
        assert events[0].path == "/w"
        client.set("/w", b"2")  # watch already consumed
        time.sleep(0.2)
        assert len(events) == 1

    def test_children_watch(self, client):
        client.create("/cw")
        events = []
        client.children("/cw", watch=events.append)
        client.create("/cw/kid")
        deadline = time.monotonic() + 2
        while not events and time.monotonic() < deadline:
            time.sleep(0.01)
        assert events[0].event is EventType.CHILDREN_CHANGED

    def test_exists_watch_fires_on_create(self, client):
        events = []
        found, _ = client.exists("/future", watch=events.append)
        assert not found
        client.create("/future")
        deadline = time.monotonic() + 2
        while not events and time.monotonic() < deadline:
            time.sleep(0.01)
        assert events[0].event is EventType.CREATED

    def test_delete_watch(self, client):
        client.create("/dw")
        events = []
        client.get("/dw", watch=events.append)
        client.delete("/dw")
        deadline = time.monotonic() + 2
        while not events and time.monotonic() < deadline:
            time.sleep(0.01)
        assert events[0].event is EventType.DELETED

    def test_event_zxids_strictly_increase(self, client):
        client.create("/z", data=b"")
        seen = []
        for i in range(10):
            client.get("/z", watch=seen.append)
            client.set("/z", str(i).encode())
            deadline = time.monotonic() + 2
            while len(seen) < i + 1 and time.monotonic() < deadline:
                time.sleep(0.005)
        zxids = [e.zxid for e in seen]
        assert len(zxids) == 10
        assert zxids == sorted(zxids) and len(set(zxids)) == 10


class TestLeases:
    def test_ephemeral_cleanup_on_expiry(self, registry):
        a = RegistryClient(registry.address, ttl_ms=400).connect()
        b = RegistryClient(registry.address, ttl_ms=5000).connect()
        try:
            a.create("/live", ephemeral=True, data=b"x")
            assert b.exists("/live")[0]
            events = []
            b.get("/live", watch=events.append)
            a.kill()  # crash: no release, lease must time out
            deadline = time.monotonic() + 3
            while not events and time.monotonic() < deadline:
                time.sleep(0.01)
            assert events and events[0].event is EventType.DELETED
            assert b.exists("/live")[0] is False
        finally:
            b.close()

    def test_clean_close_releases_immediately(self, registry):
        a = RegistryClient(registry.address, ttl_ms=5000).connect()
        b = RegistryClient(registry.address, ttl_ms=5000).connect()
        try:
            a.create("/tmp-node", ephemeral=True)
            a.close()
            deadline = time.monotonic() + 2
            while b.exists("/tmp-node")[0] and time.monotonic() < deadline:
                time.sleep(0.01)
            assert b.exists("/tmp-node")[0] is False  # no ttl wait
        finally:
            b.close()

    def test_expired_lease_rejected(self, registry):
        a = RegistryClient(registry.address, ttl_ms=300).connect()
        lease = a.lease_id
        a.kill()
        time.sleep(0.6)
        with pytest.raises(Exception):
            registry.heartbeat(lease)


class TestBackoff:
    def test_geometric_without_jitter(self):
        gen = backoff_delays(100, 5000, jitter=0)
        delays = [next(gen) for _ in range(8)]
        assert delays == [0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 5.0, 5.0]

    def test_jitter_within_20pct(self):
        rng = random.Random(5)
        gen = backoff_delays(100, 5000, jitter=0.2, rng=rng)
        base = [0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 5.0]
        for expected in base:
            got = next(gen)
            assert expected * 0.8 <= got <= expected * 1.2


class TestReconnect:
    def test_blip_resumes_same_lease(self, registry, proxy_factory):
        proxy = proxy_factory(registry.address)
        c = RegistryClient(proxy.address, ttl_ms=3000).connect()
        try:
            lease_before = c.lease_id
            c.create("/mine", ephemeral=True, data=b"still here")
            proxy.sever()  # blip far shorter than ttl
            deadline = time.monotonic() + 5
            while not c.connected and time.monotonic() < deadline:
                time.sleep(0.02)
            assert c.get("/mine") == b"still here"
            assert c.lease_id == lease_before
        finally:
            c.close()

    def test_long_outage_new_lease_and_callbacks(self, registry, proxy_factory):
        proxy = proxy_factory(registry.address)
        c = RegistryClient(proxy.address, ttl_ms=500).connect()
        reestablished = threading.Event()
        c.on_reestablish(reestablished.set)
        try:
            lease_before = c.lease_id
            c.create("/mine", ephemeral=True)
            proxy.block()
            time.sleep(1.2)  # outage longer than ttl: lease expires
            proxy.unblock()
            assert reestablished.wait(10)
            assert c.lease_id != lease_before
            assert c.exists("/mine")[0] is False  # old ephemeral gone
        finally:
            c.close()

    def test_gave_up_after_max_elapsed(self, registry, proxy_factory):
        from daqrc.registry import GaveUp
        proxy = proxy_factory(registry.address)
        c = RegistryClient(proxy.address, ttl_ms=500, max_elapsed_s=0.8).connect()
        try:
            proxy.block()
            deadline = time.monotonic() + 10
            while not c._closed and time.monotonic() < deadline:
                time.sleep(0.05)
            assert c._closed  # reconnect loop gave up
            with pytest.raises(GaveUp):
                c.get("/anything")
        finally:
            c.close()

    def test_watch_rearmed_and_missed_change_synthesized(self, registry, proxy_factory):
        proxy = proxy_factory(registry.address)
        c = RegistryClient(proxy.address, ttl_ms=3000).connect()
        direct = RegistryClient(registry.address, ttl_ms=3000).connect()
        events = []
        try:
            direct.create("/shared", data=b"v1")
            c.get("/shared", watch=events.append)
            proxy.sever()
            direct.set("/shared", b"v2")  # lands while c is disconnected
            deadline = time.monotonic() + 8
            while not events and time.monotonic() < deadline:
                time.sleep(0.02)
            assert events and events[0].event is EventType.DATA_CHANGED
        finally:
            c.close()
            direct.close()


def test_linearizable_against_sequential_oracle(registry):
    """1000+ randomized ops from concurrent clients; replaying the observed
    mutations in zxid order through a sequential in-memory oracle must
    reproduce both the per-op results and the server's final tree."""
    from daqrc.registry import protocol as proto

    class Oracle:
        def __init__(self):
            self.tree: dict[str, bytes] = {"/lin": b""}
            self.seq: dict[str, int] = {}

        def create(self, path, data, sequential):
            parent = path.rsplit("/", 1)[0] or "/"
            assert parent in self.tree, f"oracle: create under missing {parent}"
            if sequential:
                n = self.seq.get(parent, 0)
                self.seq[parent] = n + 1
                path = f"{path}{n:010d}"
            assert path not in self.tree, f"oracle: {path} already exists"
            self.tree[path] = data
            return path

        def set(self, path, data):
            assert path in self.tree, f"oracle: set on missing {path}"
            self.tree[path] = data

        def delete(self, path):
            assert path in self.tree, f"oracle: delete on missing {path}"
            del self.tree[path]

    clients = [RegistryClient(registry.address, ttl_ms=10000).connect() for _ in range(3)]
    clients[0].create("/lin")
    history = []
    hist_lock = threading.Lock()

    def worker(seed, client):
        rng = random.Random(seed)
        for _ in range(334):
            roll = rng.random()
            name = f"/lin/k{rng.randint(0, 20)}"
            try:
                if roll < 0.45:
                    seq = rng.random() < 0.3
                    reply = client._call(proto.CREATE_REQ, {
                        "path": name + ("-" if seq else ""), "data": b"c",
                        "sequential": int(seq)})
                    with hist_lock:
                        history.append((reply["zxid"], "create",
                                        name + ("-" if seq else ""), seq, reply["path"]))
                elif roll < 0.75:
                    data = bytes([rng.randint(0, 255)])
                    zxid = client.set(name, data)
                    with hist_lock:
                        history.append((zxid, "set", name, data))
                elif roll < 0.9:
                    zxid = client.delete(name)
                    with hist_lock:
                        history.append((zxid, "delete", name))
                else:
                    client.exists(name)
            except Exception:
                pass

    threads = [threading.Thread(target=worker, args=(i, c)) for i, c in enumerate(clients)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for c in clients:
        c.close()

    assert len(history) >= 300  # enough successful mutations to be meaningful
    zxids = [h[0] for h in history]
    assert len(zxids) == len(set(zxids)), "zxids must be unique"

    oracle = Oracle()
    for entry in sorted(history, key=lambda h: h[0]):
        if entry[1] == "create":
            _, _, req_path, seq, got_path = entry
            assert oracle.create(req_path, b"c", seq) == got_path
        elif entry[1] == "set":
            oracle.set(entry[2], entry[3])
        else:
            oracle.delete(entry[2])

    server_tree = {path: data for path, data in registry.dump_tree().items()
                   if path.startswith("/lin")}
    assert server_tree == oracle.tree
