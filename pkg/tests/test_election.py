"""Master/slave election: promotion, predecessor watching, discovery."""
from __future__ import annotations

import time

import pytest

from daqrc.registry import (
    Election,
    MasterWatch,
    NoMaster,
    RegistryClient,
    Role,
    discover,
)


def make_client(registry, ttl_ms=500):
    return RegistryClient(registry.address, ttl_ms=ttl_ms).connect()


class TestElection:
    def test_single_candidate_is_master(self, registry):
        c = make_client(registry)
        try:
            election = Election(c, "svc1", b"127.0.0.1:7100").start()
            assert election.wait_for_role(Role.MASTER, timeout=5)
            assert discover(c, "svc1") == b"127.0.0.1:7100"
        finally:
            c.close()

    def test_second_candidate_is_slave_watching_predecessor(self, registry):
        a, b = make_client(registry), make_client(registry)
        try:
            ea = Election(a, "svc2", b"addr-a").start()
            assert ea.wait_for_role(Role.MASTER, timeout=5)
            eb = Election(b, "svc2", b"addr-b").start()
            assert eb.wait_for_role(Role.SLAVE, timeout=5)
            change = eb.roles.get(timeout=2)
            assert change.role is Role.SLAVE
            assert change.watching.endswith("c-0000000000")
        finally:
            a.close()
            b.close()

    def test_promotion_after_master_crash(self, registry):
        ttl = 500
        a, b = make_client(registry, ttl), make_client(registry, ttl)
        try:
            ea = Election(a, "svc3", b"addr-a").start()
            assert ea.wait_for_role(Role.MASTER, timeout=5)
            eb = Election(b, "svc3", b"addr-b").start()
            assert eb.wait_for_role(Role.SLAVE, timeout=5)

            t0 = time.monotonic()
            a.kill()
            assert eb.wait_for_role(Role.MASTER, timeout=5)
            latency = time.monotonic() - t0
            # promotion must wait for lease expiry but come soon after
            assert latency < 2 * ttl / 1000 + 0.5
            assert discover(b, "svc3") == b"addr-b"
        finally:
            b.close()

    def test_clean_resign_promotes_quickly(self, registry):
        a, b = make_client(registry, 5000), make_client(registry, 5000)
        try:
            ea = Election(a, "svc4", b"addr-a").start()
            assert ea.wait_for_role(Role.MASTER, timeout=5)
            eb = Election(b, "svc4", b"addr-b").start()
            assert eb.wait_for_role(Role.SLAVE, timeout=5)
            t0 = time.monotonic()
            ea.resign()
            assert eb.wait_for_role(Role.MASTER, timeout=5)
            assert time.monotonic() - t0 < 1.0  # no ttl wait on clean exit
        finally:
            a.close()
            b.close()

    def test_middle_candidate_death_no_spurious_promotion(self, registry):
        ttl = 400
        a, b, c = (make_client(registry, ttl) for _ in range(3))
        try:
            ea = Election(a, "svc5", b"addr-a").start()
            assert ea.wait_for_role(Role.MASTER, timeout=5)
            eb = Election(b, "svc5", b"addr-b").start()
            assert eb.wait_for_role(Role.SLAVE, timeout=5)
            ec = Election(c, "svc5", b"addr-c").start()
            assert ec.wait_for_role(Role.SLAVE, timeout=5)

            b.kill()  # middle one dies
            time.sleep(2 * ttl / 1000 + 0.5)
            assert ea.role is Role.MASTER  # unchanged
            assert ec.role is Role.SLAVE  # no spurious promotion
            # c must now watch a's candidate directly: kill a, c promotes
            a.kill()
            assert ec.wait_for_role(Role.MASTER, timeout=5)
        finally:
            c.close()

    def test_master_demotes_itself_on_lost_session(self, registry, proxy_factory):
        proxy = proxy_factory(registry.address)
        a = RegistryClient(proxy.address, ttl_ms=400).connect()
        try:
            ea = Election(a, "svc6", b"addr-a").start()
            assert ea.wait_for_role(Role.MASTER, timeout=5)
            proxy.block()  # cut off from the registry
            assert ea.wait_for_role(Role.SLAVE, timeout=5)  # self-demotion inside ttl
        finally:
            proxy.unblock()
            a.close()


class TestDiscovery:
    def test_no_master(self, registry):
        c = make_client(registry)
        try:
            with pytest.raises(NoMaster):
                discover(c, "ghost-service")
        finally:
            c.close()

    def test_failover_stream_order(self, registry):
        ttl = 400
        a, b, watcher = (make_client(registry, ttl) for _ in range(3))
        try:
            watch = MasterWatch(watcher, "svc7").start()
            ea = Election(a, "svc7", b"addr-old").start()
            assert ea.wait_for_role(Role.MASTER, timeout=5)
            eb = Election(b, "svc7", b"addr-new").start()
            assert eb.wait_for_role(Role.SLAVE, timeout=5)
            a.kill()
            assert eb.wait_for_role(Role.MASTER, timeout=5)

            seen = []
            deadline = time.monotonic() + 5
            while time.monotonic() < deadline and b"addr-new" not in seen:
                try:
                    item = watch.updates.get(timeout=0.2)
                    if item is not None:
                        seen.append(item)
                except Exception:
                    pass
            assert seen == [b"addr-old", b"addr-new"]
        finally:
            b.close()
            watcher.close()

    def test_re_election_after_new_session(self, registry, proxy_factory):
        """An outage longer than the ttl gives a fresh lease; the election
        re-enters automatically and the candidate becomes master again."""
        proxy = proxy_factory(registry.address)
        a = RegistryClient(proxy.address, ttl_ms=400).connect()
        try:
            ea = Election(a, "svc8", b"addr-a").start()
            assert ea.wait_for_role(Role.MASTER, timeout=5)
            lease_before = a.lease_id
            proxy.block()
            time.sleep(1.0)  # lease expires
            proxy.unblock()
            deadline = time.monotonic() + 10
            while a.lease_id == lease_before and time.monotonic() < deadline:
                time.sleep(0.05)
            assert a.lease_id != lease_before
            assert ea.wait_for_role(Role.MASTER, timeout=10)
            assert discover(a, "svc8") == b"addr-a"
        finally:
            a.close()
