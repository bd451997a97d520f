"""Shared fixtures: registry server, flaky TCP proxy for outage injection."""
from __future__ import annotations

import socket
import threading

import pytest

from daqrc.registry.server import RegistryServer


@pytest.fixture
def registry():
    server = RegistryServer()
    yield server
    server.close()


class FlakyProxy:
    """TCP forwarder that can sever live pipes and refuse new connections,
    simulating a network outage between a client and a server."""

    def __init__(self, target_address: str):
        host, _, port = target_address.rpartition(":")
        self._target = (host, int(port))
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind(("127.0.0.1", 0))
        self._listener.listen(64)
        self.address = "127.0.0.1:%d" % self._listener.getsockname()[1]
        self._blocked = False
        self._closed = False
        self._pipes: set[socket.socket] = set()
        self._lock = threading.Lock()
        threading.Thread(target=self._accept_loop, daemon=True).start()

    def _accept_loop(self):
        while not self._closed:
            try:
                client, _ = self._listener.accept()
            except OSError:
                return
            if self._blocked:
                client.close()
                continue
            try:
                upstream = socket.create_connection(self._target, timeout=2)
            except OSError:
                client.close()
                continue
            with self._lock:
                self._pipes.update((client, upstream))
            threading.Thread(target=self._pump, args=(client, upstream), daemon=True).start()
            threading.Thread(target=self._pump, args=(upstream, client), daemon=True).start()

    def _pump(self, src: socket.socket, dst: socket.socket):
        try:
            while True:
                data = src.recv(65536)
                if not data:
                    break
                dst.sendall(data)
        except OSError:
            pass
        for s in (src, dst):
            try:
                s.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            s.close()
        with self._lock:
            self._pipes.discard(src)
            self._pipes.discard(dst)

    def sever(self):
        """Drop all live connections (new ones still accepted)."""
        with self._lock:
            pipes = list(self._pipes)
            self._pipes.clear()
        for s in pipes:
            try:
                s.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            s.close()

    def block(self):
        self._blocked = True
        self.sever()

    def unblock(self):
        self._blocked = False

    def close(self):
        self._closed = True
        self._listener.close()
        self.sever()


@pytest.fixture
def proxy_factory():
    proxies = []

    def make(target_address: str) -> FlakyProxy:
        proxy = FlakyProxy(target_address)
        proxies.append(proxy)
        return proxy

    yield make
    for proxy in proxies:
        proxy.close()
