"""Dummy leaf application for fixtures and integration runs.

Environment knobs (all optional):
  DAQRC_DUMMY_FAIL_ON=CONFIGURE   raise inside that command's callback
  DAQRC_DUMMY_HANG_ON=START       block inside that command's callback
  DAQRC_DUMMY_RATE_KEY=a.b.rate   publish a 1 Hz counter while RUNNING
  DAQRC_IS_ADDR=host:port         info-service server for the counter
"""
from __future__ import annotations

import argparse
import os
import sys
import threading
import time


class DummyCallbacks:
    def __init__(self, fail_on: str, hang_on: str, rate_key: str, is_addr: str,
                 source: str):
        self._fail_on = fail_on
        self._hang_on = hang_on
        self._rate_key = rate_key
        self._is_addr = is_addr
        self._source = source
        self._running = threading.Event()
        self._count = 0
        if rate_key and is_addr:
            threading.Thread(target=self._pump, daemon=True).start()

    def _gate(self, command: str):
        if self._fail_on == command:
            raise RuntimeError(f"injected failure on {command}")
        if self._hang_on == command:
            time.sleep(3600)

    def on_boot(self):
        self._gate("BOOT")

    def on_configure(self):
        self._gate("CONFIGURE")

    def on_start(self, run_number: int):
        self._gate("START")
        self._running.set()

    def on_pause(self):
        self._gate("PAUSE")
        self._running.clear()

    def on_resume(self):
        self._gate("RESUME")
        self._running.set()

    def on_stop(self):
        self._gate("STOP")
        self._running.clear()

    def on_unconfigure(self):
        self._gate("UNCONFIGURE")

    def on_shutdown(self):
        self._gate("SHUTDOWN")

    def _pump(self):
        from ..infoservice import InfoClient, InfoRecord, RecordKind
        client = InfoClient(self._is_addr)
        while True:
            time.sleep(1.0)
            if not self._running.is_set():
                continue
            self._count += 1
            try:
                client.publish(InfoRecord(self._rate_key, RecordKind.COUNTER,
                                          self._count, source=self._source))
            except Exception:
                pass


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="dummy tree leaf")
    parser.add_argument("--partition", default=os.environ.get("DAQRC_PARTITION"))
    parser.add_argument("--object", default=os.environ.get("DAQRC_OBJECT"))
    parser.add_argument("--config", default=os.environ.get("DAQRC_CONFIG"))
    parser.add_argument("--registry", default=os.environ.get("DAQRC_REGISTRY"))
    args = parser.parse_args(argv)
    if not all([args.partition, args.object, args.registry]):
        parser.error("--partition, --object and --registry are required "
                     "(or their DAQRC_* environment fallbacks)")

    from ..config import load, resolve_partition
    from ..registry.client import RegistryClient
    from ..runcontrol.leaf import LeafApp

    parent = None
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            db = load(f.read())
        view = resolve_partition(db, args.partition)
        parent = view.controller_assignments.get(args.object)

    callbacks = DummyCallbacks(
        fail_on=os.environ.get("DAQRC_DUMMY_FAIL_ON", ""),
        hang_on=os.environ.get("DAQRC_DUMMY_HANG_ON", ""),
        rate_key=os.environ.get("DAQRC_DUMMY_RATE_KEY", ""),
        is_addr=os.environ.get("DAQRC_IS_ADDR", ""),
        source=args.object,
    )
    registry = RegistryClient(args.registry).connect()
    app = LeafApp(args.partition, args.object, registry, callbacks, parent=parent)
    app.start()
    app.wait_for_shutdown()
    time.sleep(0.3)  # let the final reply and state event drain
    app.close()
    registry.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
