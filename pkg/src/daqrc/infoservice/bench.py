"""Closed-loop load generator for the information service.

Each client keeps `pipeline` requests in flight on one connection for a
fixed duration; results aggregate successful commands/sec and server
ingress bytes/sec, one CSV row per client count. Saturation is the
measurement, not a failure.
"""
from __future__ import annotations

import csv
import struct
import threading
import time
from dataclasses import dataclass

from ..messaging.core import HELLO
from ..messaging.frame import HEADER_LEN, encode_frame
from ..messaging.patterns import Pattern
from ..messaging.transport import FrameStream, connect
from . import protocol as p
from .records import RecordKind

_CID = struct.Struct(">Q")


@dataclass(frozen=True)
class BenchResult:
    clients: int
    pipeline: int
    request_bytes: int
    duration_s: float
    commands: int
    commands_per_sec: float
    bytes_per_sec: float

    def csv_row(self) -> list:
        return [self.clients, self.pipeline, self.request_bytes,
                round(self.duration_s, 3), self.commands,
                round(self.commands_per_sec, 1), round(self.bytes_per_sec, 1)]


CSV_HEADER = ["clients", "pipeline", "request_bytes", "duration_s",
              "commands", "commands_per_sec", "bytes_per_sec"]


def build_request(key: str, request_bytes: int) -> bytes:
    """An upsert frame padded to exactly request_bytes on the wire."""
    base = encode_frame(p.SET_REQ, {"key": key, "kind": int(RecordKind.COUNTER),
                                    "ivalue": 1, "pad": b""})
    # pad field overhead: tag byte + varint length; iterate since the
    # length's varint width depends on the value
    pad_len = max(0, request_bytes - len(base) - 2)
    while True:
        frame = encode_frame(p.SET_REQ, {"key": key, "kind": int(RecordKind.COUNTER),
                                         "ivalue": 1, "pad": b"\x00" * pad_len})
        if len(frame) == request_bytes or pad_len == 0:
            return frame
        pad_len += request_bytes - len(frame)


def _client_loop(address: str, request: bytes, pipeline: int, stop: threading.Event,
                 counts: list, idx: int, ready: threading.Barrier):
    stream = FrameStream(connect(address))
    stream.send_frame(encode_frame(HELLO, {"pattern": int(Pattern.REQUESTER)}))
    prefix, suffix = request[:8], request[16:]
    cid = 0
    acked = 0
    try:
        ready.wait(timeout=30)
        in_flight = 0
        while not stop.is_set():
            while in_flight < pipeline:
                cid += 1
                stream.send_frame(prefix + _CID.pack(cid) + suffix)
                in_flight += 1
            stream.recv_frame(timeout=5)
            acked += 1
            in_flight -= 1
            while stream.has_buffered_frame():
                stream.recv_frame()
                acked += 1
                in_flight -= 1
    except Exception:
        pass
    finally:
        counts[idx] = acked
        stream.close()


def run_bench(address: str, clients: int, request_bytes: int = 2000, pipeline: int = 4,
              duration_s: float = 10.0, key_space: int = 64) -> BenchResult:
    stop = threading.Event()
    counts = [0] * clients
    ready = threading.Barrier(clients + 1)
    threads = []
    for i in range(clients):
        request = build_request(f"bench.c{i}.k{i % key_space}", request_bytes)
        t = threading.Thread(target=_client_loop,
                             args=(address, request, pipeline, stop, counts, i, ready),
                             daemon=True, name=f"bench-client-{i}")
        t.start()
        threads.append(t)
    ready.wait(timeout=30)
    t0 = time.monotonic()
    time.sleep(duration_s)
    stop.set()
    for t in threads:
        t.join(timeout=10)
    elapsed = time.monotonic() - t0
    total = sum(counts)
    rate = total / elapsed
    return BenchResult(clients, pipeline, request_bytes, elapsed, total,
                       rate, rate * request_bytes)


def sweep(address: str, client_counts: list[int], request_bytes: int = 2000,
          pipeline: int = 4, duration_s: float = 10.0,
          csv_path: str | None = None, progress=None) -> list[BenchResult]:
    results = []
    for n in client_counts:
        result = run_bench(address, n, request_bytes, pipeline, duration_s)
        results.append(result)
        if progress is not None:
            progress(result)
    if csv_path:
        with open(csv_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_HEADER)
            for r in results:
                writer.writerow(r.csv_row())
    return results


def monotone_then_plateau(throughputs: list[float], rise_tolerance: float = 0.85,
                          plateau_tolerance: float = 0.75) -> bool:
    """Shape check: non-decreasing (within tolerance) up to the peak, then
    staying within tolerance of the peak."""
    if not throughputs:
        return False
    peak_idx = max(range(len(throughputs)), key=throughputs.__getitem__)
    peak = throughputs[peak_idx]
    running_max = throughputs[0]
    for value in throughputs[1:peak_idx + 1]:
        if value < running_max * rise_tolerance:
            return False
        running_max = max(running_max, value)
    return all(v >= peak * plateau_tolerance for v in throughputs[peak_idx:])
