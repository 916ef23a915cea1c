"""Local HTTP analog of the always-on random number service.

Endpoints:
    GET /random?type={uniform|gaussian|rayleigh}&bytes=N
        uniform  -> packed bits, application/octet-stream
        gaussian -> little-endian int16 fixed-point values, application/x-int16-le
        rayleigh -> little-endian float32 values, application/x-float32-le,
                    flagged X-Data-Quality: denoised-raw-uncertified
    GET /health
        JSON summary: latest certification, buffer fill, served offsets.

Uniform bytes are only served from blocks extracted under a fresh
certification and gated through the internal bit-test subset; buffers
that fail the gate are discarded and counted. Every byte is served at
most once (monotone per-type served offsets). Plaintext HTTP, no auth:
this is a demonstration analog, not a hardened service.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from .bits import BitBlock
from .config import PipelineConfig
from .pipeline import Pipeline
from .stats import MIN_BITS, bit_tests

GATE_CHUNK_BYTES = MIN_BITS // 8  # uniform bytes per bit-test gate evaluation


class _ByteBuffer:
    """Bounded FIFO byte store with a monotone served-offset counter."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._chunks: list[bytes] = []
        self._size = 0
        self.served_offset = 0
        self.lock = threading.Lock()
        self.not_full = threading.Condition(self.lock)
        self.not_empty = threading.Condition(self.lock)

    def available(self) -> int:
        with self.lock:
            return self._size

    def put(self, data: bytes, stop_flag) -> None:
        # backpressure: block the producer instead of dropping extracted bytes
        with self.not_full:
            while self._size + len(data) > self.capacity and not stop_flag.is_set():
                self.not_full.wait(timeout=0.1)
            if stop_flag.is_set():
                return
            self._chunks.append(data)
            self._size += len(data)
            self.not_empty.notify_all()

    def take(self, nbytes: int, timeout: float) -> bytes | None:
        with self.not_empty:
            if not self.not_empty.wait_for(lambda: self._size >= nbytes, timeout=timeout):
                return None
            out = bytearray()
            while len(out) < nbytes:
                chunk = self._chunks[0]
                need = nbytes - len(out)
                if len(chunk) <= need:
                    out += chunk
                    self._chunks.pop(0)
                else:
                    out += chunk[:need]
                    self._chunks[0] = chunk[need:]
            self._size -= nbytes
            self.served_offset += nbytes
            self.not_full.notify_all()
            return bytes(out)


@dataclass
class _TypeState:
    buffer: _ByteBuffer
    content_type: str


class RandomService:
    """Pipeline-backed bit server. start() returns once the port is bound."""

    def __init__(self, config: PipelineConfig, producer_enabled: bool = True):
        self.config = config
        self.producer_enabled = producer_enabled
        self._stop = threading.Event()
        self.pipeline: Pipeline | None = None
        self.discarded_buffers = 0
        self.gate_results = 0
        cap = config.buffer_bytes
        self.types = {
            "uniform": _TypeState(_ByteBuffer(cap), "application/octet-stream"),
            "gaussian": _TypeState(_ByteBuffer(cap), "application/x-int16-le"),
            "rayleigh": _TypeState(_ByteBuffer(cap), "application/x-float32-le"),
        }
        self._httpd: ThreadingHTTPServer | None = None
        self._threads: list[threading.Thread] = []
        self._pending_uniform = bytearray()

    # -- producer ----------------------------------------------------------

    def _gate_uniform(self, chunk: bytes) -> bool:
        reports = bit_tests(BitBlock.from_bytes(chunk), alpha=self.config.gate_alpha)
        self.gate_results += 1
        return all(r.passed for r in reports)

    def _estimated_batch_bytes(self, rtype: str, batch_blocks: int) -> int:
        assert self.pipeline is not None
        samples = batch_blocks * self.pipeline.samples_per_block
        if rtype == "uniform":
            return batch_blocks * 2 * self.config.block_m // 8 + GATE_CHUNK_BYTES
        if rtype == "gaussian":
            return 2 * samples * 2 + self.config.pool_size * 2
        return samples * 4 + 16

    def _produce(self) -> None:
        assert self.pipeline is not None
        batch_blocks = 512
        while not self._stop.is_set():
            # materialize only output types whose buffers have room (pure
            # routing); consume no raw samples at all when nothing has room
            want = {
                t for t, state in self.types.items()
                if state.buffer.available() + self._estimated_batch_bytes(t, batch_blocks)
                <= self.config.buffer_bytes
            }
            if not want:
                self._stop.wait(timeout=0.05)
                continue
            batch = self.pipeline.process_blocks(batch_blocks, want=want)
            self._pending_uniform += batch.uniform
            while len(self._pending_uniform) >= GATE_CHUNK_BYTES:
                chunk = bytes(self._pending_uniform[:GATE_CHUNK_BYTES])
                del self._pending_uniform[:GATE_CHUNK_BYTES]
                if self._gate_uniform(chunk):
                    self.types["uniform"].buffer.put(chunk, self._stop)
                else:
                    self.discarded_buffers += 1
            if batch.gaussian_i.size or batch.gaussian_q.size:
                inter = np.empty(batch.gaussian_i.size + batch.gaussian_q.size, dtype=np.int64)
                inter[0::2] = batch.gaussian_i
                inter[1::2] = batch.gaussian_q
                # left-justify n_out bits in an int16 payload
                shift = 16 - self.pipeline.n_out
                self.types["gaussian"].buffer.put(
                    (inter << shift).astype("<i2").tobytes(), self._stop
                )
            if batch.rayleigh.size:
                self.types["rayleigh"].buffer.put(
                    batch.rayleigh.astype("<f4").tobytes(), self._stop
                )

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        self.pipeline = Pipeline(self.config)
        host, _, port = self.config.listen.rpartition(":")
        service = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # quiet
                pass

            def do_GET(self):  # noqa: N802 (stdlib handler API)
                service._handle(self)

        self._httpd = ThreadingHTTPServer((host or "127.0.0.1", int(port or 0)), Handler)
        self._httpd.daemon_threads = True
        t = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        t.start()
        self._threads.append(t)
        if self.producer_enabled:
            p = threading.Thread(target=self._produce, daemon=True)
            p.start()
            self._threads.append(p)

    @property
    def port(self) -> int:
        assert self._httpd is not None
        return self._httpd.server_address[1]

    def stop(self) -> None:
        self._stop.set()
        if self._httpd:
            self._httpd.shutdown()
            self._httpd.server_close()
        for t in self._threads:
            t.join(timeout=5)

    # -- request handling ----------------------------------------------------

    def _handle(self, req: BaseHTTPRequestHandler) -> None:
        url = urlparse(req.path)
        if url.path == "/health":
            self._send_json(req, 200, self._health())
            return
        if url.path != "/random":
            self._send_json(req, 404, {"error": "unknown path"})
            return
        query = parse_qs(url.query)
        rtype = query.get("type", [""])[0]
        if rtype not in self.types:
            self._send_json(req, 400, {"error": f"bad type {rtype!r}"})
            return
        try:
            nbytes = int(query.get("bytes", ["0"])[0])
        except ValueError:
            self._send_json(req, 400, {"error": "bytes must be an integer"})
            return
        if nbytes <= 0 or nbytes > self.config.max_request_bytes:
            self._send_json(req, 400, {"error": f"bytes must be in [1, {self.config.max_request_bytes}]"})
            return
        state = self.types[rtype]
        data = state.buffer.take(nbytes, timeout=self.config.request_timeout_s)
        if data is None:
            self._send_json(req, 503, {"error": "certified buffer empty", "retry": True})
            return
        req.send_response(200)
        req.send_header("Content-Type", state.content_type)
        req.send_header("Content-Length", str(len(data)))
        if rtype == "rayleigh":
            req.send_header("X-Data-Quality", "denoised-raw-uncertified")
        req.end_headers()
        req.wfile.write(data)

    def _health(self) -> dict:
        assert self.pipeline is not None
        latest = self.pipeline.reports[-1]
        return {
            "status": "ok",
            "certified": True,
            "certifications": len(self.pipeline.reports),
            "h_min_per_bit": {ch: r.h_min_per_bit for ch, r in latest.items()},
            "n_eff": {ch: r.n_eff for ch, r in latest.items()},
            "epsilon": self.config.epsilon,
            "buffer_fill": {t: s.buffer.available() for t, s in self.types.items()},
            "served_bytes": {t: s.buffer.served_offset for t, s in self.types.items()},
            "discarded_buffers": self.discarded_buffers,
            "raw_samples_consumed": self.pipeline.raw_samples_consumed,
        }

    @staticmethod
    def _send_json(req: BaseHTTPRequestHandler, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        req.send_response(code)
        req.send_header("Content-Type", "application/json")
        req.send_header("Content-Length", str(len(body)))
        req.end_headers()
        req.wfile.write(body)


def serve(config: PipelineConfig) -> RandomService:
    """Start the service; caller owns stop()."""
    svc = RandomService(config)
    svc.start()
    return svc
