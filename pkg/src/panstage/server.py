"""The live engine service: UDP control socket, paced render loop, and the
STATUS snapshot line.

Datagrams are parsed on the socket thread and queued for the render thread
to apply at block boundaries; malformed datagrams are counted and ignored.
A `STATUS` datagram is answered immediately with a single text line built
from the latest published snapshot.  Without an 8-channel audio device in
reach the renderer sinks to a file or to nothing, which keeps the engine
behavior identical either way.
"""

from __future__ import annotations

import logging
import socket
import threading
import time

from .audio_io import StreamingWavWriter
from .engine import Engine
from .errors import ParseError
from .protocol import StatusQuery

log = logging.getLogger("panstage.server")


def format_status(snapshot) -> str:
    """One-line STATUS reply.

    Grammar: `BPM <f> ROOM <NAME> LOOPS <n> [<id> ...] STEP <i> SHAKES <n>
    DROPPED <n> METERS <8 floats>`.
    """
    parts = [
        f"BPM {snapshot.bpm:.2f}",
        f"ROOM {snapshot.room.upper()}",
        f"LOOPS {len(snapshot.active_loops)}",
    ]
    parts.extend(snapshot.active_loops)
    parts.append(f"STEP {snapshot.tempo_step}")
    parts.append(f"SHAKES {snapshot.counters.get('shake_triggers', 0)}")
    parts.append(f"DROPPED {snapshot.counters.get('dropped_events', 0)}")
    parts.append("METERS " + " ".join(f"{v:.1f}" for v in snapshot.meters_db))
    return " ".join(parts)


class NullSink:
    def write_block(self, block):
        pass

    def close(self):
        pass


class FileSink:
    def __init__(self, path, sample_rate: int, channels: int):
        self._writer = StreamingWavWriter(path, sample_rate, channels)

    def write_block(self, block):
        self._writer.write_block(block)

    def close(self):
        self._writer.close()


class EngineServer:
    """Runs the engine against a wall clock and serves the UDP protocol."""

    def __init__(self, engine: Engine, port: int, host: str = "0.0.0.0", sink=None):
        self.engine = engine
        self.host = host
        self.port = port
        self.sink = sink if sink is not None else NullSink()
        self._sock: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()

    @property
    def bound_port(self) -> int:
        return self._sock.getsockname()[1] if self._sock else self.port

    def start(self):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind((self.host, self.port))
        self._sock.settimeout(0.2)
        log.info("control socket on udp/%d", self.bound_port)
        self._threads = [
            threading.Thread(target=self._socket_loop, name="panstage-udp", daemon=True),
            threading.Thread(target=self._render_loop, name="panstage-render", daemon=True),
        ]
        self._stop.clear()
        for t in self._threads:
            t.start()

    def stop(self):
        self._stop.set()
        for t in self._threads:
            t.join(timeout=2.0)
        if self._sock is not None:
            self._sock.close()
            self._sock = None
        self.sink.close()

    def run_forever(self):
        self.start()
        try:
            while not self._stop.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            log.info("stopping")
        finally:
            self.stop()

    def _socket_loop(self):
        while not self._stop.is_set():
            try:
                data, addr = self._sock.recvfrom(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                msg = self.engine.submit_text(data)
            except ParseError as exc:
                log.debug("ignored malformed datagram from %s: %s", addr, exc)
                continue
            if isinstance(msg, StatusQuery):
                reply = format_status(self.engine.snapshot).encode("ascii")
                try:
                    self._sock.sendto(reply, addr)
                except OSError:
                    pass

    def _render_loop(self):
        fs = self.engine.sample_rate
        block = self.engine.block_size
        block_seconds = block / fs
        next_deadline = time.monotonic()
        while not self._stop.is_set():
            out = self.engine.process_block()
            try:
                self.sink.write_block(out)
            except OSError as exc:
                log.error("sink failed, switching to null sink: %s", exc)
                self.sink = NullSink()
            next_deadline += block_seconds
            delay = next_deadline - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            elif delay < -1.0:
                # Fell badly behind (debugger, suspend): drop the backlog.
                next_deadline = time.monotonic()


def make_sink(kind: str, path, sample_rate: int, channels: int):
    """Build the output sink; unsupported device requests fall back to a
    file sink with a warning, per the live contract."""
    if kind == "null":
        return NullSink()
    if kind == "wav":
        if path is None:
            raise ValueError("wav sink needs a path")
        return FileSink(path, sample_rate, channels)
    if kind == "device":
        log.warning("no multichannel audio device backend available; "
                    "falling back to %s", "wav sink" if path else "null sink")
        if path:
            return FileSink(path, sample_rate, channels)
        return NullSink()
    raise ValueError(f"unknown sink kind {kind!r}")
