"""Simulated fraud-detection backend.

Answers framed ISO traffic (0200 -> 0210, 0800 -> 0810) through a bounded
FIFO queue and a fixed worker pool, so offered load beyond capacity shows
up as late or dropped replies exactly like an overloaded service.  Newly
started instances run slower for a short warmup window, which is what
makes short stress windows measure worse than long ones at the same rate.

A CPU-load model maps the current offered rate onto a calibration table,
and a control port injects faults: stop answering, or pin the reported
CPU percentage.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import queue
import random
import socket
import threading
from collections import Counter, deque
from dataclasses import dataclass

from . import codec
from .clock import SYSTEM_CLOCK
from .framing import DEFAULT_FRAMER, FramerConfig, FramingError
from .health import HealthAgent, resolve_health_port
from .netio import FrameConnection

log = logging.getLogger(__name__)

DEFAULT_CPU_TABLE = ((0, 5), (250, 5), (500, 7), (1000, 12), (2000, 13), (5000, 19))


@dataclass(frozen=True)
class SimConfig:
    """Backend shape: capacity model, calibration, and listen addresses.

    Defaults give a capacity of 60 msg/s (3 workers x 50 ms) with a 1.8x
    slower 6 s warmup, which puts the error knee near 50 offered TPS,
    one tenth of the calibration table's knee.  rate_scale maps desk
    rates onto the table's axis accordingly.
    """

    workers: int = 3
    service_time_ms: float = 50.0
    queue_capacity: int = 256
    cpu_base_pct: int = 5
    cpu_table: tuple[tuple[float, int], ...] = DEFAULT_CPU_TABLE
    warmup_factor: float = 1.8
    warmup_ms: float = 6000.0
    rate_scale: float = 10.0
    jitter_seed: int | None = None
    listen: tuple[str, int] = ("127.0.0.1", 0)
    health: tuple[str, int] = ("127.0.0.1", 0)
    control: tuple[str, int] = ("127.0.0.1", 0)
    digest_cap: int = 50_000

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.service_time_ms < 0:
            raise ValueError("service_time_ms must be >= 0")
        if self.queue_capacity < 0:
            raise ValueError("queue_capacity must be >= 0")
        if not self.cpu_table:
            raise ValueError("cpu_table must be nonempty")
        tps_points = [point[0] for point in self.cpu_table]
        if any(b <= a for a, b in zip(tps_points, tps_points[1:])):
            raise ValueError("cpu_table offered_tps points must be strictly increasing")
        if self.warmup_factor < 1.0:
            raise ValueError("warmup_factor must be >= 1")
        if self.rate_scale <= 0:
            raise ValueError("rate_scale must be > 0")

    @property
    def capacity_tps(self) -> float:
        """Steady-state throughput ceiling: workers x 1000/service_time."""
        if self.service_time_ms == 0:
            return math.inf
        return self.workers * 1000.0 / self.service_time_ms


@dataclass
class FaultState:
    """Injected faults; both clear at startup."""

    stop_processing: bool = False
    cpu_override: int | None = None


class FaultKind:
    STOP_PROCESSING = "STOP_PROCESSING"
    RESUME = "RESUME"
    CPU_OVERRIDE = "CPU_OVERRIDE"
    CLEAR_CPU = "CLEAR_CPU"


def cpu_load(offered_tps: float, faults: FaultState, config: SimConfig) -> int:
    """Modeled CPU percent for an offered rate, half-up to an integer.

    An injected override wins outright.  Otherwise piecewise-linear
    interpolation over the calibration table, clamped to
    [cpu_base_pct, highest table value], deliberately monotone even
    where raw measurements would dip.
    """
    if faults.cpu_override is not None:
        return max(0, min(100, faults.cpu_override))
    table = config.cpu_table
    if offered_tps <= table[0][0]:
        value = float(table[0][1])
    elif offered_tps >= table[-1][0]:
        value = float(table[-1][1])
    else:
        value = float(table[-1][1])
        for (x0, y0), (x1, y1) in zip(table, table[1:]):
            if offered_tps <= x1:
                value = y0 + (y1 - y0) * (offered_tps - x0) / (x1 - x0)
                break
    top = max(point[1] for point in table)
    value = max(float(config.cpu_base_pct), min(float(top), value))
    return int(math.floor(value + 0.5))


def effective_service_ms(
    config: SimConfig, elapsed_since_start_ms: float, rng: random.Random | None = None
) -> float:
    """Per-message service time: optional jitter, warmup multiplier applied."""
    base = config.service_time_ms
    if rng is not None and base > 0:
        base = rng.expovariate(1.0 / base)
    if elapsed_since_start_ms < config.warmup_ms:
        base *= config.warmup_factor
    return base


def handle_message(message: codec.IsoMessage) -> codec.IsoMessage | None:
    """Reply for one standard request; None when the MTI is unsupported.

    0200 answers 0210 echoing whichever of fields 3,4,7,11,41 were sent;
    0800 answers 0810 echoing 11 and 70.  Both add response code 39="00".
    """
    if message.mti == "0200":
        echoed = (3, 4, 7, 11, 41)
    elif message.mti == codec.ECHO_REQUEST_MTI:
        echoed = (11, 70)
    else:
        return None
    fields = {n: message.fields[n] for n in echoed if n in message.fields}
    fields[39] = codec.APPROVED_RESPONSE_CODE
    return codec.IsoMessage(codec.response_mti(message.mti), fields)


class RateEstimator:
    """Offered-rate estimate from per-second arrival buckets."""

    def __init__(self, window_s: int = 2):
        self._window = window_s
        self._buckets: deque[tuple[int, int]] = deque()
        self._lock = threading.Lock()

    def mark(self, now_ms: float) -> None:
        second = int(now_ms // 1000)
        with self._lock:
            if self._buckets and self._buckets[-1][0] == second:
                sec, count = self._buckets[-1]
                self._buckets[-1] = (sec, count + 1)
            else:
                self._buckets.append((second, 1))
                while len(self._buckets) > self._window + 1:
                    self._buckets.popleft()

    def rate(self, now_ms: float) -> float:
        """Average over the last window of completed seconds."""
        second = int(now_ms // 1000)
        lo = second - self._window
        with self._lock:
            total = sum(count for sec, count in self._buckets if lo <= sec < second)
        return total / self._window


class FdsBackend:
    """One simulated backend: traffic, health, and control listeners."""

    def __init__(
        self,
        config: SimConfig = SimConfig(),
        dictionary: codec.FieldDictionary | None = None,
        framer: FramerConfig = DEFAULT_FRAMER,
        echo_timeout_ms: int = 1000,
        sample_interval_ms: int = 500,
        clock=SYSTEM_CLOCK,
    ):
        self.config = config
        self.dictionary = dictionary or codec.default_dictionary()
        self.framer = framer
        self._clock = clock
        self.faults = FaultState()
        self._faults_lock = threading.Lock()
        self._rate = RateEstimator()
        self._rng = random.Random(config.jitter_seed) if config.jitter_seed is not None else None
        self._rng_lock = threading.Lock()

        self._stats_lock = threading.Lock()
        self._received = 0
        self._standard = 0
        self._nonstandard = 0
        self._answered = 0
        self._rejected_queue_full = 0
        self._dropped_unsupported = 0
        self._dropped_stopped = 0
        self._reasons: Counter[str] = Counter()
        self._digest_count = 0
        self._received_digests: dict[int, list[str]] = {}
        self._sent_digests: dict[int, list[str]] = {}

        self._queue: queue.Queue | None = (
            queue.Queue(maxsize=config.queue_capacity) if config.queue_capacity > 0 else None
        )
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._conns: set[FrameConnection] = set()
        self._conns_lock = threading.Lock()
        self._conn_counter = 0
        self._started_ms: float | None = None

        self._traffic_listener = self._bind(config.listen)
        self._control_listener = self._bind(config.control)
        self._agent = HealthAgent(
            cpu_provider=self.current_cpu,
            echo_target=self.traffic_addr,
            host=config.health[0],
            port=resolve_health_port(config.health[1]),
            echo_timeout_ms=echo_timeout_ms,
            sample_interval_ms=sample_interval_ms,
            dictionary=self.dictionary,
            framer=framer,
            clock=clock,
        )

    @staticmethod
    def _bind(addr: tuple[str, int]) -> socket.socket:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind(addr)
        listener.listen(128)
        return listener

    @property
    def traffic_addr(self) -> tuple[str, int]:
        return self._traffic_listener.getsockname()

    @property
    def health_addr(self) -> tuple[str, int]:
        return self._agent.addr

    @property
    def control_addr(self) -> tuple[str, int]:
        return self._control_listener.getsockname()

    # ------------------------------------------------------------ lifecycle

    def start(self) -> "FdsBackend":
        self._started_ms = self._clock.now_ms()
        for i in range(self.config.workers):
            self._spawn(self._worker_loop, f"fds-worker-{i}")
        self._spawn(self._accept_loop, "fds-accept")
        self._spawn(self._control_loop, "fds-control")
        self._agent.start()
        log.info(
            "backend up: traffic=%s health=%s control=%s",
            self.traffic_addr,
            self.health_addr,
            self.control_addr,
        )
        return self

    def stop(self) -> None:
        self._stop.set()
        self._agent.stop()
        for listener in (self._traffic_listener, self._control_listener):
            # shutdown, not just close: close alone leaves accept() blocked
            try:
                listener.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                listener.close()
            except OSError:
                pass
        if self._queue is not None:
            for _ in range(self.config.workers):
                try:
                    self._queue.put_nowait(None)
                except queue.Full:
                    break
        with self._conns_lock:
            conns = list(self._conns)
        for conn in conns:
            conn.close()
        for thread in self._threads:
            thread.join(timeout=2.0)

    def _spawn(self, target, name: str) -> None:
        thread = threading.Thread(target=target, name=name, daemon=True)
        thread.start()
        self._threads.append(thread)

    def __enter__(self) -> "FdsBackend":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # ------------------------------------------------------------ cpu model

    def current_cpu(self) -> int:
        with self._faults_lock:
            faults = FaultState(self.faults.stop_processing, self.faults.cpu_override)
        offered = self._rate.rate(self._clock.now_ms()) * self.config.rate_scale
        return cpu_load(offered, faults, self.config)

    # ------------------------------------------------------------ faults

    def inject_fault(self, kind: str, pct: int | None = None) -> str:
        with self._faults_lock:
            if kind == FaultKind.STOP_PROCESSING:
                self.faults.stop_processing = True
            elif kind == FaultKind.RESUME:
                self.faults.stop_processing = False
            elif kind == FaultKind.CPU_OVERRIDE:
                if pct is None:
                    raise ValueError("CPU_OVERRIDE needs a percent")
                self.faults.cpu_override = int(pct)
            elif kind == FaultKind.CLEAR_CPU:
                self.faults.cpu_override = None
            else:
                raise ValueError(f"unknown fault kind {kind!r}")
        return "ok"

    # ------------------------------------------------------------ traffic

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, _ = self._traffic_listener.accept()
            except OSError:
                return
            conn = FrameConnection(sock, self.framer)
            with self._conns_lock:
                self._conn_counter += 1
                conn_id = self._conn_counter
                self._conns.add(conn)
            thread = threading.Thread(
                target=self._serve_conn, args=(conn, conn_id), name=f"fds-conn-{conn_id}", daemon=True
            )
            thread.start()

    def _serve_conn(self, conn: FrameConnection, conn_id: int) -> None:
        try:
            while not self._stop.is_set():
                try:
                    payloads = conn.recv_payloads()
                except (FramingError, ConnectionError, OSError, TimeoutError):
                    return
                if not payloads:
                    return
                for payload in payloads:
                    self._ingest(conn, conn_id, payload)
        finally:
            with self._conns_lock:
                self._conns.discard(conn)
            conn.close()

    def _ingest(self, conn: FrameConnection, conn_id: int, payload: bytes) -> None:
        now = self._clock.now_ms()
        self._rate.mark(now)
        message, verdict = codec.decode_message(payload, self.dictionary)
        with self._stats_lock:
            self._received += 1
            if self._digest_count < self.config.digest_cap:
                digest = hashlib.sha256(payload).hexdigest()
                self._received_digests.setdefault(conn_id, []).append(digest)
                self._digest_count += 1
            if verdict.standard:
                self._standard += 1
            else:
                self._nonstandard += 1
                self._reasons[verdict.reason.name] += 1
                return
        if message.mti not in ("0200", "0800"):
            with self._stats_lock:
                self._dropped_unsupported += 1
            return
        item = (conn, conn_id, message)
        if self._queue is None:
            with self._stats_lock:
                self._rejected_queue_full += 1
            return
        try:
            self._queue.put_nowait(item)
        except queue.Full:
            with self._stats_lock:
                self._rejected_queue_full += 1

    def _service_delay_ms(self) -> float:
        started = self._started_ms if self._started_ms is not None else self._clock.now_ms()
        elapsed = self._clock.now_ms() - started
        if self._rng is None:
            return effective_service_ms(self.config, elapsed)
        with self._rng_lock:
            return effective_service_ms(self.config, elapsed, self._rng)

    def _worker_loop(self) -> None:
        if self._queue is None:  # zero-capacity config rejects everything
            return
        while not self._stop.is_set():
            try:
                item = self._queue.get(timeout=0.2)
            except queue.Empty:
                continue
            if item is None:
                return
            conn, conn_id, message = item
            with self._faults_lock:
                stopped = self.faults.stop_processing
            if stopped:
                with self._stats_lock:
                    self._dropped_stopped += 1
                continue
            delay = self._service_delay_ms()
            if delay > 0:
                self._clock.sleep_ms(delay)
            reply = handle_message(message)
            if reply is None:
                continue
            wire = codec.encode_message(reply, self.dictionary)
            try:
                conn.send_payload(wire)
            except OSError:
                continue
            with self._stats_lock:
                self._answered += 1
                if self._digest_count < self.config.digest_cap:
                    self._sent_digests.setdefault(conn_id, []).append(
                        hashlib.sha256(wire).hexdigest()
                    )
                    self._digest_count += 1

    # ------------------------------------------------------------ stats

    def stats(self) -> dict:
        with self._stats_lock:
            snapshot = {
                "received": self._received,
                "standard": self._standard,
                "nonstandard": self._nonstandard,
                "answered": self._answered,
                "rejected_queue_full": self._rejected_queue_full,
                "dropped_unsupported": self._dropped_unsupported,
                "dropped_stopped": self._dropped_stopped,
                "reasons": dict(self._reasons),
            }
        snapshot["rate_tps"] = self._rate.rate(self._clock.now_ms())
        snapshot["cpu_pct"] = self.current_cpu()
        return snapshot

    def digests(self) -> dict:
        with self._stats_lock:
            return {
                "received": {str(k): list(v) for k, v in self._received_digests.items()},
                "sent": {str(k): list(v) for k, v in self._sent_digests.items()},
            }

    def reset_counters(self) -> None:
        with self._stats_lock:
            self._received = self._standard = self._nonstandard = 0
            self._answered = self._rejected_queue_full = 0
            self._dropped_unsupported = self._dropped_stopped = 0
            self._reasons.clear()
            self._digest_count = 0
            self._received_digests.clear()
            self._sent_digests.clear()

    # ------------------------------------------------------------ control

    def _control_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, _ = self._control_listener.accept()
            except OSError:
                return
            threading.Thread(
                target=self._serve_control, args=(sock,), name="fds-control-conn", daemon=True
            ).start()

    def _serve_control(self, sock: socket.socket) -> None:
        try:
            with sock, sock.makefile("rw", encoding="ascii", newline="\n") as stream:
                for line in stream:
                    reply = self._control_command(line.strip())
                    stream.write(reply + "\n")
                    stream.flush()
        except (OSError, ValueError):
            pass

    def _control_command(self, line: str) -> str:
        parts = line.split()
        try:
            if parts == ["stop"]:
                return self.inject_fault(FaultKind.STOP_PROCESSING)
            if parts == ["resume"]:
                return self.inject_fault(FaultKind.RESUME)
            if len(parts) == 2 and parts[0] == "cpu" and parts[1] == "clear":
                return self.inject_fault(FaultKind.CLEAR_CPU)
            if len(parts) == 2 and parts[0] == "cpu":
                return self.inject_fault(FaultKind.CPU_OVERRIDE, int(parts[1]))
            if parts == ["stats"]:
                return json.dumps(self.stats(), sort_keys=True)
            if parts == ["digests"]:
                return json.dumps(self.digests(), sort_keys=True)
            if parts == ["reset"]:
                self.reset_counters()
                return "ok"
        except ValueError as exc:
            return f"err {exc}"
        return "err unknown command"


def send_control(addr: tuple[str, int], command: str, timeout_s: float = 5.0) -> str:
    """One command line to a backend control port; returns the reply line."""
    with socket.create_connection(addr, timeout=timeout_s) as sock:
        stream = sock.makefile("rw", encoding="ascii", newline="\n")
        stream.write(command.strip() + "\n")
        stream.flush()
        reply = stream.readline()
    if not reply:
        raise ConnectionError("control port closed without replying")
    return reply.strip()
