"""The switching proxy in front of the backend pair.

Active-passive mode relays every framed payload byte-for-byte to the
backend pinned at session admission and never looks inside it.  The
round-robin-per-message mode is a deliberately defective baseline kept
for measurement: it alternates payloads between both backends, appends
a one-byte routing marker to each relayed request, and merges replies
that land in the same tick into a single frame.  Both defects are
measurable downstream as TRAILING_BYTES and COMBINED verdicts.

A monitor drives health polling; sessions only snapshot its state at
admission and report backend connect failures back through it.
"""

from __future__ import annotations

import json
import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass

from .clock import SYSTEM_CLOCK
from .config import ProxyConfig
from .framing import DEFAULT_FRAMER, FramerConfig, FramingError
from .monitor import Monitor
from .netio import ConnectionClosed, FrameConnection
from .pool import DrainPolicy, EventLog, Mode, SwitchEvent, render_event

log = logging.getLogger(__name__)

ROUTING_MARKER = b"|"  # the balancer's per-message tag; breaks framing on purpose
MERGE_TICK_MS = 5  # replies arriving within one tick leave as a single frame


@dataclass(frozen=True, slots=True)
class SessionSummary:
    session_id: str
    mode: Mode
    pinned_id: str | None
    frames_in: int
    frames_out: int
    terminated_by: str  # client | backend | proxy


class _SessionBase:
    """Shared lifecycle: one done-latch, idempotent close, retirement."""

    def __init__(self, proxy: "FailoverProxy", session_id: str, client: FrameConnection):
        self.proxy = proxy
        self.session_id = session_id
        self.client = client
        self.pinned_id: str | None = None
        self.frames_in = 0
        self.frames_out = 0
        self.terminated_by = "proxy"
        self.threads: list[threading.Thread] = []
        self._done = threading.Event()
        self._done_lock = threading.Lock()

    def _finish(self, by: str, failed_backend: str | None = None) -> None:
        with self._done_lock:
            if self._done.is_set():
                return
            self._done.set()
            self.terminated_by = by
        if failed_backend is not None:
            self.proxy.monitor.report_connect_failure(failed_backend)
        self._close_conns()
        self.proxy._retire(self)

    def close(self, by: str = "proxy") -> None:
        self._finish(by)

    def _close_conns(self) -> None:
        raise NotImplementedError

    def _spawn(self, target, suffix: str) -> None:
        thread = threading.Thread(target=target, name=f"{self.session_id}-{suffix}", daemon=True)
        thread.start()
        self.threads.append(thread)

    def join(self, timeout_s: float = 1.0) -> None:
        for thread in self.threads:
            thread.join(timeout=timeout_s)

    def summary(self) -> SessionSummary:
        return SessionSummary(
            session_id=self.session_id,
            mode=self.mode,
            pinned_id=self.pinned_id,
            frames_in=self.frames_in,
            frames_out=self.frames_out,
            terminated_by=self.terminated_by,
        )


class _ForwardSession(_SessionBase):
    """Active-passive relay: opaque payloads, pinned backend."""

    mode = Mode.ACTIVE_PASSIVE

    def __init__(self, proxy, session_id, client, backend: FrameConnection, pinned_id: str):
        super().__init__(proxy, session_id, client)
        self.backend = backend
        self.pinned_id = pinned_id

    def start(self) -> None:
        self._spawn(lambda: self._pump(self.client, self.backend, "client", "backend"), "c2b")
        self._spawn(lambda: self._pump(self.backend, self.client, "backend", "client"), "b2c")

    def _close_conns(self) -> None:
        self.client.close()
        self.backend.close()

    def _pump(self, src: FrameConnection, dst: FrameConnection, src_side: str, dst_side: str):
        while not self._done.is_set():
            try:
                payloads = src.recv_payloads(timeout_s=0.25)
            except TimeoutError:
                continue
            except (ConnectionClosed, FramingError, OSError):
                self._finish(src_side, failed_backend=self._abrupt(src_side))
                return
            if not payloads:
                self._finish(src_side)
                return
            try:
                for payload in payloads:
                    dst.send_payload(payload)
            except OSError:
                self._finish(dst_side, failed_backend=self._abrupt(dst_side))
                return
            if src_side == "client":
                self.frames_in += len(payloads)
            else:
                self.frames_out += len(payloads)

    def _abrupt(self, side: str) -> str | None:
        return self.pinned_id if side == "backend" else None


class _SpliceSession(_SessionBase):
    """Round-robin-per-message baseline with its two known defects."""

    mode = Mode.ROUND_ROBIN_PER_MESSAGE

    def __init__(self, proxy, session_id, client, backends: list[tuple[str, FrameConnection]]):
        super().__init__(proxy, session_id, client)
        self.backends = backends
        self.tagged_frames = 0
        self.merged_frames = 0
        self._turn = 0
        self._replies: queue.Queue[bytes] = queue.Queue()

    def start(self) -> None:
        self._spawn(self._client_pump, "c2b")
        for member_id, conn in self.backends:
            self._spawn(lambda m=member_id, c=conn: self._reader(m, c), f"read-{member_id}")
        self._spawn(self._merge_pump, "merge")

    def _close_conns(self) -> None:
        self.client.close()
        for _, conn in self.backends:
            conn.close()

    def _client_pump(self):
        while not self._done.is_set():
            try:
                payloads = self.client.recv_payloads(timeout_s=0.25)
            except TimeoutError:
                continue
            except (ConnectionClosed, FramingError, OSError):
                self._finish("client")
                return
            if not payloads:
                self._finish("client")
                return
            for payload in payloads:
                member_id, conn = self.backends[self._turn % len(self.backends)]
                self._turn += 1
                try:
                    conn.send_payload(payload + ROUTING_MARKER)
                except OSError:
                    self._finish("backend", failed_backend=member_id)
                    return
                self.frames_in += 1
                self.tagged_frames += 1

    def _reader(self, member_id: str, conn: FrameConnection):
        while not self._done.is_set():
            try:
                payloads = conn.recv_payloads(timeout_s=0.25)
            except TimeoutError:
                continue
            except (ConnectionClosed, FramingError, OSError):
                self._finish("backend", failed_backend=member_id)
                return
            if not payloads:
                self._finish("backend")
                return
            for payload in payloads:
                self._replies.put(payload)

    def _merge_pump(self):
        while not self._done.is_set():
            try:
                first = self._replies.get(timeout=0.25)
            except queue.Empty:
                continue
            time.sleep(MERGE_TICK_MS / 1000.0)
            batch = [first]
            while True:
                try:
                    batch.append(self._replies.get_nowait())
                except queue.Empty:
                    break
            try:
                self.client.send_payload(b"".join(batch))
            except OSError:
                self._finish("client")
                return
            self.frames_out += 1
            if len(batch) > 1:
                self.merged_frames += 1


class FailoverProxy:
    """Accepts client sessions and relays them per the configured mode."""

    def __init__(
        self,
        config: ProxyConfig,
        monitor: Monitor | None = None,
        framer: FramerConfig = DEFAULT_FRAMER,
        clock=SYSTEM_CLOCK,
    ):
        self.config = config
        self.framer = framer
        self._clock = clock
        if monitor is None:
            monitor = Monitor(
                config.members(),
                config.thresholds(),
                mode=config.mode,
                failback=config.failback,
                event_log=EventLog(config.event_log),
                clock=clock,
                fetch_timeout_ms=max(200, config.poll_interval_ms),
            )
        self.monitor = monitor
        self.monitor.add_switch_listener(self._on_switch)
        self._listener = self._bind(config.listen)
        self._status_listener = self._bind(config.status or ("127.0.0.1", 0))
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._lock = threading.Lock()
        self._sessions: set[_SessionBase] = set()
        self._session_counter = 0
        self._summaries: list[SessionSummary] = []
        self._counters = {
            "sessions_started": 0,
            "sessions_closed": 0,
            "sessions_refused": 0,
            "connect_failures": 0,
            "frames_in": 0,
            "frames_out": 0,
            "tagged_frames": 0,
            "merged_frames": 0,
        }
        self._run_monitor = True

    @staticmethod
    def _bind(addr: tuple[str, int]) -> socket.socket:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind(addr)
        listener.listen(128)
        return listener

    @property
    def listen_addr(self) -> tuple[str, int]:
        return self._listener.getsockname()

    @property
    def status_addr(self) -> tuple[str, int]:
        return self._status_listener.getsockname()

    # ------------------------------------------------------------ lifecycle

    def start(self, run_monitor: bool = True) -> "FailoverProxy":
        self._run_monitor = run_monitor
        if run_monitor:
            self.monitor.start()
        self._spawn(self._accept_loop, "proxy-accept")
        self._spawn(self._status_loop, "proxy-status")
        log.info("proxy up: listen=%s status=%s", self.listen_addr, self.status_addr)
        return self

    def stop(self) -> None:
        self._stop.set()
        for listener in (self._listener, self._status_listener):
            # shutdown, not just close: close alone leaves accept() blocked
            try:
                listener.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                listener.close()
            except OSError:
                pass
        if self._run_monitor:
            self.monitor.stop()
        with self._lock:
            sessions = list(self._sessions)
        for session in sessions:
            session.close("proxy")
        for session in sessions:
            session.join()
        for thread in self._threads:
            thread.join(timeout=2.0)
        self.monitor.event_log.close()

    def _spawn(self, target, name: str) -> None:
        thread = threading.Thread(target=target, name=name, daemon=True)
        thread.start()
        self._threads.append(thread)

    def __enter__(self) -> "FailoverProxy":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # ------------------------------------------------------------ admission

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._admit, args=(sock,), daemon=True).start()

    def _admit(self, sock: socket.socket):
        active = self.monitor.active_member()
        if active is None:
            with self._lock:
                self._counters["sessions_refused"] += 1
            sock.close()
            return
        client = FrameConnection(sock, self.framer)
        with self._lock:
            self._session_counter += 1
            session_id = f"s{self._session_counter}"
        mode = self.config.mode
        if mode is Mode.ACTIVE_PASSIVE:
            session = self._open_forward(session_id, client, active)
        else:
            session = self._open_splice(session_id, client)
        if session is None:
            client.close()
            return
        with self._lock:
            self._sessions.add(session)
            self._counters["sessions_started"] += 1
        session.start()

    def _open_forward(self, session_id, client, active) -> _ForwardSession | None:
        try:
            backend = FrameConnection.connect(active.traffic_addr, timeout_s=2.0, config=self.framer)
        except OSError:
            self.monitor.report_connect_failure(active.id)
            with self._lock:
                self._counters["sessions_refused"] += 1
                self._counters["connect_failures"] += 1
            return None
        return _ForwardSession(self, session_id, client, backend, active.id)

    def _open_splice(self, session_id, client) -> _SpliceSession | None:
        backends: list[tuple[str, FrameConnection]] = []
        for member in self.monitor.members():
            try:
                conn = FrameConnection.connect(member.traffic_addr, timeout_s=2.0, config=self.framer)
            except OSError:
                self.monitor.report_connect_failure(member.id)
                with self._lock:
                    self._counters["sessions_refused"] += 1
                    self._counters["connect_failures"] += 1
                for _, opened in backends:
                    opened.close()
                return None
            backends.append((member.id, conn))
        return _SpliceSession(self, session_id, client, backends)

    # ------------------------------------------------------------ switching

    def _on_switch(self, event: SwitchEvent) -> None:
        if self.config.drain is not DrainPolicy.CLOSE_ON_SWITCH:
            return
        with self._lock:
            sessions = list(self._sessions)
        for session in sessions:
            pinned = session.pinned_id
            if pinned is None:
                # splice sessions use both members; only a dead pool ends them
                if event.to_id is None:
                    session.close("proxy")
            elif pinned != event.to_id:
                session.close("proxy")

    def _retire(self, session: _SessionBase) -> None:
        with self._lock:
            if session not in self._sessions:
                return
            self._sessions.discard(session)
            self._counters["sessions_closed"] += 1
            self._counters["frames_in"] += session.frames_in
            self._counters["frames_out"] += session.frames_out
            if isinstance(session, _SpliceSession):
                self._counters["tagged_frames"] += session.tagged_frames
                self._counters["merged_frames"] += session.merged_frames
            if len(self._summaries) < 2000:
                self._summaries.append(session.summary())

    # ------------------------------------------------------------ inspection

    def stats(self) -> dict:
        with self._lock:
            stats = dict(self._counters)
            stats["sessions_active"] = len(self._sessions)
        return stats

    def summaries(self) -> list[SessionSummary]:
        with self._lock:
            return list(self._summaries)

    # ------------------------------------------------------------ status port

    def _status_loop(self):
        while not self._stop.is_set():
            try:
                sock, _ = self._status_listener.accept()
            except OSError:
                return
            threading.Thread(target=self._serve_status, args=(sock,), daemon=True).start()

    def _serve_status(self, sock: socket.socket):
        try:
            with sock, sock.makefile("rw", encoding="ascii", newline="\n") as stream:
                for line in stream:
                    command = line.strip()
                    if command == "status":
                        stream.write(self.monitor.status_line() + "\n")
                    elif command == "events":
                        events = self.monitor.event_log.events()
                        stream.write(f"{len(events)}\n")
                        for event in events:
                            stream.write(render_event(event) + "\n")
                    elif command == "stats":
                        stream.write(json.dumps(self.stats(), sort_keys=True) + "\n")
                    else:
                        stream.write("err unknown command\n")
                    stream.flush()
        except (OSError, ValueError):
            pass


def query_proxy(addr: tuple[str, int], command: str, timeout_s: float = 5.0) -> str:
    """One status-port round trip; multi-line replies come back joined."""
    with socket.create_connection(addr, timeout=timeout_s) as sock:
        with sock.makefile("rw", encoding="ascii", newline="\n") as stream:
            stream.write(command + "\n")
            stream.flush()
            first = stream.readline().rstrip("\n")
            if command != "events":
                return first
            count = int(first)
            return "\n".join(stream.readline().rstrip("\n") for _ in range(count))
