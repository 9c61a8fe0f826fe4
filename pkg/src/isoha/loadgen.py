"""Stress-test client: paced generation, reply matching, error rates.

A run attempts exactly tps x interval_s financial requests, sent on an
absolute schedule (message i leaves at i/tps seconds) spread round-robin
over the configured connections.  A sample counts as an error when its
reply is missing, late, or non-standard, or when its connection failed
before the send; the error metric therefore matches what the SLA report
counts downstream.  Message content is deterministic under the seed so
two runs against the same simulated stack offer identical bytes.
"""

from __future__ import annotations

import csv
import io
import logging
import random
import threading
import time
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from . import codec
from .framing import DEFAULT_FRAMER, FramerConfig, FramingError
from .health import HealthFetchError, fetch_health
from .netio import ConnectionClosed, FrameConnection, format_addr

log = logging.getLogger(__name__)

CSV_HEADER = "tps,interval_s,samples,errors,error_rate_pct,cpu_max_pct"


class LoadError(RuntimeError):
    """A stress run that could not start or finish."""


@dataclass(frozen=True, slots=True)
class LoadProfile:
    tps: int
    interval_s: int
    timeout_ms: int = 1000
    connections: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.tps < 1 or self.interval_s < 1 or self.connections < 1:
            raise ValueError(f"tps, interval_s, connections must all be >= 1: {self}")
        if self.timeout_ms <= 0:
            raise ValueError(f"timeout_ms must be positive: {self}")

    @property
    def samples(self) -> int:
        return self.tps * self.interval_s


@dataclass(frozen=True, slots=True)
class StressReport:
    tps: int
    interval_s: int
    samples: int
    errors: int
    error_rate_pct: float
    cpu_series: tuple[int, ...]
    cpu_max_pct: int
    latency_mean_ms: float = 0.0
    latency_max_ms: float = 0.0

    def __post_init__(self):
        if not 0 <= self.errors <= self.samples:
            raise ValueError(f"errors must lie in 0..samples: {self}")
        if self.samples and self.error_rate_pct != compute_error_rate(self.samples, self.errors):
            raise ValueError(f"error_rate_pct does not match its counts: {self}")


def compute_error_rate(samples: int, errors: int) -> float:
    """100*errors/samples, rounded half-up to two decimals."""
    if samples < 1:
        raise ValueError("error rate needs at least one sample")
    if not 0 <= errors <= samples:
        raise ValueError(f"errors must lie in 0..samples, got {errors}/{samples}")
    rate = Decimal(100 * errors) / Decimal(samples)
    return float(rate.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def generate_wires(profile: LoadProfile) -> list[tuple[str, bytes]]:
    """The run's (stan, wire) samples; deterministic under profile.seed."""
    rng = random.Random(profile.seed)
    out = []
    for i in range(profile.samples):
        stan = f"{i + 1:06d}"
        message = codec.IsoMessage(
            codec.Mti("0200"),
            {
                2: "".join(rng.choice("0123456789") for _ in range(16)),
                3: "000000",
                4: f"{rng.randrange(10**8):012d}",
                7: f"{rng.randrange(1, 13):02d}{rng.randrange(1, 29):02d}"
                f"{rng.randrange(24):02d}{rng.randrange(60):02d}{rng.randrange(60):02d}",
                11: stan,
                41: f"TERM{rng.randrange(10000):04d}",
            },
        )
        out.append((stan, codec.encode_message(message)))
    return out


class _Collector:
    """Reply bookkeeping shared by every connection's reader."""

    def __init__(self):
        self.lock = threading.Lock()
        self.sent_ms: dict[str, float] = {}
        self.failed_send: set[str] = set()
        self.replies: dict[str, tuple[float, bool]] = {}

    def record_sent(self, stan: str, at_ms: float) -> None:
        with self.lock:
            self.sent_ms[stan] = at_ms

    def record_failed_send(self, stan: str) -> None:
        with self.lock:
            self.failed_send.add(stan)

    def record_reply(self, stan: str, at_ms: float, standard: bool) -> None:
        with self.lock:
            self.replies.setdefault(stan, (at_ms, standard))

    def pending(self) -> int:
        with self.lock:
            return len(self.sent_ms) - len(self.replies.keys() & self.sent_ms.keys())


def _sample_outcomes(profile, wires, collector):
    """Per-sample error flags plus reply latencies, in sample order."""
    errors = []
    latencies = []
    with collector.lock:
        for stan, _ in wires:
            sent = collector.sent_ms.get(stan)
            reply = collector.replies.get(stan)
            if sent is None or stan in collector.failed_send or reply is None:
                errors.append(True)
                continue
            at_ms, standard = reply
            rtt = at_ms - sent
            latencies.append(rtt)
            errors.append(not standard or rtt > profile.timeout_ms)
    return errors, latencies


def run_profile(
    profile: LoadProfile,
    target_addr: tuple[str, int],
    health_addr: tuple[str, int] | None = None,
    framer: FramerConfig = DEFAULT_FRAMER,
) -> StressReport:
    wires = generate_wires(profile)
    conns: list[FrameConnection] = []
    try:
        for _ in range(profile.connections):
            conns.append(FrameConnection.connect(target_addr, timeout_s=2.0, config=framer))
    except OSError as exc:
        for conn in conns:
            conn.close()
        raise LoadError(f"target {format_addr(target_addr)} unreachable: {exc}") from exc

    collector = _Collector()
    stop_readers = threading.Event()
    cpu_series: list[int] = []
    t0 = time.monotonic()

    def now_ms() -> float:
        return (time.monotonic() - t0) * 1000.0

    def sender(conn_index: int) -> None:
        conn = conns[conn_index]
        dead = False
        for i in range(conn_index, len(wires), profile.connections):
            stan, wire = wires[i]
            due = t0 + i / profile.tps
            delay = due - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            if dead:
                collector.record_failed_send(stan)
                continue
            try:
                conn.send_payload(wire)
            except OSError:
                dead = True  # connection lost; its remaining samples all fail
                collector.record_failed_send(stan)
                continue
            collector.record_sent(stan, now_ms())

    def reader(conn: FrameConnection) -> None:
        while not stop_readers.is_set():
            try:
                payloads = conn.recv_payloads(timeout_s=0.2)
            except TimeoutError:
                continue
            except (ConnectionClosed, FramingError, OSError):
                return
            if not payloads:
                return
            at = now_ms()
            for payload in payloads:
                message, verdict = codec.decode_message(payload)
                stan = message.field(11) if message else None
                if stan:
                    collector.record_reply(stan, at, verdict.standard)

    def cpu_poller() -> None:
        next_at = t0
        while not stop_readers.is_set():
            try:
                sample = fetch_health(health_addr, timeout_ms=800)
                cpu_series.append(sample.cpu_pct)
            except HealthFetchError:
                pass
            next_at += 1.0
            delay = next_at - time.monotonic()
            if delay > 0 and stop_readers.wait(delay):
                return

    threads = [
        threading.Thread(target=sender, args=(c,), daemon=True, name=f"loadgen-send-{c}")
        for c in range(profile.connections)
    ]
    threads += [
        threading.Thread(target=reader, args=(conn,), daemon=True, name=f"loadgen-read-{c}")
        for c, conn in enumerate(conns)
    ]
    if health_addr is not None:
        threads.append(threading.Thread(target=cpu_poller, daemon=True, name="loadgen-cpu"))
    for thread in threads:
        thread.start()
    for thread in threads[: profile.connections]:
        thread.join()

    # grace window: the last reply may legitimately arrive timeout_ms later
    grace_deadline = time.monotonic() + profile.timeout_ms / 1000.0 + 0.5
    while time.monotonic() < grace_deadline and collector.pending() > 0:
        time.sleep(0.05)
    stop_readers.set()
    for conn in conns:
        conn.close()
    for thread in threads[profile.connections :]:
        thread.join(timeout=2.0)

    error_flags, latencies = _sample_outcomes(profile, wires, collector)
    errors = sum(error_flags)
    return StressReport(
        tps=profile.tps,
        interval_s=profile.interval_s,
        samples=profile.samples,
        errors=errors,
        error_rate_pct=compute_error_rate(profile.samples, errors),
        cpu_series=tuple(cpu_series),
        cpu_max_pct=max(cpu_series, default=0),
        latency_mean_ms=round(sum(latencies) / len(latencies), 3) if latencies else 0.0,
        latency_max_ms=round(max(latencies), 3) if latencies else 0.0,
    )


def parse_grid(text: str) -> tuple[list[int], list[int]]:
    """``"10,25:60,120"`` -> ([10, 25], [60, 120])."""
    tps_part, sep, interval_part = text.partition(":")
    if not sep:
        raise ValueError("grid must look like tps,tps,...:interval,interval,...")
    try:
        tps_values = [int(v) for v in tps_part.split(",") if v.strip()]
        interval_values = [int(v) for v in interval_part.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"grid values must be integers: {text!r}") from None
    if not tps_values or not interval_values:
        raise ValueError("grid needs at least one tps and one interval")
    return tps_values, interval_values


def sweep_grid(
    tps_values,
    interval_values,
    target_addr,
    health_addr=None,
    *,
    timeout_ms: int = 1000,
    connections: int = 1,
    seed: int = 0,
    pause_s: float = 0.0,
    on_report=None,
) -> list[StressReport]:
    """One run_profile per (tps, interval) cell, in grid order.

    Cells share the live target; when a cell must start from a cold
    backend (the short-window knee effect), drive run_profile directly
    with a fresh backend instead.
    """
    if not tps_values or not interval_values:
        raise ValueError("grid needs at least one tps and one interval")
    reports = []
    for tps in tps_values:
        for interval_s in interval_values:
            profile = LoadProfile(
                tps=tps,
                interval_s=interval_s,
                timeout_ms=timeout_ms,
                connections=connections,
                seed=seed,
            )
            report = run_profile(profile, target_addr, health_addr)
            reports.append(report)
            if on_report is not None:
                on_report(report)
            if pause_s:
                time.sleep(pause_s)
    return reports


def render_csv(reports) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for report in reports:
        writer.writerow(
            [
                report.tps,
                report.interval_s,
                report.samples,
                report.errors,
                f"{report.error_rate_pct:.2f}",
                report.cpu_max_pct,
            ]
        )
    return out.getvalue()


def write_csv(reports, path: str) -> None:
    with open(path, "w", encoding="ascii") as handle:
        handle.write(render_csv(reports))
