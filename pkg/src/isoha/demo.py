"""Scripted end-to-end scenarios with a pass/fail transcript.

Each scenario stands up two simulated backends and the proxy on
ephemeral local ports, drives load through the documented wire
interfaces only (traffic, health, control, and status ports), injects
one fault, and verifies the observable outcome: a logged switch event
of the expected reason, or the baseline's message defects showing up in
backend classification counters.
"""

from __future__ import annotations

import contextlib
import time

from .backend import FdsBackend, SimConfig, send_control
from .config import parse_config
from .loadgen import LoadProfile, run_profile
from .proxy import FailoverProxy, query_proxy

SCENARIOS = ("cpu-failover", "iso-failover", "baseline-defect")

BACKEND_CONFIG = SimConfig(
    workers=2, service_time_ms=2.0, queue_capacity=512, warmup_factor=1.0
)
LOAD = LoadProfile(tps=20, interval_s=1, timeout_ms=800, seed=42)
EVENT_DEADLINE_S = 4.0


class _Transcript:
    def __init__(self, out):
        self._out = out
        self.ok = True

    def note(self, text: str) -> None:
        self._out(f"       {text}")

    def check(self, name: str, passed: bool, detail: str = "") -> bool:
        mark = "[ ok ]" if passed else "[FAIL]"
        suffix = f" ({detail})" if detail else ""
        self._out(f"{mark} {name}{suffix}")
        self.ok = self.ok and passed
        return passed


@contextlib.contextmanager
def _rig(mode: str):
    with FdsBackend(BACKEND_CONFIG, echo_timeout_ms=300, sample_interval_ms=200) as primary:
        with FdsBackend(BACKEND_CONFIG, echo_timeout_ms=300, sample_interval_ms=200) as standby:
            config = parse_config(
                "\n".join(
                    [
                        "listen = 127.0.0.1:0",
                        f"primary.traffic = {primary.traffic_addr[0]}:{primary.traffic_addr[1]}",
                        f"primary.health = {primary.health_addr[0]}:{primary.health_addr[1]}",
                        f"standby.traffic = {standby.traffic_addr[0]}:{standby.traffic_addr[1]}",
                        f"standby.health = {standby.health_addr[0]}:{standby.health_addr[1]}",
                        f"mode = {mode}",
                        "poll_interval_ms = 250",
                        "fall_count = 3",
                        "rise_count = 3",
                        "echo_timeout_ms = 400",
                    ]
                )
            )
            proxy = FailoverProxy(config)
            proxy.start()
            try:
                yield proxy, primary, standby
            finally:
                proxy.stop()


def _wire_events(proxy) -> list[str]:
    text = query_proxy(proxy.status_addr, "events")
    return text.splitlines() if text else []


def _wait_for_event(proxy, reason: str, deadline_s: float) -> tuple[list[str], float]:
    start = time.monotonic()
    while time.monotonic() - start < deadline_s:
        events = _wire_events(proxy)
        if any(f"reason={reason}" in line for line in events):
            return events, time.monotonic() - start
        time.sleep(0.05)
    return _wire_events(proxy), time.monotonic() - start


def _failover_scenario(t: _Transcript, fault_command: str, reason: str) -> bool:
    with _rig("active-passive") as (proxy, primary, standby):
        t.note(f"pool: {query_proxy(proxy.status_addr, 'status')}")
        baseline = run_profile(LOAD, proxy.listen_addr)
        t.check(
            "baseline traffic clean",
            baseline.errors == 0,
            f"{baseline.samples} samples, {baseline.errors} errors",
        )
        t.note(f"injecting fault on primary: {fault_command!r}")
        send_control(primary.control_addr, fault_command)
        injected_at = time.monotonic()
        events, waited = _wait_for_event(proxy, reason, EVENT_DEADLINE_S)
        t.check(
            f"switch event reason={reason} logged",
            any(f"reason={reason}" in line for line in events),
            f"after {waited:.2f}s: {events or 'no events'}",
        )
        t.check("exactly one switch event", len(events) == 1, "; ".join(events))
        t.note(f"pool: {query_proxy(proxy.status_addr, 'status')}")
        post = run_profile(LOAD, proxy.listen_addr)
        t.check(
            "post-switch traffic clean",
            post.errors == 0,
            f"{post.samples} samples, {post.errors} errors",
        )
        switched_within = time.monotonic() - injected_at
        t.note(f"fault to verified recovery took {switched_within:.2f}s")
        # leave the rig healthy so teardown never races recovery events
        send_control(primary.control_addr, "resume")
        send_control(primary.control_addr, "cpu clear")
    return t.ok


def scenario_cpu_failover(out=print) -> bool:
    t = _Transcript(out)
    return _failover_scenario(t, "cpu 25", "CPU_OVER")


def scenario_iso_failover(out=print) -> bool:
    t = _Transcript(out)
    return _failover_scenario(t, "stop", "ECHO")


def scenario_baseline_defect(out=print) -> bool:
    t = _Transcript(out)
    with _rig("round-robin-per-message") as (proxy, primary, standby):
        t.note(f"pool: {query_proxy(proxy.status_addr, 'status')}")
        defective = run_profile(
            LoadProfile(tps=20, interval_s=1, timeout_ms=300, seed=42), proxy.listen_addr
        )
        nonstandard = {}
        reasons = {}
        for name, backend in (("primary", primary), ("standby", standby)):
            stats = backend.stats()
            nonstandard[name] = stats["nonstandard"]
            reasons[name] = dict(stats["reasons"])
        total_bad = sum(nonstandard.values())
        t.check(
            "round-robin mode corrupts messages",
            total_bad > 0,
            f"nonstandard per backend: {nonstandard}",
        )
        t.check(
            "corruption is the trailing routing marker",
            all(set(r) == {"TRAILING_BYTES"} for r in reasons.values() if r),
            f"reasons: {reasons}",
        )
        t.check(
            "every tagged request failed its reply",
            defective.errors == defective.samples,
            f"{defective.errors}/{defective.samples} errors",
        )
        send_control(primary.control_addr, "reset")
        send_control(standby.control_addr, "reset")
    with _rig("active-passive") as (proxy, primary, standby):
        clean = run_profile(LOAD, proxy.listen_addr)
        t.check(
            "active-passive mode passes traffic untouched",
            clean.errors == 0,
            f"{clean.samples} samples, {clean.errors} errors",
        )
        stats = primary.stats()
        t.check(
            "no non-standard messages in active-passive mode",
            stats["nonstandard"] == 0 and standby.stats()["nonstandard"] == 0,
            f"primary nonstandard={stats['nonstandard']}",
        )
    return t.ok


_SCENARIO_FUNCS = {
    "cpu-failover": scenario_cpu_failover,
    "iso-failover": scenario_iso_failover,
    "baseline-defect": scenario_baseline_defect,
}


def run_scenario(name: str, out=print) -> int:
    if name not in _SCENARIO_FUNCS:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    out(f"=== scenario: {name} ===")
    ok = _SCENARIO_FUNCS[name](out)
    out(f"=== {name}: {'PASS' if ok else 'FAIL'} ===")
    return 0 if ok else 1
