"""The poll loop: fetch member health, debounce, and drive switchovers.

One Monitor owns all pool mutations.  Sessions report backend connect
failures through a queue; each report is folded into the next poll round
as a failed sample for that member.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, replace

from .clock import SYSTEM_CLOCK
from .health import (
    FailCause,
    HealthFetchError,
    HealthSample,
    HealthThresholds,
    evaluate_sample,
    fetch_health,
    update_member_state,
)
from .pool import (
    EventLog,
    Failback,
    Mode,
    PoolMember,
    PoolState,
    SwitchEvent,
    SwitchListener,
    SwitchReason,
    apply_health_update,
    ordered_members,
)

log = logging.getLogger(__name__)

_CAUSE_TO_REASON = {
    FailCause.CPU_OVER: SwitchReason.CPU_OVER,
    FailCause.ECHO: SwitchReason.ECHO,
}


@dataclass(frozen=True, slots=True)
class PollResult:
    """What one member's poll round concluded."""

    passed: bool
    cause: SwitchReason | None
    sample: HealthSample | None


class Monitor:
    """Periodic health driver for a two-member pool."""

    def __init__(
        self,
        members: list[PoolMember],
        thresholds: HealthThresholds,
        mode: Mode = Mode.ACTIVE_PASSIVE,
        failback: Failback = Failback.MANUAL,
        event_log: EventLog | None = None,
        clock=SYSTEM_CLOCK,
        fetch=fetch_health,
        fetch_timeout_ms: int = 800,
    ):
        if len(members) != 2 or len({m.id for m in members}) != 2:
            raise ValueError("pool needs exactly two distinctly named members")
        self._members = {m.id: m for m in members}
        self._thresholds = thresholds
        self._clock = clock
        self._fetch = fetch
        self._fetch_timeout_ms = fetch_timeout_ms
        self._event_log = event_log if event_log is not None else EventLog()
        self._listeners: list[SwitchListener] = []
        self._lock = threading.Lock()
        self._reported_failures: set[str] = set()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        # optimistic start: members boot UP, primary serves immediately
        first = ordered_members(self._members)[0]
        self._state = PoolState(active_id=first.id, mode=mode, failback=failback)

    @property
    def event_log(self) -> EventLog:
        return self._event_log

    @property
    def thresholds(self) -> HealthThresholds:
        return self._thresholds

    def add_switch_listener(self, listener: SwitchListener) -> None:
        self._listeners.append(listener)

    def state(self) -> PoolState:
        with self._lock:
            return self._state

    def member(self, member_id: str) -> PoolMember:
        return self._members[member_id]

    def members(self) -> list[PoolMember]:
        return ordered_members(self._members)

    def active_member(self) -> PoolMember | None:
        with self._lock:
            active = self._state.active_id
            return self._members.get(active) if active else None

    def report_connect_failure(self, member_id: str) -> None:
        """Session-side signal; counts as one failed sample next round."""
        if member_id not in self._members:
            return
        with self._lock:
            self._reported_failures.add(member_id)

    def status_line(self) -> str:
        with self._lock:
            state = self._state
            parts = [f"active={state.active_id or 'none'}"]
            for member in ordered_members(self._members):
                parts.append(f"{member.id}={member.health.state.value}")
            parts.append(f"mode={state.mode.value}")
        return " ".join(parts)

    def _poll_member(self, member: PoolMember, reported_fail: bool) -> PollResult:
        try:
            sample = self._fetch(member.health_addr, timeout_ms=self._fetch_timeout_ms)
        except HealthFetchError as exc:
            log.debug("health fetch %s failed: %s", member.id, exc)
            return PollResult(passed=False, cause=SwitchReason.CONN_FAIL, sample=None)
        cause = evaluate_sample(sample, self._thresholds)
        if cause is not None:
            return PollResult(passed=False, cause=_CAUSE_TO_REASON[cause], sample=sample)
        if reported_fail:
            # a session saw the traffic port refuse while health still passes
            return PollResult(passed=False, cause=SwitchReason.CONN_FAIL, sample=sample)
        return PollResult(passed=True, cause=None, sample=sample)

    def step(self) -> list[SwitchEvent]:
        """One poll round over both members; returns the events it caused."""
        with self._lock:
            reported = self._reported_failures
            self._reported_failures = set()
        members = ordered_members(self._members)
        results: dict[str, PollResult] = {}

        def poll(member: PoolMember) -> None:
            results[member.id] = self._poll_member(member, member.id in reported)

        threads = [threading.Thread(target=poll, args=(m,), daemon=True) for m in members]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=self._fetch_timeout_ms / 1000.0 + 2.0)

        events: list[SwitchEvent] = []
        now = self._clock.now_ms()
        with self._lock:
            # fold every member's result first, then recompute the active
            # member, so a tick that downs both yields one clean event
            flips: list[tuple[str, SwitchReason | None]] = []
            for member in members:
                result = results.get(member.id)
                if result is None:  # fetch thread wedged; treat as silence
                    result = PollResult(passed=False, cause=SwitchReason.CONN_FAIL, sample=None)
                new_health, flipped = update_member_state(
                    member.health, result.passed, self._thresholds
                )
                if result.sample is not None:
                    new_health = replace(new_health, last_sample=result.sample)
                member.health = new_health
                if flipped:
                    flips.append((member.id, result.cause))
            for member_id, cause in flips:
                self._state, event = apply_health_update(
                    self._state, self._members, member_id, cause, now
                )
                if event is not None:
                    events.append(event)
        for event in events:
            self._event_log.append(event)
            for listener in self._listeners:
                try:
                    listener(event)
                except Exception:
                    log.exception("switch listener failed")
        return events

    def _run(self) -> None:
        interval = self._thresholds.poll_interval_ms
        next_at = self._clock.now_ms() + interval
        while not self._stop.is_set():
            self.step()
            now = self._clock.now_ms()
            if next_at <= now:  # overran; resynchronize instead of bursting
                next_at = now + interval
            self._stop.wait((next_at - now) / 1000.0)
            next_at += interval

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="monitor", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
