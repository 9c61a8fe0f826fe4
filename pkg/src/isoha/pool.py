"""Backend pool state: who is active, when to switch, and the event log.

Pure decision logic lives here; the monitor drives it and sessions only
read snapshots.  Every change of the active member is recorded as one
SwitchEvent line: ``ts=<ms> from=<id|none> to=<id|none> reason=<...>``.
"""

from __future__ import annotations

import enum
import logging
import threading
from dataclasses import dataclass, replace
from typing import Callable, Mapping

from .health import HealthState, MemberHealth

log = logging.getLogger(__name__)


class Role(enum.Enum):
    PRIMARY = "primary"
    STANDBY = "standby"


class Mode(enum.Enum):
    ACTIVE_PASSIVE = "active-passive"
    ROUND_ROBIN_PER_MESSAGE = "round-robin-per-message"


class Failback(enum.Enum):
    MANUAL = "manual"
    AUTO = "auto"


class DrainPolicy(enum.Enum):
    CLOSE_ON_SWITCH = "close-on-switch"
    DRAIN = "drain"


class SwitchReason(enum.Enum):
    CPU_OVER = "CPU_OVER"
    ECHO = "ECHO"
    CONN_FAIL = "CONN_FAIL"
    RECOVERY = "RECOVERY"
    OPERATOR = "OPERATOR"


@dataclass
class PoolMember:
    """One backend: where its traffic and health endpoints live."""

    id: str
    traffic_addr: tuple[str, int]
    health_addr: tuple[str, int]
    role: Role
    health: MemberHealth

    @property
    def is_up(self) -> bool:
        return self.health.state is HealthState.UP


@dataclass(frozen=True, slots=True)
class PoolState:
    active_id: str | None
    mode: Mode = Mode.ACTIVE_PASSIVE
    failback: Failback = Failback.MANUAL


@dataclass(frozen=True, slots=True)
class SwitchEvent:
    at_ms: float
    from_id: str | None
    to_id: str | None
    reason: SwitchReason

    def __post_init__(self):
        if self.from_id == self.to_id:
            raise ValueError("a switch event must change the active member")


def render_event(event: SwitchEvent) -> str:
    return (
        f"ts={int(event.at_ms)}"
        f" from={event.from_id or 'none'}"
        f" to={event.to_id or 'none'}"
        f" reason={event.reason.value}"
    )


def parse_event(line: str) -> SwitchEvent:
    parts = dict(token.split("=", 1) for token in line.split())
    return SwitchEvent(
        at_ms=float(parts["ts"]),
        from_id=None if parts["from"] == "none" else parts["from"],
        to_id=None if parts["to"] == "none" else parts["to"],
        reason=SwitchReason(parts["reason"]),
    )


def ordered_members(members: Mapping[str, PoolMember]) -> list[PoolMember]:
    """Primary first, then standby; the selection preference order."""
    return sorted(members.values(), key=lambda m: m.role is not Role.PRIMARY)


def select_active(state: PoolState, members: Mapping[str, PoolMember]) -> str | None:
    """Current active if UP, else the other member if UP, else None."""
    current = members.get(state.active_id) if state.active_id else None
    if current is not None and current.is_up:
        return current.id
    for member in ordered_members(members):
        if member.is_up:
            return member.id
    return None


def apply_health_update(
    state: PoolState,
    members: Mapping[str, PoolMember],
    member_id: str,
    cause: SwitchReason | None,
    now_ms: float,
) -> tuple[PoolState, SwitchEvent | None]:
    """Recompute the active member after ``member_id`` changed state.

    ``cause`` is what tripped a member that went DOWN; switches away
    from it carry that reason, switches toward a recovered member carry
    RECOVERY.  With MANUAL failback a recovered primary does not preempt
    a healthy serving standby; with AUTO it does.
    """
    if state.failback is Failback.AUTO:
        new_active = None
        for member in ordered_members(members):
            if member.is_up:
                new_active = member.id
                break
    else:
        new_active = select_active(state, members)
    if new_active == state.active_id:
        return state, None
    if state.active_id == member_id and not members[member_id].is_up:
        reason = cause or SwitchReason.CONN_FAIL
    else:
        reason = SwitchReason.RECOVERY
    event = SwitchEvent(at_ms=now_ms, from_id=state.active_id, to_id=new_active, reason=reason)
    return replace(state, active_id=new_active), event


class EventLog:
    """Append-only switch history, optionally mirrored to a file."""

    def __init__(self, path: str | None = None):
        self._events: list[SwitchEvent] = []
        self._lock = threading.Lock()
        self._file = open(path, "a", encoding="ascii") if path else None

    def append(self, event: SwitchEvent) -> None:
        line = render_event(event)
        with self._lock:
            self._events.append(event)
            if self._file is not None:
                self._file.write(line + "\n")
                self._file.flush()
        log.info("switch: %s", line)

    def events(self) -> list[SwitchEvent]:
        with self._lock:
            return list(self._events)

    def close(self) -> None:
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None


SwitchListener = Callable[[SwitchEvent], None]
