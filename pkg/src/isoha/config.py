"""Proxy configuration: a line-oriented ``key = value`` file.

Blank lines and ``#`` lines are skipped.  Unknown, repeated, or missing
keys are rejected up front so a config typo surfaces at startup rather
than mid-failover.
"""

from __future__ import annotations

from dataclasses import dataclass

from .health import HealthThresholds, MemberHealth
from .netio import format_addr, parse_addr
from .pool import DrainPolicy, Failback, Mode, PoolMember, Role

Addr = tuple[str, int]

REQUIRED_KEYS = (
    "listen",
    "primary.traffic",
    "primary.health",
    "standby.traffic",
    "standby.health",
)
OPTIONAL_KEYS = (
    "mode",
    "failback",
    "cpu_max_pct",
    "poll_interval_ms",
    "fall_count",
    "rise_count",
    "echo_timeout_ms",
    "drain",
    "status",
    "event_log",
)
KNOWN_KEYS = REQUIRED_KEYS + OPTIONAL_KEYS


class ConfigError(ValueError):
    """A proxy config file that cannot be used as written."""


@dataclass(frozen=True, slots=True)
class ProxyConfig:
    listen: Addr
    primary_traffic: Addr
    primary_health: Addr
    standby_traffic: Addr
    standby_health: Addr
    mode: Mode = Mode.ACTIVE_PASSIVE
    failback: Failback = Failback.MANUAL
    cpu_max_pct: int = 20
    poll_interval_ms: int = 1000
    fall_count: int = 3
    rise_count: int = 5
    echo_timeout_ms: int = 1000
    drain: DrainPolicy = DrainPolicy.CLOSE_ON_SWITCH
    status: Addr | None = None  # None binds an ephemeral status port
    event_log: str | None = None

    def thresholds(self) -> HealthThresholds:
        return HealthThresholds(
            cpu_max_pct=self.cpu_max_pct,
            echo_timeout_ms=self.echo_timeout_ms,
            fall_count=self.fall_count,
            rise_count=self.rise_count,
            poll_interval_ms=self.poll_interval_ms,
        )

    def members(self) -> list[PoolMember]:
        return [
            PoolMember(
                id="primary",
                traffic_addr=self.primary_traffic,
                health_addr=self.primary_health,
                role=Role.PRIMARY,
                health=MemberHealth(),
            ),
            PoolMember(
                id="standby",
                traffic_addr=self.standby_traffic,
                health_addr=self.standby_health,
                role=Role.STANDBY,
                health=MemberHealth(),
            ),
        ]

    def render(self) -> str:
        lines = [
            f"listen = {format_addr(self.listen)}",
            f"primary.traffic = {format_addr(self.primary_traffic)}",
            f"primary.health = {format_addr(self.primary_health)}",
            f"standby.traffic = {format_addr(self.standby_traffic)}",
            f"standby.health = {format_addr(self.standby_health)}",
            f"mode = {self.mode.value}",
            f"failback = {self.failback.value}",
            f"cpu_max_pct = {self.cpu_max_pct}",
            f"poll_interval_ms = {self.poll_interval_ms}",
            f"fall_count = {self.fall_count}",
            f"rise_count = {self.rise_count}",
            f"echo_timeout_ms = {self.echo_timeout_ms}",
            f"drain = {self.drain.value}",
        ]
        if self.status is not None:
            lines.append(f"status = {format_addr(self.status)}")
        if self.event_log is not None:
            lines.append(f"event_log = {self.event_log}")
        return "\n".join(lines) + "\n"


def parse_config_lines(lines, known=KNOWN_KEYS) -> dict[str, str]:
    """Raw ``key = value`` pairs; semantic validation happens later."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.rstrip()!r}")
        if known is not None and key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _addr(pairs: dict[str, str], key: str) -> Addr:
    try:
        return parse_addr(pairs[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _int(pairs: dict[str, str], key: str, default: int) -> int:
    if key not in pairs:
        return default
    try:
        return int(pairs[key])
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {pairs[key]!r}") from None


def _choice(pairs: dict[str, str], key: str, enum_cls, default):
    if key not in pairs:
        return default
    try:
        return enum_cls(pairs[key])
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"{key}: expected one of {allowed}, got {pairs[key]!r}") from None


def build_config(pairs: dict[str, str]) -> ProxyConfig:
    missing = [key for key in REQUIRED_KEYS if key not in pairs]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    config = ProxyConfig(
        listen=_addr(pairs, "listen"),
        primary_traffic=_addr(pairs, "primary.traffic"),
        primary_health=_addr(pairs, "primary.health"),
        standby_traffic=_addr(pairs, "standby.traffic"),
        standby_health=_addr(pairs, "standby.health"),
        mode=_choice(pairs, "mode", Mode, Mode.ACTIVE_PASSIVE),
        failback=_choice(pairs, "failback", Failback, Failback.MANUAL),
        cpu_max_pct=_int(pairs, "cpu_max_pct", 20),
        poll_interval_ms=_int(pairs, "poll_interval_ms", 1000),
        fall_count=_int(pairs, "fall_count", 3),
        rise_count=_int(pairs, "rise_count", 5),
        echo_timeout_ms=_int(pairs, "echo_timeout_ms", 1000),
        drain=_choice(pairs, "drain", DrainPolicy, DrainPolicy.CLOSE_ON_SWITCH),
        status=_addr(pairs, "status") if "status" in pairs else None,
        event_log=pairs.get("event_log"),
    )
    try:
        config.thresholds()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config


def parse_config(text: str) -> ProxyConfig:
    return build_config(parse_config_lines(text.splitlines()))


def load_config(path: str) -> ProxyConfig:
    with open(path, encoding="utf-8") as handle:
        return build_config(parse_config_lines(handle))
