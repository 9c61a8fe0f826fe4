"""Proxy config file parsing: keys, defaults, and rejection of typos."""

import pytest

from isoha.config import (
    ConfigError,
    ProxyConfig,
    build_config,
    load_config,
    parse_config,
    parse_config_lines,
)
from isoha.health import HealthThresholds
from isoha.pool import DrainPolicy, Failback, Mode, Role

FULL_TEXT = """\
# switching proxy, lab pair
listen = 127.0.0.1:9000
primary.traffic = 127.0.0.1:9101
primary.health = 127.0.0.1:9102
standby.traffic = 127.0.0.1:9201
standby.health = 127.0.0.1:9202

mode = round-robin-per-message
failback = auto
cpu_max_pct = 30
poll_interval_ms = 500
fall_count = 2
rise_count = 4
echo_timeout_ms = 750
drain = drain
status = 127.0.0.1:9001
event_log = /tmp/events.log
"""

MINIMAL_TEXT = """\
listen = :9000
primary.traffic = 127.0.0.1:9101
primary.health = 127.0.0.1:9102
standby.traffic = 127.0.0.1:9201
standby.health = 127.0.0.1:9202
"""


def test_full_config_parses_every_key():
    config = parse_config(FULL_TEXT)
    assert config.listen == ("127.0.0.1", 9000)
    assert config.primary_traffic == ("127.0.0.1", 9101)
    assert config.primary_health == ("127.0.0.1", 9102)
    assert config.standby_traffic == ("127.0.0.1", 9201)
    assert config.standby_health == ("127.0.0.1", 9202)
    assert config.mode is Mode.ROUND_ROBIN_PER_MESSAGE
    assert config.failback is Failback.AUTO
    assert config.cpu_max_pct == 30
    assert config.poll_interval_ms == 500
    assert config.fall_count == 2
    assert config.rise_count == 4
    assert config.echo_timeout_ms == 750
    assert config.drain is DrainPolicy.DRAIN
    assert config.status == ("127.0.0.1", 9001)
    assert config.event_log == "/tmp/events.log"


def test_minimal_config_gets_defaults():
    config = parse_config(MINIMAL_TEXT)
    assert config.listen == ("127.0.0.1", 9000)  # bare :port means localhost
    assert config.mode is Mode.ACTIVE_PASSIVE
    assert config.failback is Failback.MANUAL
    assert config.cpu_max_pct == 20
    assert config.poll_interval_ms == 1000
    assert config.fall_count == 3
    assert config.rise_count == 5
    assert config.echo_timeout_ms == 1000
    assert config.drain is DrainPolicy.CLOSE_ON_SWITCH
    assert config.status is None
    assert config.event_log is None


def test_thresholds_carries_the_debounce_settings():
    config = parse_config(FULL_TEXT)
    assert config.thresholds() == HealthThresholds(
        cpu_max_pct=30, echo_timeout_ms=750, fall_count=2, rise_count=4, poll_interval_ms=500
    )


def test_members_builds_the_pair():
    members = parse_config(MINIMAL_TEXT).members()
    assert [m.id for m in members] == ["primary", "standby"]
    assert [m.role for m in members] == [Role.PRIMARY, Role.STANDBY]
    assert members[0].traffic_addr == ("127.0.0.1", 9101)
    assert members[1].health_addr == ("127.0.0.1", 9202)
    assert all(m.is_up for m in members)


def test_comments_and_blanks_are_skipped():
    pairs = parse_config_lines(["# note", "", "   ", "listen = :9000", "# listen = :1"])
    assert pairs == {"listen": ":9000"}


@pytest.mark.parametrize(
    "line",
    ["listen", "listen 127.0.0.1:9000", "= :9000", "listen ="],
)
def test_malformed_lines_are_rejected(line):
    with pytest.raises(ConfigError, match="key = value"):
        parse_config_lines([line])


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key 'listne'"):
        parse_config_lines(["listne = :9000"])


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate key 'listen'"):
        parse_config_lines(["listen = :9000", "listen = :9001"])


def test_missing_required_keys_are_listed():
    with pytest.raises(ConfigError, match="standby.traffic"):
        parse_config("listen = :9000\nprimary.traffic = :1\nprimary.health = :2\n")


@pytest.mark.parametrize(
    "override, message",
    [
        ("listen = nonsense", "host:port"),
        ("poll_interval_ms = soon", "expected an integer"),
        ("mode = active", "expected one of active-passive, round-robin-per-message"),
        ("failback = maybe", "expected one of manual, auto"),
        ("drain = never", "expected one of close-on-switch, drain"),
        ("cpu_max_pct = 0", "positive"),
        ("cpu_max_pct = 150", "<= 100"),
    ],
)
def test_bad_values_name_the_offending_key(override, message):
    text = MINIMAL_TEXT.replace("listen = :9000", "listen = :9000\n" + override)
    if override.startswith("listen"):
        text = MINIMAL_TEXT.replace("listen = :9000", override)
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_render_parse_roundtrip():
    for text in (FULL_TEXT, MINIMAL_TEXT):
        config = parse_config(text)
        assert parse_config(config.render()) == config


def test_load_config_reads_a_file(tmp_path):
    path = tmp_path / "ha.conf"
    path.write_text(FULL_TEXT, encoding="utf-8")
    assert load_config(str(path)) == parse_config(FULL_TEXT)


def test_build_config_is_what_parse_uses():
    pairs = parse_config_lines(MINIMAL_TEXT.splitlines())
    assert build_config(pairs) == parse_config(MINIMAL_TEXT)
    assert isinstance(build_config(pairs), ProxyConfig)
