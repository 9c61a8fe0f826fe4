"""End-to-end checks of the ``isoha`` command line."""

import contextlib
import json
import signal
import socket
import subprocess
import sys
import time

import pytest

from isoha.backend import FdsBackend, SimConfig
from isoha.cli import _backend_config, build_parser, main
from isoha.config import parse_config
from isoha.netio import format_addr, parse_addr
from isoha.proxy import FailoverProxy, query_proxy

FAST_BACKEND = SimConfig(workers=2, service_time_ms=0.5, queue_capacity=1024, warmup_factor=1.0)

SUBCOMMANDS = ("proxy", "backend", "loadgen", "report", "status", "demo")

APRIL_ROW = "2019-04,4036093,4000926,35167"
OCTOBER_ROW = "2019-10,3158269,3157096,1173"


@contextlib.contextmanager
def live_proxy():
    with FdsBackend(FAST_BACKEND) as primary:
        with FdsBackend(FAST_BACKEND) as standby:
            config = parse_config(
                "\n".join(
                    [
                        "listen = 127.0.0.1:0",
                        f"primary.traffic = {format_addr(primary.traffic_addr)}",
                        f"primary.health = {format_addr(primary.health_addr)}",
                        f"standby.traffic = {format_addr(standby.traffic_addr)}",
                        f"standby.health = {format_addr(standby.health_addr)}",
                    ]
                )
            )
            proxy = FailoverProxy(config)
            proxy.start()
            try:
                yield proxy
            finally:
                proxy.stop()


# ------------------------------------------------------------ parsing and exit codes


def test_version_flag_prints_and_exits_zero(capsys):
    assert main(["--version"]) == 0
    assert "isoha" in capsys.readouterr().out


@pytest.mark.parametrize("command", SUBCOMMANDS)
def test_help_exits_zero_for_every_subcommand(command, capsys):
    assert main([command, "--help"]) == 0
    assert command in capsys.readouterr().out


def test_no_command_is_a_usage_error(capsys):
    assert main([]) == 2


def test_unknown_command_is_a_usage_error(capsys):
    assert main(["frobnicate"]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["proxy"],  # missing --config
        ["status"],  # missing --proxy
        ["loadgen"],  # missing --target
        ["demo"],  # missing scenario
        ["demo", "not-a-scenario"],
        ["loadgen", "--target", "nonsense"],  # parse_addr rejects it
    ],
)
def test_missing_or_bad_arguments_are_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_bad_log_level_is_a_runtime_error(monkeypatch, capsys):
    monkeypatch.setenv("HA_LOG", "loud")
    assert main(["status", "--proxy", "127.0.0.1:1"]) == 1
    err = capsys.readouterr().err
    assert "error:" in err
    assert "HA_LOG" in err


def test_loadgen_grid_and_single_cell_flags_are_exclusive(capsys):
    rc = main(["loadgen", "--target", "127.0.0.1:1", "--grid", "5:1", "--tps", "5"])
    assert rc == 2
    assert "not both" in capsys.readouterr().err
    rc = main(["loadgen", "--target", "127.0.0.1:1", "--tps", "5"])
    assert rc == 2


def test_loadgen_unreachable_target_is_a_runtime_error(capsys):
    # a freshly bound-then-closed port refuses connections
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    addr = probe.getsockname()
    probe.close()
    rc = main(["loadgen", "--target", format_addr(addr), "--tps", "5", "--interval", "1"])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_report_before_without_after_is_a_usage_error(capsys):
    assert main(["report", "--before", "x.csv"]) == 2
    assert main(["report"]) == 2


# ------------------------------------------------------------ report subcommand


def test_report_prints_daily_lines_and_emits_series(tmp_path, capsys):
    infile = tmp_path / "daily.csv"
    infile.write_text(f"date,total,standard,nonstandard\n{APRIL_ROW}\n{OCTOBER_ROW}\n")
    out_dir = tmp_path / "series"
    assert main(["report", "--in", str(infile), "--out-dir", str(out_dir)]) == 0
    out = capsys.readouterr().out
    assert "46.71" in out and "99.13" in out and "0.871" in out
    assert "36.55" in out and "99.96" in out and "0.037" in out
    for name in ("sla.csv", "tps.dat", "error.dat", "sla.dat"):
        assert (out_dir / name).exists()
        assert f"wrote {out_dir / name}" in out


def test_report_comparison_between_periods(tmp_path, capsys):
    before = tmp_path / "before.csv"
    after = tmp_path / "after.csv"
    before.write_text(APRIL_ROW + "\n")
    after.write_text(OCTOBER_ROW + "\n")
    assert main(["report", "--before", str(before), "--after", str(after)]) == 0
    out = capsys.readouterr().out
    assert "sla=+0.83 pp" in out
    assert "error=+0.83 pp" in out


def test_report_missing_file_is_a_runtime_error(tmp_path, capsys):
    rc = main(["report", "--in", str(tmp_path / "absent.csv")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_report_empty_file_is_a_runtime_error(tmp_path, capsys):
    infile = tmp_path / "empty.csv"
    infile.write_text("date,total,standard,nonstandard\n")
    assert main(["report", "--in", str(infile)]) == 1
    assert "no records" in capsys.readouterr().err


# ------------------------------------------------------------ live subcommands


def test_status_subcommand_against_running_proxy(capsys):
    with live_proxy() as proxy:
        addr = format_addr(proxy.status_addr)
        assert main(["status", "--proxy", addr]) == 0
        assert capsys.readouterr().out.startswith("active=primary")
        assert main(["status", "--proxy", addr, "--query", "events"]) == 0
        # no switches yet, so the joined event list is empty
        assert capsys.readouterr().out.strip() == ""
        assert main(["status", "--proxy", addr, "--query", "stats"]) == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats["sessions_active"] == 0


def test_loadgen_single_cell_against_backend(tmp_path, capsys):
    out_csv = tmp_path / "stress.csv"
    with FdsBackend(FAST_BACKEND) as backend:
        rc = main(
            [
                "loadgen",
                "--target",
                format_addr(backend.traffic_addr),
                "--health",
                format_addr(backend.health_addr),
                "--tps",
                "10",
                "--interval",
                "1",
                "--timeout-ms",
                "800",
                "--out",
                str(out_csv),
            ]
        )
    assert rc == 0
    out = capsys.readouterr().out
    assert "tps=10 interval_s=1 samples=10 errors=0 error_rate_pct=0.00" in out
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "tps,interval_s,samples,errors,error_rate_pct,cpu_max_pct"
    assert len(lines) == 2 and lines[1].startswith("10,1,10,0,0.00,")


def test_demo_scenario_via_cli(capsys):
    assert main(["demo", "baseline-defect"]) == 0
    out = capsys.readouterr().out
    assert "=== baseline-defect: PASS ===" in out


# ------------------------------------------------------------ backend configuration


def test_backend_config_file_with_flag_precedence(tmp_path):
    conf = tmp_path / "backend.conf"
    conf.write_text(
        "listen = 127.0.0.1:0\n"
        "workers = 3\n"
        "service_time_ms = 1.5\n"
        "jitter_seed = 7\n"
    )
    args = build_parser().parse_args(
        ["backend", "--config", str(conf), "--workers", "5"]
    )
    config = _backend_config(args)
    assert config.workers == 5  # flag beats file
    assert config.service_time_ms == 1.5
    assert config.jitter_seed == 7
    assert config.listen == ("127.0.0.1", 0)


def test_backend_config_file_rejects_unknown_keys(tmp_path, capsys):
    conf = tmp_path / "backend.conf"
    conf.write_text("wrokers = 3\n")
    assert main(["backend", "--config", str(conf)]) == 1
    assert "wrokers" in capsys.readouterr().err


def test_health_port_env_override(monkeypatch):
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    monkeypatch.setenv("HA_HEALTH_PORT", str(port))
    with FdsBackend(FAST_BACKEND) as backend:
        assert backend.health_addr[1] == port


# ------------------------------------------------------------ run-until-signalled


def _terminate(proc: subprocess.Popen) -> int:
    proc.send_signal(signal.SIGTERM)
    try:
        return proc.wait(timeout=10)
    except subprocess.TimeoutExpired:
        proc.kill()
        raise


def test_backend_subcommand_runs_until_terminated():
    proc = subprocess.Popen(
        [
            sys.executable,
            "-m",
            "isoha.cli",
            "backend",
            "--listen",
            "127.0.0.1:0",
            "--health",
            "127.0.0.1:0",
            "--control",
            "127.0.0.1:0",
        ],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    try:
        line = proc.stdout.readline()
        assert line.startswith("backend traffic on 127.0.0.1:")
        assert " health on " in line and " control on " in line
    finally:
        assert _terminate(proc) == 0


def test_proxy_subcommand_with_config_file(tmp_path):
    with FdsBackend(FAST_BACKEND) as primary, FdsBackend(FAST_BACKEND) as standby:
        conf = tmp_path / "proxy.conf"
        conf.write_text(
            "listen = 127.0.0.1:0\n"
            f"primary.traffic = {format_addr(primary.traffic_addr)}\n"
            f"primary.health = {format_addr(primary.health_addr)}\n"
            f"standby.traffic = {format_addr(standby.traffic_addr)}\n"
            f"standby.health = {format_addr(standby.health_addr)}\n"
        )
        proc = subprocess.Popen(
            [sys.executable, "-m", "isoha.cli", "proxy", "--config", str(conf)],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        try:
            line = proc.stdout.readline()
            tokens = line.split()
            assert tokens[:3] == ["proxy", "listening", "on"]
            status_addr = parse_addr(tokens[6])
            # the child owns the sockets; talk to it over the wire
            deadline = time.monotonic() + 5.0
            reply = ""
            while time.monotonic() < deadline:
                try:
                    reply = query_proxy(status_addr, "status")
                    break
                except OSError:
                    time.sleep(0.1)
            assert reply.startswith("active=primary")
        finally:
            assert _terminate(proc) == 0
