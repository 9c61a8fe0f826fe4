"""Single entry point dispatching every role from one binary.

Subcommands: ``proxy`` (the switching proxy), ``backend`` (a simulated
processing backend), ``loadgen`` (stress client), ``report`` (SLA
arithmetic), ``status`` (query a running proxy), ``demo`` (scripted
end-to-end scenarios).  Exit codes: 0 success, 2 usage error, 1 runtime
failure.  ``HA_LOG`` picks the log level: quiet, info, or debug.
"""

from __future__ import annotations

import argparse
import logging
import os
import signal
import sys
import threading

from . import __version__, loadgen, reporting
from .backend import FdsBackend, SimConfig
from .config import ConfigError, load_config, parse_config_lines
from .netio import format_addr, parse_addr
from .proxy import FailoverProxy, query_proxy

log = logging.getLogger(__name__)

LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

BACKEND_FILE_KEYS = (
    "listen",
    "health",
    "control",
    "workers",
    "service_time_ms",
    "queue_capacity",
    "cpu_base_pct",
    "warmup_factor",
    "warmup_ms",
    "jitter_seed",
)


def _setup_logging() -> None:
    choice = os.environ.get("HA_LOG", "quiet")
    level = LOG_LEVELS.get(choice)
    if level is None:
        raise ConfigError(f"HA_LOG must be one of quiet, info, debug, got {choice!r}")
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s %(message)s"
    )


def _install_stop_handler() -> threading.Event:
    # handlers go in before the ready line prints, so a supervisor may
    # signal as soon as it sees the line
    stop = threading.Event()
    for signum in (signal.SIGINT, signal.SIGTERM):
        try:
            signal.signal(signum, lambda *_: stop.set())
        except ValueError:  # not the main thread; fall back to Ctrl-C only
            break
    return stop


def _wait_for(stop: threading.Event) -> None:
    try:
        while not stop.is_set():
            stop.wait(0.5)
    except KeyboardInterrupt:
        pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isoha",
        description="Message-switching proxy, simulated backends, and measurement tools.",
    )
    parser.add_argument("--version", action="version", version=f"isoha {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("proxy", help="run the switching proxy until signalled")
    p.add_argument("--config", required=True, help="proxy config file (key = value lines)")

    b = sub.add_parser("backend", help="run one simulated backend until signalled")
    b.add_argument("--config", help="backend config file (key = value lines)")
    b.add_argument("--listen", type=parse_addr, help="traffic host:port")
    b.add_argument("--health", type=parse_addr, help="health endpoint host:port")
    b.add_argument("--control", type=parse_addr, help="control port host:port")
    b.add_argument("--workers", type=int, help="worker thread count")
    b.add_argument("--service-time-ms", type=float, help="per-message service time")
    b.add_argument("--queue-capacity", type=int, help="bounded request queue size")

    g = sub.add_parser("loadgen", help="run a paced stress test")
    g.add_argument("--target", type=parse_addr, required=True, help="traffic host:port")
    g.add_argument("--health", type=parse_addr, help="health endpoint to poll for CPU")
    g.add_argument("--tps", type=int, help="target messages per second")
    g.add_argument("--interval", type=int, help="send window in seconds")
    g.add_argument("--grid", help="sweep grid tps,tps,...:interval,interval,...")
    g.add_argument("--timeout-ms", type=int, default=1000, help="per-message reply deadline")
    g.add_argument("--connections", type=int, default=1, help="parallel session count")
    g.add_argument("--seed", type=int, default=0, help="message generation seed")
    g.add_argument("--out", help="write results CSV here")

    r = sub.add_parser("report", help="SLA arithmetic over daily traffic counts")
    r.add_argument("--in", dest="infile", help="daily records CSV (date,total,standard,nonstandard)")
    r.add_argument("--before", help="records CSV for the earlier period")
    r.add_argument("--after", help="records CSV for the later period")
    r.add_argument("--out-dir", help="emit sla.csv and per-metric series files here")

    s = sub.add_parser("status", help="query a running proxy's status port")
    s.add_argument("--proxy", type=parse_addr, required=True, help="status host:port")
    s.add_argument(
        "--query",
        choices=("status", "events", "stats"),
        default="status",
        help="which status-port command to send",
    )

    d = sub.add_parser("demo", help="scripted end-to-end scenario with pass/fail transcript")
    d.add_argument(
        "scenario",
        choices=("cpu-failover", "iso-failover", "baseline-defect"),
        help="which experiment to reproduce",
    )
    return parser


def cmd_proxy(args) -> int:
    config = load_config(args.config)
    stop = _install_stop_handler()
    proxy = FailoverProxy(config)
    proxy.start()
    print(
        f"proxy listening on {format_addr(proxy.listen_addr)}"
        f" status on {format_addr(proxy.status_addr)}",
        flush=True,
    )
    try:
        _wait_for(stop)
    finally:
        proxy.stop()
    return 0


def _backend_config(args) -> SimConfig:
    pairs = {}
    if args.config:
        with open(args.config, encoding="utf-8") as handle:
            pairs = parse_config_lines(handle, known=BACKEND_FILE_KEYS)
    kwargs = {}
    for key in ("listen", "health", "control"):
        flag = getattr(args, key)
        if flag is not None:
            kwargs[key] = flag
        elif key in pairs:
            kwargs[key] = parse_addr(pairs[key])
    for key, flag_name, cast in (
        ("workers", "workers", int),
        ("service_time_ms", "service_time_ms", float),
        ("queue_capacity", "queue_capacity", int),
    ):
        flag = getattr(args, flag_name)
        if flag is not None:
            kwargs[key] = flag
        elif key in pairs:
            kwargs[key] = cast(pairs[key])
    for key, cast in (
        ("cpu_base_pct", int),
        ("warmup_factor", float),
        ("warmup_ms", float),
        ("jitter_seed", int),
    ):
        if key in pairs:
            kwargs[key] = cast(pairs[key])
    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_backend(args) -> int:
    backend = FdsBackend(_backend_config(args))
    stop = _install_stop_handler()
    backend.start()
    print(
        f"backend traffic on {format_addr(backend.traffic_addr)}"
        f" health on {format_addr(backend.health_addr)}"
        f" control on {format_addr(backend.control_addr)}",
        flush=True,
    )
    try:
        _wait_for(stop)
    finally:
        backend.stop()
    return 0


def cmd_loadgen(args) -> int:
    if args.grid and (args.tps or args.interval):
        print("use either --grid or --tps/--interval, not both", file=sys.stderr)
        return 2
    if args.grid:
        tps_values, interval_values = loadgen.parse_grid(args.grid)
    elif args.tps and args.interval:
        tps_values, interval_values = [args.tps], [args.interval]
    else:
        print("loadgen needs --grid or both --tps and --interval", file=sys.stderr)
        return 2
    reports = loadgen.sweep_grid(
        tps_values,
        interval_values,
        args.target,
        args.health,
        timeout_ms=args.timeout_ms,
        connections=args.connections,
        seed=args.seed,
        on_report=lambda r: print(
            f"tps={r.tps} interval_s={r.interval_s} samples={r.samples}"
            f" errors={r.errors} error_rate_pct={r.error_rate_pct:.2f}"
            f" cpu_max_pct={r.cpu_max_pct}",
            flush=True,
        ),
    )
    if args.out:
        loadgen.write_csv(reports, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_report(args) -> int:
    comparing = args.before or args.after
    if comparing and not (args.before and args.after):
        print("--before and --after must be given together", file=sys.stderr)
        return 2
    if not args.infile and not comparing:
        print("report needs --in or --before/--after", file=sys.stderr)
        return 2
    if args.infile:
        records = reporting.load_records(args.infile)
        if not records:
            print(f"no records in {args.infile}", file=sys.stderr)
            return 1
        for record in records:
            print(reporting.format_daily_line(record, reporting.compute_daily_report(record)))
        if args.out_dir:
            for path in reporting.emit_report(records, args.out_dir):
                print(f"wrote {path}")
    if comparing:
        comparison = reporting.compare_periods(
            reporting.load_records(args.before), reporting.load_records(args.after)
        )
        print(reporting.format_comparison(comparison))
    return 0


def cmd_status(args) -> int:
    print(query_proxy(args.proxy, args.query))
    return 0


def cmd_demo(args) -> int:
    from . import demo

    return demo.run_scenario(args.scenario)


HANDLERS = {
    "proxy": cmd_proxy,
    "backend": cmd_backend,
    "loadgen": cmd_loadgen,
    "report": cmd_report,
    "status": cmd_status,
    "demo": cmd_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage or help
        return int(exc.code or 0)
    try:
        _setup_logging()
        return HANDLERS[args.command](args)
    except (ConfigError, ValueError, loadgen.LoadError, reporting.ReportingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
