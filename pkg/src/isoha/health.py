"""Backend health: CPU sampling, ISO echo probes, debounce, and the agent.

Each backend runs a small HTTP agent whose ``GET /health`` body is two
plain-text lines::

    cpu=<integer percent>
    iso=<hex of the last 0810 echo reply, or NONE>

The monitor fetches that body, evaluates it against the thresholds (CPU
at or above the limit fails; a missing echo fails), and debounces the
result into an UP/DOWN member state.
"""

from __future__ import annotations

import enum
import http.client
import http.server
import logging
import os
import threading
from dataclasses import dataclass, replace

from . import codec
from .clock import SYSTEM_CLOCK
from .framing import DEFAULT_FRAMER, FramerConfig, FramingError
from .netio import FrameConnection

log = logging.getLogger(__name__)

HEALTH_PATH = "/health"
PORT_ENV_VAR = "HA_HEALTH_PORT"


class EchoFailure(enum.Enum):
    TIMEOUT = "TIMEOUT"
    REFUSED = "REFUSED"
    NON_STANDARD_REPLY = "NON_STANDARD_REPLY"


@dataclass(frozen=True, slots=True)
class EchoResult:
    """Outcome of one ISO echo probe."""

    ok: bool
    rtt_ms: float | None = None
    failure: EchoFailure | None = None
    reply: bytes | None = None

    def __post_init__(self):
        if self.ok and (self.failure is not None or self.rtt_ms is None or self.rtt_ms < 0):
            raise ValueError("OK echo needs a nonnegative rtt and no failure")
        if not self.ok and self.failure is None:
            raise ValueError("failed echo needs a failure reason")

    @classmethod
    def success(cls, rtt_ms: float, reply: bytes | None = None) -> "EchoResult":
        return cls(ok=True, rtt_ms=rtt_ms, reply=reply)

    @classmethod
    def fail(cls, failure: EchoFailure) -> "EchoResult":
        return cls(ok=False, failure=failure)


@dataclass(frozen=True, slots=True)
class HealthSample:
    """One health observation of a backend."""

    cpu_pct: int
    echo: EchoResult
    taken_at_ms: float

    def __post_init__(self):
        if not 0 <= self.cpu_pct <= 100:
            raise ValueError(f"cpu_pct must be 0..100, got {self.cpu_pct}")


@dataclass(frozen=True, slots=True)
class HealthThresholds:
    cpu_max_pct: int = 20
    echo_timeout_ms: int = 1000
    fall_count: int = 3
    rise_count: int = 5
    poll_interval_ms: int = 1000

    def __post_init__(self):
        values = (
            self.cpu_max_pct,
            self.echo_timeout_ms,
            self.fall_count,
            self.rise_count,
            self.poll_interval_ms,
        )
        if any(v <= 0 for v in values):
            raise ValueError(f"thresholds must all be positive: {self}")
        if self.cpu_max_pct > 100:
            raise ValueError(f"cpu_max_pct must be <= 100, got {self.cpu_max_pct}")


class HealthState(enum.Enum):
    UP = "UP"
    DOWN = "DOWN"


class FailCause(enum.Enum):
    CPU_OVER = "CPU_OVER"
    ECHO = "ECHO"


@dataclass(frozen=True, slots=True)
class MemberHealth:
    """Debounced member status; counters track the run of opposing results."""

    state: HealthState = HealthState.UP
    consecutive_pass: int = 0
    consecutive_fail: int = 0
    last_sample: HealthSample | None = None

    def __post_init__(self):
        if self.consecutive_pass and self.consecutive_fail:
            raise ValueError("at most one debounce counter may be nonzero")


def clamp_cpu(value) -> int:
    """Coerce a provider reading into an integer 0..100 percent."""
    return max(0, min(100, int(round(value))))


def sample_cpu(provider) -> int:
    """Read a CPU-percent provider; provider exceptions propagate.

    The agent treats a raised exception as a failed sample (HTTP 500),
    which the monitor counts toward fall_count.
    """
    return clamp_cpu(provider())


def echo_probe(
    addr: tuple[str, int],
    dictionary: codec.FieldDictionary | None = None,
    timeout_ms: int = 1000,
    framer: FramerConfig = DEFAULT_FRAMER,
    clock=SYSTEM_CLOCK,
) -> EchoResult:
    """Send a framed 0800 echo and judge the reply.

    OK only when a frame arrives in time, classifies STANDARD, carries
    MTI 0810, and echoes the probe's STAN.  Connect failures map to
    REFUSED, deadline misses to TIMEOUT, anything else to
    NON_STANDARD_REPLY.
    """
    dictionary = dictionary or codec.default_dictionary()
    stan = codec.next_stan()
    request = codec.encode_message(codec.build_echo_request(stan), dictionary)
    started = clock.now_ms()
    deadline = started + timeout_ms
    try:
        conn = FrameConnection.connect(addr, timeout_s=timeout_ms / 1000.0, config=framer)
    except (ConnectionRefusedError, OSError):
        return EchoResult.fail(EchoFailure.REFUSED)
    with conn:
        try:
            conn.send_payload(request)
            while True:
                remaining = deadline - clock.now_ms()
                if remaining <= 0:
                    return EchoResult.fail(EchoFailure.TIMEOUT)
                payloads = conn.recv_payloads(timeout_s=remaining / 1000.0)
                if not payloads:
                    return EchoResult.fail(EchoFailure.NON_STANDARD_REPLY)
                # the probe's own fresh connection carries exactly one reply
                payload = payloads[0]
                message, verdict = codec.decode_message(payload, dictionary)
                if (
                    verdict.standard
                    and message.mti == codec.ECHO_RESPONSE_MTI
                    and message.field(11) == stan
                ):
                    return EchoResult.success(clock.now_ms() - started, payload)
                return EchoResult.fail(EchoFailure.NON_STANDARD_REPLY)
        except TimeoutError:
            return EchoResult.fail(EchoFailure.TIMEOUT)
        except (FramingError, OSError):
            return EchoResult.fail(EchoFailure.NON_STANDARD_REPLY)


def evaluate_sample(sample: HealthSample, thresholds: HealthThresholds) -> FailCause | None:
    """None for a passing sample, else the first failing condition.

    CPU is checked first and fails at the threshold itself: a 20% limit
    trips on 20, passes on 19.
    """
    if sample.cpu_pct >= thresholds.cpu_max_pct:
        return FailCause.CPU_OVER
    if not sample.echo.ok:
        return FailCause.ECHO
    return None


def update_member_state(
    member: MemberHealth, passed: bool, thresholds: HealthThresholds
) -> tuple[MemberHealth, bool]:
    """Fold one PASS/FAIL into the debounce; True when the state flipped."""
    if member.state is HealthState.UP:
        if passed:
            return replace(member, consecutive_pass=0, consecutive_fail=0), False
        fails = member.consecutive_fail + 1
        if fails >= thresholds.fall_count:
            return replace(member, state=HealthState.DOWN, consecutive_pass=0, consecutive_fail=0), True
        return replace(member, consecutive_pass=0, consecutive_fail=fails), False
    if not passed:
        return replace(member, consecutive_pass=0, consecutive_fail=0), False
    passes = member.consecutive_pass + 1
    if passes >= thresholds.rise_count:
        return replace(member, state=HealthState.UP, consecutive_pass=0, consecutive_fail=0), True
    return replace(member, consecutive_pass=passes, consecutive_fail=0), False


class MalformedHealthBody(ValueError):
    """Health body failed to parse; the monitor counts it as a FAIL."""


def render_health_body(sample: HealthSample) -> str:
    """Two lines: ``cpu=<int>`` then ``iso=<hex reply | NONE>``."""
    if sample.echo.ok and sample.echo.reply is not None:
        iso = sample.echo.reply.hex()
    else:
        iso = "NONE"
    return f"cpu={sample.cpu_pct}\niso={iso}\n"


def parse_health_body(text: str) -> tuple[int, bool]:
    """Inverse of render on the (cpu, echo-present) projection."""
    lines = text.split("\n")
    if len(lines) < 2:
        raise MalformedHealthBody(f"expected two lines, got {text!r}")
    cpu_line, iso_line = lines[0], lines[1]
    if not cpu_line.startswith("cpu="):
        raise MalformedHealthBody(f"first line must be cpu=<int>, got {cpu_line!r}")
    try:
        cpu = int(cpu_line[4:])
    except ValueError:
        raise MalformedHealthBody(f"bad cpu integer in {cpu_line!r}") from None
    if not iso_line.startswith("iso="):
        raise MalformedHealthBody(f"second line must be iso=..., got {iso_line!r}")
    value = iso_line[4:]
    if value == "NONE":
        return cpu, False
    try:
        bytes.fromhex(value)
    except ValueError:
        raise MalformedHealthBody(f"iso value is neither NONE nor hex: {value!r}") from None
    return cpu, True


def resolve_health_port(configured: int) -> int:
    """HA_HEALTH_PORT overrides whatever the config or flags said."""
    override = os.environ.get(PORT_ENV_VAR)
    if override is None:
        return configured
    try:
        return int(override)
    except ValueError:
        raise ValueError(f"{PORT_ENV_VAR} must be an integer, got {override!r}") from None


class HealthAgent:
    """Per-backend HTTP agent serving GET /health.

    CPU is read from the provider at request time.  The echo result
    comes from a background prober that hits the backend's own traffic
    port every sample_interval_ms, so one GET answers both questions.
    """

    def __init__(
        self,
        cpu_provider,
        echo_target: tuple[str, int],
        port: int = 0,
        host: str = "127.0.0.1",
        echo_timeout_ms: int = 1000,
        sample_interval_ms: int = 500,
        dictionary: codec.FieldDictionary | None = None,
        framer: FramerConfig = DEFAULT_FRAMER,
        clock=SYSTEM_CLOCK,
    ):
        self._cpu_provider = cpu_provider
        self._echo_target = echo_target
        self._echo_timeout_ms = echo_timeout_ms
        self._sample_interval_ms = sample_interval_ms
        self._dictionary = dictionary or codec.default_dictionary()
        self._framer = framer
        self._clock = clock
        self._latest_echo = EchoResult.fail(EchoFailure.TIMEOUT)
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._prober: threading.Thread | None = None
        agent = self

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_GET(self):  # noqa: N802 (http.server API)
                if self.path != HEALTH_PATH:
                    self.send_error(404)
                    return
                try:
                    body = agent.current_body()
                except Exception:
                    self.send_error(500)
                    return
                data = body.encode("ascii")
                self.send_response(200)
                self.send_header("Content-Type", "text/plain")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, fmt, *args):
                log.debug("health agent: " + fmt, *args)

        self._server = http.server.ThreadingHTTPServer((host, port), Handler)
        self._server.daemon_threads = True

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def addr(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return (host, port)

    def current_body(self) -> str:
        cpu = sample_cpu(self._cpu_provider)
        with self._lock:
            echo = self._latest_echo
        sample = HealthSample(cpu_pct=cpu, echo=echo, taken_at_ms=self._clock.now_ms())
        return render_health_body(sample)

    def _probe_loop(self):
        while not self._stop.is_set():
            result = echo_probe(
                self._echo_target,
                self._dictionary,
                timeout_ms=self._echo_timeout_ms,
                framer=self._framer,
                clock=self._clock,
            )
            with self._lock:
                self._latest_echo = result
            self._stop.wait(self._sample_interval_ms / 1000.0)

    def start(self) -> None:
        threading.Thread(
            target=lambda: self._server.serve_forever(poll_interval=0.1),
            name="health-http",
            daemon=True,
        ).start()
        self._prober = threading.Thread(target=self._probe_loop, name="health-probe", daemon=True)
        self._prober.start()

    def stop(self) -> None:
        self._stop.set()
        self._server.shutdown()
        self._server.server_close()
        if self._prober is not None:
            self._prober.join(timeout=2.0)


class HealthFetchError(Exception):
    """Monitor-side fetch failed: unreachable endpoint or malformed body."""


def fetch_health(addr: tuple[str, int], timeout_ms: int = 1000, clock=SYSTEM_CLOCK) -> HealthSample:
    """GET a member's /health and lift the body into a HealthSample.

    The echo projection only says whether the agent had a fresh reply,
    so presence maps to a zero-rtt OK and absence to a TIMEOUT failure.
    """
    conn = http.client.HTTPConnection(addr[0], addr[1], timeout=timeout_ms / 1000.0)
    try:
        conn.request("GET", HEALTH_PATH)
        response = conn.getresponse()
        body = response.read().decode("ascii", errors="replace")
        if response.status != 200:
            raise HealthFetchError(f"health endpoint returned {response.status}")
    except HealthFetchError:
        raise
    except Exception as exc:
        raise HealthFetchError(f"health fetch from {addr} failed: {exc}") from exc
    finally:
        conn.close()
    try:
        cpu, iso_present = parse_health_body(body)
    except MalformedHealthBody as exc:
        raise HealthFetchError(str(exc)) from exc
    echo = EchoResult.success(0.0) if iso_present else EchoResult.fail(EchoFailure.TIMEOUT)
    return HealthSample(cpu_pct=clamp_cpu(cpu), echo=echo, taken_at_ms=clock.now_ms())
