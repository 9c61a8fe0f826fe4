"""Shared test utilities: independent oracles and random message material.

The bitmap oracle here deliberately avoids the production code path: it
builds a byte buffer bit by bit and hexlifies it, so agreement with the
codec is evidence rather than tautology.  The debounce reference is a
run-length fold, a different formulation than the production counters.
"""

from __future__ import annotations

import binascii
import random
import socket
import string
import threading

from isoha.codec import (
    FieldDictionary,
    FieldFormat,
    IsoMessage,
    Mti,
    decode_message,
    default_dictionary,
    encode_message,
    response_mti,
)
from isoha.framing import DEFAULT_FRAMER, FramingError
from isoha.health import EchoFailure, EchoResult, HealthFetchError, HealthSample
from isoha.netio import FrameConnection

_ANS_ALPHABET = "".join(chr(c) for c in range(0x20, 0x7F))
_ALPHABETS = {
    "N": string.digits,
    "AN": string.digits + string.ascii_letters,
    "ANS": _ANS_ALPHABET,
}


def oracle_bitmap_hex(numbers) -> str:
    """Hex bitmap built per bit into a byte buffer; bit 1 = MSB of byte 0."""
    width = 128 if max(numbers) > 64 else 64
    buf = bytearray(width // 8)
    for n in numbers:
        buf[(n - 1) // 8] |= 0x80 >> ((n - 1) % 8)
    return binascii.hexlify(bytes(buf)).decode("ascii").upper()


def oracle_bitmap_fields(hex_chars: str) -> list[int]:
    """Set bit positions read one nibble at a time from the hex text."""
    out = []
    for n in range(1, len(hex_chars) * 4 + 1):
        nibble = int(hex_chars[(n - 1) // 4], 16)
        if nibble & (8 >> ((n - 1) % 4)):
            out.append(n)
    return out


def random_field_set(rng: random.Random) -> list[int]:
    """Non-empty random subset of 2..128."""
    k = rng.randint(1, 20)
    return sorted(rng.sample(range(2, 129), k))


def random_message(rng: random.Random, dictionary: FieldDictionary | None = None) -> IsoMessage:
    """Dictionary-valid message with random MTI, field subset, and values."""
    dictionary = dictionary or default_dictionary()
    numbers = sorted(dictionary.specs)
    chosen = rng.sample(numbers, rng.randint(1, len(numbers)))
    fields = {}
    for n in chosen:
        spec = dictionary[n]
        if spec.format is FieldFormat.FIXED:
            size = spec.length
        else:
            size = rng.randint(0, spec.length)
        alphabet = _ALPHABETS[spec.content.value]
        fields[n] = "".join(rng.choice(alphabet) for _ in range(size))
    return IsoMessage(Mti(f"{rng.randrange(10000):04d}"), fields)


def reference_debounce(initial_up: bool, results, fall_count: int, rise_count: int):
    """Run-length debounce reference: flip exactly when a run of results
    opposing the current state reaches the relevant threshold.

    Returns (final_state_up, [indices where a flip happened]).
    """
    state_up = initial_up
    flips = []
    run = 0
    for i, passed in enumerate(results):
        opposing = (not passed) if state_up else passed
        run = run + 1 if opposing else 0
        threshold = fall_count if state_up else rise_count
        if opposing and run == threshold:
            state_up = not state_up
            flips.append(i)
            run = 0
    return state_up, flips


class ScriptedHealth:
    """Mutable per-member health served by a fake fetch, keyed by addr."""

    def __init__(self):
        self.cpu = {"primary": 5, "standby": 5}
        self.iso = {"primary": True, "standby": True}
        self.unreachable = {"primary": False, "standby": False}
        self._by_addr = {}

    def register(self, member_id, addr):
        self._by_addr[addr] = member_id

    def fetch(self, addr, timeout_ms):
        member_id = self._by_addr[addr]
        if self.unreachable[member_id]:
            raise HealthFetchError("scripted outage")
        echo = (
            EchoResult.success(0.0)
            if self.iso[member_id]
            else EchoResult.fail(EchoFailure.TIMEOUT)
        )
        return HealthSample(cpu_pct=self.cpu[member_id], echo=echo, taken_at_ms=0.0)


def echo_reply_for(payload: bytes) -> bytes | None:
    """Standard 0810 answer to a standard 0800 probe; None otherwise."""
    message, verdict = decode_message(payload)
    if not verdict.standard or message.mti != "0800":
        return None
    reply = IsoMessage(
        response_mti(message.mti),
        {11: message.field(11, "000000"), 39: "00", 70: message.field(70, "301")},
    )
    return encode_message(reply)


class StubIsoServer:
    """Minimal framed ISO listener for probe and proxy tests.

    ``handler(payload) -> reply payload | None`` decides each answer;
    the default echoes 0800 probes.  Ephemeral port, threads per
    connection, silent teardown.
    """

    def __init__(self, handler=echo_reply_for, framer=DEFAULT_FRAMER):
        self.handler = handler
        self.framer = framer
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind(("127.0.0.1", 0))
        self._listener.listen(32)
        self._stopping = threading.Event()
        self.received: list[bytes] = []
        self._lock = threading.Lock()

    @property
    def addr(self) -> tuple[str, int]:
        return self._listener.getsockname()

    def start(self) -> "StubIsoServer":
        threading.Thread(target=self._accept_loop, daemon=True).start()
        return self

    def _accept_loop(self):
        while not self._stopping.is_set():
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._serve, args=(sock,), daemon=True).start()

    def _serve(self, sock: socket.socket):
        conn = FrameConnection(sock, self.framer)
        try:
            while True:
                payloads = conn.recv_payloads()
                if not payloads:
                    return
                for payload in payloads:
                    with self._lock:
                        self.received.append(payload)
                    reply = self.handler(payload)
                    if reply is not None:
                        conn.send_payload(reply)
        except (FramingError, OSError, TimeoutError, ConnectionError):
            return
        finally:
            conn.close()

    def stop(self):
        self._stopping.set()
        try:
            self._listener.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._listener.close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def free_port() -> int:
    """A port that was just free; for refused-connection tests."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    return port
