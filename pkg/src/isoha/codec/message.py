"""ISO 8583 message model: encode, decode, and standard/non-standard verdicts.

Wire form is all-ASCII: a 4-digit MTI, one or two 16-char uppercase-hex
bitmaps, then the data elements in ascending field order, each fixed-width
or carrying a 2/3-digit decimal length prefix.  Decoding never raises for
malformed input; every byte string maps to exactly one :class:`Verdict`.
"""

from __future__ import annotations

import enum
import itertools
import os
import threading
from dataclasses import dataclass
from typing import Mapping

from .fields import FieldDictionary, FieldFormat, default_dictionary

if os.environ.get("ISOHA_PURE_PYTHON"):
    from . import _pure as _kernel
else:
    try:
        from . import _speedups as _kernel  # type: ignore[attr-defined]
    except ImportError:
        from . import _pure as _kernel


def kernel_backend() -> str:
    """Which kernel implementation is active: ``"c"`` or ``"python"``."""
    return _kernel.BACKEND


class CodecError(ValueError):
    """Base for codec failures raised out-of-band (encode side only)."""


class BitmapError(CodecError):
    """Malformed bitmap input or field number outside 2..128."""


class EncodeError(CodecError):
    """Message cannot be rendered under the given field dictionary."""


class Mti(str):
    """Message type indicator: exactly four ASCII decimal digits."""

    __slots__ = ()

    def __new__(cls, value: str) -> "Mti":
        if len(value) != 4 or not value.isascii() or not value.isdigit():
            raise CodecError(f"MTI must be 4 ASCII digits, got {value!r}")
        return super().__new__(cls, value)

    @property
    def is_request(self) -> bool:
        return int(self[2]) % 2 == 0


def response_mti(request: Mti | str) -> Mti:
    """The response type for a request MTI: third digit incremented by one.

    Rejects an MTI whose third digit is odd (already a response).
    """
    mti = Mti(request)
    if not mti.is_request:
        raise CodecError(f"{mti} is already a response MTI")
    return Mti(mti[:2] + str(int(mti[2]) + 1) + mti[3])


class VerdictReason(enum.Enum):
    TRUNCATED = _kernel.TRUNCATED
    TRAILING_BYTES = _kernel.TRAILING_BYTES
    COMBINED = _kernel.COMBINED
    BAD_MTI = _kernel.BAD_MTI
    BAD_LENGTH_INDICATOR = _kernel.BAD_LENGTH_INDICATOR
    BAD_CONTENT = _kernel.BAD_CONTENT
    UNKNOWN_FIELD = _kernel.UNKNOWN_FIELD


@dataclass(frozen=True, slots=True)
class Verdict:
    """Classification of one payload: standard, or the first defect found."""

    standard: bool
    reason: VerdictReason | None = None

    def __post_init__(self):
        if self.standard and self.reason is not None:
            raise ValueError("standard verdict carries no reason")
        if not self.standard and self.reason is None:
            raise ValueError("non-standard verdict needs a reason")

    def __str__(self) -> str:
        return "STANDARD" if self.standard else f"NON_STANDARD({self.reason.name})"


STANDARD = Verdict(standard=True)


@dataclass(frozen=True)
class IsoMessage:
    """A parsed message: MTI plus field-number to ASCII-value map.

    Treated as immutable; the codec never mutates a message it is given or
    returns.  Field values are validated against a dictionary at encode
    time.
    """

    mti: Mti
    fields: Mapping[int, str]

    def __post_init__(self):
        object.__setattr__(self, "mti", Mti(self.mti))

    def field(self, number: int, default: str | None = None) -> str | None:
        return self.fields.get(number, default)


def decode_bitmap(hex_chars: str) -> list[int]:
    """Set bit positions of a 16- or 32-char hex bitmap, ascending.

    Bit 1 is the most significant bit of the first byte; bit 1 set in a
    32-char input announces the secondary map (bits 65..128).
    """
    try:
        return _kernel.bitmap_to_fields(hex_chars)
    except ValueError as exc:
        raise BitmapError(str(exc)) from None


def encode_bitmap(numbers) -> str:
    """Uppercase hex bitmap for field numbers in 2..128.

    Exact inverse of :func:`decode_bitmap`: 32 chars with bit 1 set when
    any number exceeds 64, else 16 chars.
    """
    try:
        return _kernel.fields_to_bitmap(sorted(set(numbers)))
    except ValueError as exc:
        raise BitmapError(str(exc)) from None


def decode_message(
    data: bytes, dictionary: FieldDictionary | None = None
) -> tuple[IsoMessage | None, Verdict]:
    """Parse a payload, returning the best-effort message and its verdict.

    A STANDARD result re-encodes byte for byte to the input.  On a
    non-standard payload the message holds whatever parsed cleanly before
    the first defect, or None when not even the MTI was recoverable.
    """
    dictionary = dictionary or default_dictionary()
    table = dictionary.compiled
    code, mti, numbers, values = _kernel.scan_payload(data, table.kind, table.length, table.content)
    message = None
    if mti is not None:
        message = IsoMessage(Mti(mti), dict(zip(numbers, values)))
    if code == _kernel.OK:
        return message, STANDARD
    return message, Verdict(standard=False, reason=VerdictReason(code))


def classify(data: bytes, dictionary: FieldDictionary | None = None) -> Verdict:
    """Verdict for a payload; identical to the one decode_message returns."""
    return decode_message(data, dictionary)[1]


def _check_value(number: int, value: str, dictionary: FieldDictionary) -> None:
    spec = dictionary.specs.get(number)
    if spec is None:
        raise EncodeError(f"field {number} has no dictionary entry")
    if spec.format is FieldFormat.FIXED:
        if len(value) != spec.length:
            raise EncodeError(
                f"field {number}: FIXED({spec.length}) value has length {len(value)}"
            )
    elif len(value) > spec.length:
        raise EncodeError(
            f"field {number}: value length {len(value)} exceeds {spec.format.value}({spec.length})"
        )
    content = dictionary.compiled.content[number]
    for ch in value:
        if not _kernel_content_ok(ord(ch), content):
            raise EncodeError(f"field {number}: character {ch!r} outside content class")


def _kernel_content_ok(b: int, content_code: int) -> bool:
    if content_code == 0:
        return 0x30 <= b <= 0x39
    if content_code == 1:
        return 0x30 <= b <= 0x39 or 0x41 <= b <= 0x5A or 0x61 <= b <= 0x7A
    return 0x20 <= b <= 0x7E


def encode_message(message: IsoMessage, dictionary: FieldDictionary | None = None) -> bytes:
    """Render a message as ASCII wire bytes.

    Layout: MTI, bitmap hex, then fields ascending, LL/LLL prefixes
    zero-padded.  Decoding the result yields an equal message, STANDARD.
    """
    dictionary = dictionary or default_dictionary()
    numbers = sorted(message.fields)
    for n in numbers:
        _check_value(n, message.fields[n], dictionary)
    parts = [str(message.mti), encode_bitmap(numbers)]
    for n in numbers:
        value = message.fields[n]
        fmt = dictionary[n].format
        if fmt is FieldFormat.LLVAR:
            parts.append(f"{len(value):02d}")
        elif fmt is FieldFormat.LLLVAR:
            parts.append(f"{len(value):03d}")
        parts.append(value)
    return "".join(parts).encode("ascii")


ECHO_REQUEST_MTI = Mti("0800")
ECHO_RESPONSE_MTI = Mti("0810")
NETWORK_MGMT_ECHO_CODE = "301"
APPROVED_RESPONSE_CODE = "00"


def build_echo_request(stan: str) -> IsoMessage:
    """Network-management echo probe: 0800 with a caller-chosen STAN."""
    if len(stan) != 6 or not stan.isascii() or not stan.isdigit():
        raise EncodeError(f"STAN must be 6 ASCII digits, got {stan!r}")
    return IsoMessage(ECHO_REQUEST_MTI, {11: stan, 70: NETWORK_MGMT_ECHO_CODE})


_stan_counter = itertools.count(1)
_stan_lock = threading.Lock()


def next_stan() -> str:
    """Process-wide fresh 6-digit STAN, wrapping at 999999."""
    with _stan_lock:
        n = next(_stan_counter)
    return f"{(n - 1) % 999_999 + 1:06d}"
