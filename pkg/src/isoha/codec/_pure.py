"""Pure-Python codec kernels.

Reference implementation of the per-message hot path: bitmap transcription
and the left-to-right payload scanner.  ``_speedups.pyx`` mirrors these
functions exactly; the package selects one implementation at import time.

The scanner reports the FIRST defect in strict left-to-right character
order: a bad character earlier in the input wins over running out of input
later, and running out of input mid-unit is TRUNCATED.
"""

from __future__ import annotations

BACKEND = "python"

# Defect codes shared with the C kernel (0 means standard).
OK = 0
TRUNCATED = 1
TRAILING_BYTES = 2
COMBINED = 3
BAD_MTI = 4
BAD_LENGTH_INDICATOR = 5
BAD_CONTENT = 6
UNKNOWN_FIELD = 7

_HEX_UPPER = b"0123456789ABCDEF"
_HEX_VALUE = {c: i for i, c in enumerate(b"0123456789abcdef")}
_HEX_VALUE.update({c: i for i, c in enumerate(b"0123456789ABCDEF")})


def _is_digit(b: int) -> bool:
    return 0x30 <= b <= 0x39


def _content_ok(b: int, content_code: int) -> bool:
    if content_code == 0:  # NUMERIC
        return 0x30 <= b <= 0x39
    if content_code == 1:  # ALPHANUM
        return 0x30 <= b <= 0x39 or 0x41 <= b <= 0x5A or 0x61 <= b <= 0x7A
    return 0x20 <= b <= 0x7E  # ANS: printable ASCII


def bitmap_to_fields(hex_chars: str) -> list[int]:
    """Transcribe a 16- or 32-char hex bitmap into the set bit positions.

    Bit 1 is the most significant bit of the first byte.  Case-insensitive.
    A 32-char input whose bit 1 is clear is rejected as inconsistent (the
    primary map denies the secondary it carries).
    """
    n = len(hex_chars)
    if n not in (16, 32):
        raise ValueError(f"bitmap must be 16 or 32 hex chars, got {n}")
    raw = hex_chars.encode("ascii", errors="replace")
    fields = []
    for i, ch in enumerate(raw):
        value = _HEX_VALUE.get(ch)
        if value is None:
            raise ValueError(f"non-hex character {chr(ch)!r} at offset {i}")
        for j in range(4):
            if value & (8 >> j):
                fields.append(i * 4 + j + 1)
    if n == 32 and (not fields or fields[0] != 1):
        raise ValueError("32-char bitmap with secondary-indicator bit clear")
    return fields


def fields_to_bitmap(numbers) -> str:
    """Render field numbers (each in 2..128) as uppercase hex.

    Emits 32 chars with bit 1 set when any number exceeds 64, else 16.
    """
    bits = 0
    wide = False
    for n in numbers:
        if not 2 <= n <= 128:
            raise ValueError(f"field number {n} outside 2..128")
        bits |= 1 << (128 - n)
        if n > 64:
            wide = True
    if wide:
        bits |= 1 << 127  # secondary-bitmap indicator
        return f"{bits:032X}"
    return f"{bits >> 64:016X}"


def scan_payload(data: bytes, kind, length, content):
    """Scan one ASCII payload against a compiled field table.

    Returns ``(defect, mti, numbers, values)`` where ``defect`` is OK or the
    first defect code, ``mti`` is the 4-digit type string or None when it
    could not be recovered, and ``numbers``/``values`` hold the data
    elements fully parsed before any defect.
    """
    size = len(data)
    numbers: list[int] = []
    values: list[str] = []

    # Message type indicator: 4 decimal digits.
    for i in range(min(4, size)):
        if not _is_digit(data[i]):
            return BAD_MTI, None, numbers, values
    if size < 4:
        return TRUNCATED, None, numbers, values
    mti = data[:4].decode("ascii")
    pos = 4

    # Bitmaps: uppercase hex only, so a standard payload re-encodes byte
    # for byte.  Bit 1 of the primary map announces the secondary.
    bits = 0
    for i in range(min(16, size - pos)):
        b = data[pos + i]
        if 0x30 <= b <= 0x39:
            bits = (bits << 4) | (b - 0x30)
        elif 0x41 <= b <= 0x46:
            bits = (bits << 4) | (b - 0x41 + 10)
        else:
            return BAD_CONTENT, mti, numbers, values
    if size - pos < 16:
        return TRUNCATED, mti, numbers, values
    pos += 16
    if bits & (1 << 63):
        lo = 0
        for i in range(min(16, size - pos)):
            b = data[pos + i]
            if 0x30 <= b <= 0x39:
                lo = (lo << 4) | (b - 0x30)
            elif 0x41 <= b <= 0x46:
                lo = (lo << 4) | (b - 0x41 + 10)
            else:
                return BAD_CONTENT, mti, numbers, values
        if size - pos < 16:
            return TRUNCATED, mti, numbers, values
        pos += 16
        bits = (bits << 64) | lo
        width = 128
    else:
        width = 64

    # Data elements in ascending field order.
    for n in range(2, width + 1):
        if not bits & (1 << (width - n)):
            continue
        k = kind[n]
        if k == 0:
            return UNKNOWN_FIELD, mti, numbers, values
        if k == 1:
            want = length[n]
        else:
            digits = 2 if k == 2 else 3
            avail = min(digits, size - pos)
            for i in range(avail):
                if not _is_digit(data[pos + i]):
                    return BAD_LENGTH_INDICATOR, mti, numbers, values
            if avail < digits:
                return TRUNCATED, mti, numbers, values
            want = int(data[pos : pos + digits])
            if want > length[n]:
                return BAD_LENGTH_INDICATOR, mti, numbers, values
            pos += digits
        cls = content[n]
        avail = min(want, size - pos)
        for i in range(avail):
            if not _content_ok(data[pos + i], cls):
                return BAD_CONTENT, mti, numbers, values
        if avail < want:
            return TRUNCATED, mti, numbers, values
        numbers.append(n)
        values.append(data[pos : pos + want].decode("ascii"))
        pos += want

    if pos == size:
        return OK, mti, numbers, values
    # Leftover bytes: a fresh 4-digit MTI start means a second message was
    # spliced on; anything else is stray trailing data.
    if size - pos >= 4 and all(_is_digit(data[pos + i]) for i in range(4)):
        return COMBINED, mti, numbers, values
    return TRAILING_BYTES, mti, numbers, values
