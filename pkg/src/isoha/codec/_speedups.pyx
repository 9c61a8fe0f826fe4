# cython: language_level=3, boundscheck=False, wraparound=False
"""C codec kernels.

Compiled twin of ``_pure``: same functions, same defect codes, same
left-to-right first-defect order.  Behavioral changes must land in both
files together.
"""

BACKEND = "c"

# Defect codes shared with the pure kernel (0 means standard).
OK = 0
TRUNCATED = 1
TRAILING_BYTES = 2
COMBINED = 3
BAD_MTI = 4
BAD_LENGTH_INDICATOR = 5
BAD_CONTENT = 6
UNKNOWN_FIELD = 7


cdef inline bint _is_digit(unsigned char b) noexcept:
    return 0x30 <= b <= 0x39


cdef inline bint _content_ok(unsigned char b, int content_code) noexcept:
    if content_code == 0:  # NUMERIC
        return 0x30 <= b <= 0x39
    if content_code == 1:  # ALPHANUM
        return 0x30 <= b <= 0x39 or 0x41 <= b <= 0x5A or 0x61 <= b <= 0x7A
    return 0x20 <= b <= 0x7E  # ANS: printable ASCII


def bitmap_to_fields(str hex_chars):
    """Transcribe a 16- or 32-char hex bitmap into the set bit positions.

    Bit 1 is the most significant bit of the first byte.  Case-insensitive.
    A 32-char input whose bit 1 is clear is rejected as inconsistent (the
    primary map denies the secondary it carries).
    """
    cdef Py_ssize_t n = len(hex_chars)
    cdef Py_ssize_t i
    cdef int j, value
    cdef unsigned char ch
    if n != 16 and n != 32:
        raise ValueError(f"bitmap must be 16 or 32 hex chars, got {n}")
    raw = hex_chars.encode("ascii", errors="replace")
    cdef const unsigned char* buf = <const unsigned char*> <const char*> raw
    fields = []
    for i in range(n):
        ch = buf[i]
        if 0x30 <= ch <= 0x39:
            value = ch - 0x30
        elif 0x41 <= ch <= 0x46:
            value = ch - 0x41 + 10
        elif 0x61 <= ch <= 0x66:
            value = ch - 0x61 + 10
        else:
            raise ValueError(f"non-hex character {chr(ch)!r} at offset {i}")
        for j in range(4):
            if value & (8 >> j):
                fields.append(i * 4 + j + 1)
    if n == 32 and (not fields or fields[0] != 1):
        raise ValueError("32-char bitmap with secondary-indicator bit clear")
    return fields


def fields_to_bitmap(numbers):
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


def scan_payload(bytes data, const signed char[:] kind, const short[:] length,
                 const signed char[:] content):
    """Scan one ASCII payload against a compiled field table.

    Returns ``(defect, mti, numbers, values)`` where ``defect`` is OK or the
    first defect code, ``mti`` is the 4-digit type string or None when it
    could not be recovered, and ``numbers``/``values`` hold the data
    elements fully parsed before any defect.
    """
    cdef Py_ssize_t size = len(data)
    cdef const unsigned char* buf = <const unsigned char*> <const char*> data
    cdef Py_ssize_t i, pos, avail, lim
    cdef int n, k, want, digits, cls, width
    cdef unsigned char b
    cdef unsigned long long hi = 0, lo = 0, present
    cdef bint second_mti
    numbers = []
    values = []

    # Message type indicator: 4 decimal digits.
    for i in range(min(4, size)):
        if not _is_digit(buf[i]):
            return BAD_MTI, None, numbers, values
    if size < 4:
        return TRUNCATED, None, numbers, values
    mti = data[:4].decode("ascii")
    pos = 4

    # Bitmaps: uppercase hex only, so a standard payload re-encodes byte
    # for byte.  Bit 1 of the primary map announces the secondary.
    lim = size - pos
    if lim > 16:
        lim = 16
    for i in range(lim):
        b = buf[pos + i]
        if 0x30 <= b <= 0x39:
            hi = (hi << 4) | <unsigned long long>(b - 0x30)
        elif 0x41 <= b <= 0x46:
            hi = (hi << 4) | <unsigned long long>(b - 0x41 + 10)
        else:
            return BAD_CONTENT, mti, numbers, values
    if size - pos < 16:
        return TRUNCATED, mti, numbers, values
    pos += 16
    if hi & (<unsigned long long>1 << 63):
        lim = size - pos
        if lim > 16:
            lim = 16
        for i in range(lim):
            b = buf[pos + i]
            if 0x30 <= b <= 0x39:
                lo = (lo << 4) | <unsigned long long>(b - 0x30)
            elif 0x41 <= b <= 0x46:
                lo = (lo << 4) | <unsigned long long>(b - 0x41 + 10)
            else:
                return BAD_CONTENT, mti, numbers, values
        if size - pos < 16:
            return TRUNCATED, mti, numbers, values
        pos += 16
        width = 128
    else:
        width = 64

    # Data elements in ascending field order.
    for n in range(2, width + 1):
        if n <= 64:
            present = hi & (<unsigned long long>1 << (64 - n))
        else:
            present = lo & (<unsigned long long>1 << (128 - n))
        if not present:
            continue
        k = kind[n]
        if k == 0:
            return UNKNOWN_FIELD, mti, numbers, values
        if k == 1:
            want = length[n]
        else:
            digits = 2 if k == 2 else 3
            avail = size - pos
            if avail > digits:
                avail = digits
            for i in range(avail):
                if not _is_digit(buf[pos + i]):
                    return BAD_LENGTH_INDICATOR, mti, numbers, values
            if avail < digits:
                return TRUNCATED, mti, numbers, values
            want = 0
            for i in range(digits):
                want = want * 10 + (buf[pos + i] - 0x30)
            if want > length[n]:
                return BAD_LENGTH_INDICATOR, mti, numbers, values
            pos += digits
        cls = content[n]
        avail = size - pos
        if avail > want:
            avail = want
        for i in range(avail):
            if not _content_ok(buf[pos + i], cls):
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
    if size - pos >= 4:
        second_mti = True
        for i in range(4):
            if not _is_digit(buf[pos + i]):
                second_mti = False
                break
        if second_mti:
            return COMBINED, mti, numbers, values
    return TRAILING_BYTES, mti, numbers, values
