"""Length-prefixed message delimiting for ISO 8583 over TCP.

Wire format: ``[len: N-byte big-endian unsigned][payload: len bytes]``,
repeated.  The decoder is incremental: feed it arbitrary chunks and it
yields complete payloads, holding at most one partial frame between
calls.
"""

from __future__ import annotations

from dataclasses import dataclass


class FramingError(Exception):
    """Base for framing violations."""


class FrameEncodeError(FramingError):
    """Payload cannot be framed: empty, or larger than max_frame."""


class DeclaredOversize(FramingError):
    """A header announced more than max_frame; the connection is poisoned."""


class ZeroLengthHeader(FramingError):
    """A header announced an empty message; the connection is poisoned."""


class PoisonedBuffer(FramingError):
    """push_bytes called again after a framing violation."""


@dataclass(frozen=True, slots=True)
class FramerConfig:
    """Header width and frame cap shared by both ends of a connection."""

    header_bytes: int = 2
    max_frame: int = 4096

    def __post_init__(self):
        if self.header_bytes not in (2, 4):
            raise ValueError(f"header_bytes must be 2 or 4, got {self.header_bytes}")
        # 20 = smallest meaningful message (MTI + primary bitmap)
        if self.max_frame < 20:
            raise ValueError(f"max_frame must be >= 20, got {self.max_frame}")
        if self.max_frame > (1 << (8 * self.header_bytes)) - 1:
            raise ValueError(
                f"max_frame {self.max_frame} not expressible in {self.header_bytes} header bytes"
            )


DEFAULT_FRAMER = FramerConfig()


def encode_frame(payload: bytes, config: FramerConfig = DEFAULT_FRAMER) -> bytes:
    """Prefix a payload with its big-endian length header."""
    if not payload:
        raise FrameEncodeError("empty payload cannot be framed")
    if len(payload) > config.max_frame:
        raise FrameEncodeError(f"payload of {len(payload)} bytes exceeds max_frame {config.max_frame}")
    return len(payload).to_bytes(config.header_bytes, "big") + payload


class FrameBuffer:
    """Incremental frame extractor for one connection.

    Not shareable across concurrent readers.  After a framing violation
    the buffer is poisoned and refuses further input; the owning
    connection must be closed.
    """

    __slots__ = ("config", "_pending", "_poisoned")

    def __init__(self, config: FramerConfig = DEFAULT_FRAMER):
        self.config = config
        self._pending = bytearray()
        self._poisoned = False

    @property
    def poisoned(self) -> bool:
        return self._poisoned

    @property
    def pending_bytes(self) -> int:
        return len(self._pending)

    def push_bytes(self, chunk: bytes) -> list[bytes]:
        """Absorb a chunk and return every payload completed by it, in order."""
        if self._poisoned:
            raise PoisonedBuffer("connection already failed framing; discard it")
        self._pending += chunk
        header = self.config.header_bytes
        payloads = []
        while len(self._pending) >= header:
            declared = int.from_bytes(self._pending[:header], "big")
            if declared == 0:
                self._poisoned = True
                raise ZeroLengthHeader("header declared a zero-length message")
            if declared > self.config.max_frame:
                self._poisoned = True
                raise DeclaredOversize(
                    f"header declared {declared} bytes, max_frame is {self.config.max_frame}"
                )
            if len(self._pending) < header + declared:
                break
            payloads.append(bytes(self._pending[header : header + declared]))
            del self._pending[: header + declared]
        return payloads
