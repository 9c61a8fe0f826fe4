"""Socket plumbing shared by every networked role.

Thin layer over a TCP socket that speaks the length-prefixed framing:
one writer lock for whole-frame sends, one FrameBuffer for receives.
Only the receive side is single-owner; sends may come from any thread.
"""

from __future__ import annotations

import socket
import threading

from .framing import DEFAULT_FRAMER, FrameBuffer, FramerConfig, encode_frame

RECV_CHUNK = 65536


class ConnectionClosed(ConnectionError):
    """Peer closed the connection while a frame was still expected."""


def parse_addr(text: str) -> tuple[str, int]:
    """Parse ``host:port``; bare ``:port`` means localhost."""
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {text!r}")
    return (host or "127.0.0.1", int(port))


def format_addr(addr: tuple[str, int]) -> str:
    return f"{addr[0]}:{addr[1]}"


class FrameConnection:
    """A connected socket exchanging framed payloads."""

    def __init__(self, sock: socket.socket, config: FramerConfig = DEFAULT_FRAMER):
        self.sock = sock
        self.config = config
        self._buffer = FrameBuffer(config)
        self._send_lock = threading.Lock()

    @classmethod
    def connect(
        cls,
        addr: tuple[str, int],
        timeout_s: float | None = 5.0,
        config: FramerConfig = DEFAULT_FRAMER,
    ) -> "FrameConnection":
        sock = socket.create_connection(addr, timeout=timeout_s)
        sock.settimeout(None)
        return cls(sock, config)

    def send_payload(self, payload: bytes) -> None:
        frame = encode_frame(payload, self.config)
        with self._send_lock:
            self.sock.sendall(frame)

    def recv_payloads(self, timeout_s: float | None = None) -> list[bytes]:
        """Block until at least one complete payload arrives.

        Returns [] on orderly EOF.  Raises TimeoutError when the timeout
        elapses first and FramingError on a violated frame header.
        """
        while True:
            self.sock.settimeout(timeout_s)
            try:
                chunk = self.sock.recv(RECV_CHUNK)
            except socket.timeout:
                raise TimeoutError("no frame within timeout") from None
            finally:
                self.sock.settimeout(None)
            if not chunk:
                if self._buffer.pending_bytes:
                    raise ConnectionClosed("EOF inside a partial frame")
                return []
            ready = self._buffer.push_bytes(chunk)
            if ready:
                return ready

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()

    def __enter__(self) -> "FrameConnection":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
