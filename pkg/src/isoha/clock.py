"""Pluggable time source so monitor timing is testable without sleeping."""

from __future__ import annotations

import threading
import time


class SystemClock:
    """Monotonic wall time; the default everywhere."""

    def now_ms(self) -> float:
        return time.monotonic() * 1000.0

    def sleep_ms(self, duration_ms: float) -> None:
        if duration_ms > 0:
            time.sleep(duration_ms / 1000.0)


class FakeClock:
    """Manually advanced clock for deterministic timing tests."""

    def __init__(self, start_ms: float = 0.0):
        self._now = start_ms
        self._cond = threading.Condition()

    def now_ms(self) -> float:
        with self._cond:
            return self._now

    def sleep_ms(self, duration_ms: float) -> None:
        deadline = self.now_ms() + duration_ms
        with self._cond:
            while self._now < deadline:
                self._cond.wait(timeout=1.0)

    def advance_ms(self, delta_ms: float) -> None:
        with self._cond:
            self._now += delta_ms
            self._cond.notify_all()


SYSTEM_CLOCK = SystemClock()
