"""Token-bucket throttle shared by live provider and resolver clients."""

from __future__ import annotations

import threading
import time


class TokenBucket:
    """Thread-safe token bucket; ``acquire`` blocks until a token is free.

    capacity tokens refill at ``rate`` per second. A zero or negative rate
    disables throttling entirely (used by scripted/stub backends).
    """

    def __init__(self, rate: float, capacity: int = 1):
        self.rate = rate
        self.capacity = max(1, capacity)
        self._tokens = float(self.capacity)
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        if self.rate <= 0:
            return
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)
