"""Virtual clock and deterministic event queue."""
import heapq
from dataclasses import dataclass, field
from typing import Callable, List, Optional

from errors import SchedulingError

Event = Callable[[], None]


@dataclass(order=True)
class _ScheduledEvent:
    """Heap item: ordered by time, then by insertion sequence."""
    at_us: int
    seq: int
    event: Event = field(compare=False)


class VirtualClock:
    """
    Single-threaded discrete-event loop over integer virtual microseconds.

    Events fire in non-decreasing time order; events scheduled for the same
    instant fire in the order they were scheduled.
    """

    def __init__(self, start_us: int = 0):
        if start_us < 0:
            raise ValueError("start_us must be non-negative")
        self._now_us = start_us
        self._queue: List[_ScheduledEvent] = []
        self._next_seq = 0
        self.dispatched = 0

    @property
    def now_us(self) -> int:
        return self._now_us

    @property
    def now_ms(self) -> float:
        return self._now_us / 1000

    def schedule(self, at_us: int, event: Event) -> None:
        """
        Enqueue `event` to fire at virtual time `at_us`.

        Raises:
            SchedulingError: if at_us is earlier than the current time
        """
        if at_us < self._now_us:
            raise SchedulingError(at_us, self._now_us)
        heapq.heappush(self._queue, _ScheduledEvent(at_us, self._next_seq, event))
        self._next_seq += 1

    def has_pending(self) -> bool:
        return bool(self._queue)

    def peek_next_us(self) -> Optional[int]:
        if not self._queue:
            return None
        return self._queue[0].at_us

    def step(self) -> bool:
        """Dispatch the next event. Returns False when the queue is empty."""
        if not self._queue:
            return False
        item = heapq.heappop(self._queue)
        self._now_us = item.at_us
        self.dispatched += 1
        item.event()
        return True

    def run(self, until_us: Optional[int] = None) -> int:
        """
        Dispatch events until the queue drains or the next event lies beyond
        `until_us`. Returns the clock value afterwards.
        """
        while self._queue:
            if until_us is not None and self._queue[0].at_us > until_us:
                self._now_us = max(self._now_us, until_us)
                break
            self.step()
        return self._now_us


def schedule(clock: VirtualClock, at_us: int, event: Event) -> None:
    """Module-level form of VirtualClock.schedule."""
    clock.schedule(at_us, event)
