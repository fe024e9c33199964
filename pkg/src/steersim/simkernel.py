"""Deterministic virtual-time event loop.

Time is an integer count of nanoseconds since simulation start. Events that
share a fire time dispatch in insertion order, so a run with a fixed seed
replays identically event for event.
"""

import heapq
import itertools
import random

# Unit multipliers for converting configuration values into nanoseconds.
NS = 1
US = 1_000
MS = 1_000_000
SEC = 1_000_000_000


class SchedulingError(ValueError):
    """Scheduling an event before now() is a causality bug in the caller."""


class Simulator:
    """Single-threaded event queue over integer nanosecond virtual time.

    An event is an opaque zero-argument callable; total dispatch order is
    (fire_time, insertion ordinal). A run owns all of its state: separate
    runs are independent and may execute in parallel processes.
    """

    def __init__(self):
        self._heap = []
        self._ordinal = itertools.count()
        self._now = 0
        self.fired_total = 0

    def now(self) -> int:
        return self._now

    def schedule(self, fire_time: int, action) -> int:
        """Queue `action` to run at `fire_time`; returns a unique event id."""
        if fire_time < self._now:
            raise SchedulingError(
                f"event scheduled at {fire_time} ns, before now ({self._now} ns)"
            )
        event_id = next(self._ordinal)
        heapq.heappush(self._heap, (fire_time, event_id, action))
        return event_id

    def schedule_after(self, delay: int, action) -> int:
        return self.schedule(self._now + delay, action)

    def run_until(self, t_end: int) -> int:
        """Fire every event with fire_time <= t_end, in order.

        Events fired may schedule further events inside the window; those fire
        in the same call. On return now() == t_end.
        """
        if t_end < self._now:
            raise SchedulingError(f"run_until({t_end}) is before now ({self._now})")
        fired = 0
        heap = self._heap
        while heap and heap[0][0] <= t_end:
            fire_time, _, action = heapq.heappop(heap)
            self._now = fire_time
            action()
            fired += 1
        self._now = t_end
        self.fired_total += fired
        return fired

    def pending(self) -> int:
        return len(self._heap)


def make_rng(seed: int) -> random.Random:
    """Seeded generator for a run (Mersenne Twister; stable per CPython docs).

    Identical seed + identical scenario gives a bit-identical event trace.
    """
    return random.Random(seed)
