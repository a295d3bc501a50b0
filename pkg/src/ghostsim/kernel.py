"""Deterministic discrete-event kernel: virtual clock, ordered queue, seeded streams."""

from __future__ import annotations

import hashlib
import heapq
import logging
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import CausalityError, ConfigError

logger = logging.getLogger(__name__)


@dataclass(order=True)
class Event:
    fire_at: int
    seq: int
    target: str = field(compare=False, default="")
    kind: str = field(compare=False, default="")
    callback: Callable[..., Any] | None = field(compare=False, default=None, repr=False)
    args: tuple = field(compare=False, default=(), repr=False)
    cancelled: bool = field(compare=False, default=False)


@dataclass(frozen=True)
class RunSummary:
    events_processed: int
    final_clock: int
    trace_hash: str


class RngStream:
    """Named random stream whose draws depend only on (master_seed, stream_id)."""

    def __init__(self, master_seed: int, stream_id: str):
        if master_seed < 0:
            raise ConfigError(f"seed must be non-negative, got {master_seed}")
        self.stream_id = stream_id
        self.master_seed = master_seed
        words = np.frombuffer(hashlib.sha256(stream_id.encode()).digest(), dtype=np.uint32)
        seq = np.random.SeedSequence([master_seed, *words.tolist()])
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def exponential(self, mean: float) -> int:
        return draw_exponential(self, mean)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return float(self.generator.uniform(low, high))

    def random(self) -> float:
        return float(self.generator.random())

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in [low, high)."""
        return int(self.generator.integers(low, high))

    def choice(self, items, size: int | None = None, replace: bool = True):
        items = list(items)
        if size is None:
            return items[int(self.generator.integers(0, len(items)))]
        idx = self.generator.choice(len(items), size=size, replace=replace)
        return [items[i] for i in idx]

    def shuffled(self, items) -> list:
        items = list(items)
        order = self.generator.permutation(len(items))
        return [items[i] for i in order]


def draw_exponential(stream: RngStream, mean: float) -> int:
    """Exponential duration (integer ticks) with the given mean."""
    if not mean > 0:
        raise ConfigError(f"exponential mean must be > 0, got {mean}")
    return int(round(stream.generator.exponential(float(mean))))


class Simulator:
    """Single-threaded event loop ordered by ``(fire_at, seq)``.

    Every processed event is folded into a running SHA-256 over
    ``fire_at, seq, target, kind`` so two runs can be compared by hash.
    """

    def __init__(self, seed: int = 0, keep_trace: bool = False):
        self.seed = seed
        self.now = 0
        self._queue: list[Event] = []
        self._seq = 0
        self._streams: dict[str, RngStream] = {}
        self._hash = hashlib.sha256()
        self.events_processed = 0
        self.keep_trace = keep_trace
        self.trace: list[tuple[int, int, str, str]] = []
        self._last_fired = 0

    def rng(self, stream_id: str) -> RngStream:
        stream = self._streams.get(stream_id)
        if stream is None:
            stream = self._streams[stream_id] = RngStream(self.seed, stream_id)
        return stream

    def schedule(
        self,
        at: int,
        callback: Callable[..., Any] | None = None,
        *args: Any,
        target: str = "",
        kind: str = "",
    ) -> Event:
        if at < self.now:
            raise CausalityError(
                f"event {kind or callback!r} for {target!r} scheduled at {at} < now {self.now}"
            )
        event = Event(int(at), self._seq, target, kind, callback, args)
        self._seq += 1
        heapq.heappush(self._queue, event)
        return event

    def after(self, delay: int, callback=None, *args: Any, target: str = "", kind: str = "") -> Event:
        return self.schedule(self.now + delay, callback, *args, target=target, kind=kind)

    @staticmethod
    def cancel(event: Event | None) -> None:
        if event is not None:
            event.cancelled = True

    def pending(self) -> int:
        return sum(1 for e in self._queue if not e.cancelled)

    def run_until(self, t_end: int) -> RunSummary:
        queue = self._queue
        while queue and queue[0].fire_at <= t_end:
            event = heapq.heappop(queue)
            if event.cancelled:
                continue
            self.now = event.fire_at
            self._hash.update(f"{event.fire_at},{event.seq},{event.target},{event.kind}\n".encode())
            if self.keep_trace:
                self.trace.append((event.fire_at, event.seq, event.target, event.kind))
            self.events_processed += 1
            if event.callback is not None:
                try:
                    event.callback(*event.args)
                except CausalityError as exc:
                    raise CausalityError(
                        f"{exc} (while handling {event.kind!r} for {event.target!r} "
                        f"at t={event.fire_at}, event #{self.events_processed})"
                    ) from exc
        if t_end > self.now:
            self.now = t_end
        return self.summary()

    def summary(self) -> RunSummary:
        return RunSummary(self.events_processed, self.now, self._hash.hexdigest())
