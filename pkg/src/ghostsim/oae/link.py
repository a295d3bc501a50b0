"""Bounded-delay OAE links, 64-byte slices, and PIF (echoed) transfers.

Every slice is echoed back along the reverse direction, so a sender always
learns the outcome exactly one round trip ``2*(delay + slice_time)`` after
launch. A missing echo means a failed direction, because link delay is a
fixed physical constant rather than a guess.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..errors import ConfigError, TopologyError
from ..kernel import Simulator
from ..units import NS

SLICE_WORDS = 8
SLICE_BYTES = 64
_SLICE_STRUCT = struct.Struct("<8Q")

CONFIRMED = "delivered-confirmed"
REVERTED = "reverted"


@dataclass(frozen=True)
class Slice:
    seq: int
    payload: tuple[int, ...] = (0,) * SLICE_WORDS
    direction: str = ""

    def __post_init__(self):
        if len(self.payload) != SLICE_WORDS:
            raise ConfigError(f"a slice carries exactly {SLICE_WORDS} words")
        for w in self.payload:
            if not 0 <= w < 2**64:
                raise ConfigError("slice words are unsigned 64-bit")

    def to_bytes(self) -> bytes:
        return _SLICE_STRUCT.pack(*self.payload)

    @classmethod
    def from_bytes(cls, seq: int, data: bytes, direction: str = "") -> Slice:
        if len(data) != SLICE_BYTES:
            raise ConfigError(f"slice frames are {SLICE_BYTES} bytes, got {len(data)}")
        return cls(seq, _SLICE_STRUCT.unpack(data), direction)


def slice_time_for(rate_bits_per_s: float) -> int:
    """Serialization time of one 64-byte slice, in ticks."""
    return round(SLICE_BYTES * 8 / rate_bits_per_s * 1e12)


@dataclass
class OaeLink:
    link_id: str
    a: str
    b: str
    delay: int = 500 * NS
    slice_time: int = 51_200  # 64 B at 10 Gb/s
    # (src, dst) -> list of [start, end or None) failure intervals
    failures: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.delay <= 0 or self.slice_time <= 0:
            raise ConfigError(f"link {self.link_id}: delay and slice_time must be > 0")
        if self.a == self.b:
            raise ConfigError(f"link {self.link_id} is a self-loop")
        self.failures = {(self.a, self.b): [], (self.b, self.a): []}

    @property
    def one_way(self) -> int:
        return self.delay + self.slice_time

    @property
    def round_trip(self) -> int:
        return 2 * (self.delay + self.slice_time)

    def other(self, node: str) -> str:
        if node == self.a:
            return self.b
        if node == self.b:
            return self.a
        raise TopologyError(f"{node} is not an endpoint of {self.link_id}")

    def _intervals(self, src: str, dst: str) -> list:
        try:
            return self.failures[(src, dst)]
        except KeyError:
            raise TopologyError(f"{self.link_id} has no direction {src}->{dst}") from None

    def fail(self, src: str, dst: str, t: int) -> bool:
        iv = self._intervals(src, dst)
        if iv and iv[-1][1] is None:
            return False
        iv.append([t, None])
        return True

    def repair(self, src: str, dst: str, t: int) -> bool:
        iv = self._intervals(src, dst)
        if not iv or iv[-1][1] is not None:
            return False
        if t <= iv[-1][0]:
            iv[-1][1] = iv[-1][0] + 1
        else:
            iv[-1][1] = t
        return True

    def direction_up(self, src: str, dst: str) -> bool:
        iv = self._intervals(src, dst)
        return not iv or iv[-1][1] is not None

    def is_up(self) -> bool:
        return self.direction_up(self.a, self.b) and self.direction_up(self.b, self.a)

    def clear(self, src: str, dst: str, t1: int, t2: int) -> bool:
        """No failure of ``src->dst`` overlaps the half-open window [t1, t2)."""
        for start, end in reversed(self._intervals(src, dst)):
            if end is not None and end <= t1:
                break
            if start < t2 and (end is None or end > t1):
                return False
        return True

    def failure_pending_after(self, t: int) -> bool:
        for iv in self.failures.values():
            if iv and (iv[-1][1] is None or iv[-1][1] > t):
                return True
        return False


@dataclass
class Hop:
    link: OaeLink
    src: str
    dst: str


def path_hops(links: Sequence[OaeLink], nodes: Sequence[str]) -> list[Hop]:
    hops = []
    for link, src, dst in zip(links, nodes, nodes[1:]):
        link.other(src)
        if link.other(src) != dst:
            raise TopologyError(f"{link.link_id} does not join {src} and {dst}")
        hops.append(Hop(link, src, dst))
    return hops


def path_legs(hops: Sequence[Hop], t0: int) -> tuple[list, int, int]:
    """Occupancy windows of a cut-through path transfer and its echo.

    Returns ``(legs, t_arrive, t_resolve)`` where every leg is
    ``(link, src, dst, start, end)`` and arrival completes once the last bit
    crosses the final hop.
    """
    s = hops[0].link.slice_time
    legs = []
    t = t0
    for h in hops:
        legs.append((h.link, h.src, h.dst, t, t + h.link.delay + s))
        t += h.link.delay
    t_arrive = t + s
    t = t_arrive
    for h in reversed(hops):
        legs.append((h.link, h.dst, h.src, t, t + h.link.delay + s))
        t += h.link.delay
    return legs, t_arrive, t + s


@dataclass
class Transfer:
    slice: Slice
    path: list[str]
    t_start: int
    t_arrive: int
    t_resolve: int
    outcome: str | None = None
    delivered: bool = False
    t_resolved: int | None = None

    @property
    def src(self) -> str:
        return self.path[0]

    @property
    def dst(self) -> str:
        return self.path[-1]


def path_transfer(sim: Simulator, hops: Sequence[Hop], slc: Slice,
                  on_result: Callable[[Transfer], None] | None = None,
                  on_arrive: Callable[[Transfer], None] | None = None,
                  known_down: bool = False) -> Transfer:
    """Launch ``slc`` along ``hops`` and resolve it one path round trip later.

    ``on_arrive`` fires when the slice reaches the receiver (tentative);
    ``on_result`` fires at resolution with ``transfer.outcome`` set. A
    launch on a direction the sender already knows to be failed reverts
    immediately.
    """
    t0 = sim.now
    legs, t_arrive, t_resolve = path_legs(hops, t0)
    xfer = Transfer(slc, [hops[0].src] + [h.dst for h in hops], t0, t_arrive, t_resolve)
    if known_down:
        xfer.outcome = REVERTED
        xfer.t_resolved = t0
        if on_result is not None:
            sim.schedule(t0, on_result, xfer, target=xfer.src, kind="pif:reverted-now")
        return xfer
    n = len(hops)

    def arrive():
        xfer.delivered = all(l.clear(a, b, s0, s1) for l, a, b, s0, s1 in legs[:n])
        if xfer.delivered and on_arrive is not None:
            on_arrive(xfer)

    def resolve():
        ok = xfer.delivered and all(l.clear(a, b, s0, s1) for l, a, b, s0, s1 in legs[n:])
        xfer.outcome = CONFIRMED if ok else REVERTED
        xfer.t_resolved = sim.now
        if on_result is not None:
            on_result(xfer)

    sim.schedule(t_arrive, arrive, target=xfer.dst, kind="pif:arrive")
    sim.schedule(t_resolve, resolve, target=xfer.src, kind="pif:resolve")
    return xfer


def pif_transfer(sim: Simulator, link: OaeLink, src: str, slc: Slice,
                 on_result=None, on_arrive=None, known_down: bool = False) -> Transfer:
    """Single-link PIF transfer from ``src`` to the other endpoint."""
    return path_transfer(sim, [Hop(link, src, link.other(src))], slc, on_result, on_arrive,
                         known_down)
