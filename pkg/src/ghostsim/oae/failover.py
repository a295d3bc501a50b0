"""Exactly-once slice streams that fail over across a triangle.

A sender pipelines slices toward a receiver along the route its believed
graph gives. Slices that come back reverted are queued again with their
sequence numbers and re-sent along the recomputed route; the receiver
commits a slice only at confirmation and drops any sequence number it has
already committed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .fabric import OaeFabric
from .link import CONFIRMED, Hop, Slice, Transfer, path_transfer


@dataclass
class Delivery:
    seq: int
    t_launch: int
    t_arrive: int
    t_commit: int
    path: tuple[str, ...]

    @property
    def latency(self) -> int:
        return self.t_arrive - self.t_launch


@dataclass
class SliceStream:
    fabric: OaeFabric
    src: str
    dst: str
    spacing: int | None = None
    delivered: dict[int, Delivery] = field(default_factory=dict)
    duplicates: int = 0
    reverts: int = 0
    returned: list[Slice] = field(default_factory=list)
    escalated: bool = False
    transfers: list[Transfer] = field(default_factory=list)

    def __post_init__(self):
        self.sim = self.fabric.sim
        self._queue: deque[Slice] = deque()
        self._next_free = self.sim.now
        self._pumping = False
        self.outstanding = 0
        if self.spacing is None:
            first = self.fabric.links[next(iter(self.fabric.adj[self.src].values()))]
            self.spacing = first.slice_time

    def send(self, slices) -> None:
        self._queue.extend(slices)
        self._wake()

    def _wake(self) -> None:
        if self._pumping or not self._queue:
            return
        self._pumping = True
        self.sim.schedule(max(self.sim.now, self._next_free), self._pump,
                          target=self.src, kind="stream:send")

    def _pump(self) -> None:
        self._pumping = False
        if not self._queue:
            return
        path = self.fabric.route(self.src, self.dst)
        if path is None:
            self.escalated = True
            self.returned.extend(self._queue)
            self._queue.clear()
            return
        slc = self._queue.popleft()
        hops = [Hop(self.fabric.link_between(u, v), u, v) for u, v in zip(path, path[1:])]
        self.outstanding += 1
        xfer = path_transfer(self.sim, hops, slc, on_result=self._resolved)
        self.transfers.append(xfer)
        self._next_free = self.sim.now + self.spacing
        self._wake()

    def _resolved(self, xfer: Transfer) -> None:
        self.outstanding -= 1
        if xfer.outcome == CONFIRMED:
            if xfer.slice.seq in self.delivered:
                self.duplicates += 1
                return
            self.delivered[xfer.slice.seq] = Delivery(
                xfer.slice.seq, xfer.t_start, xfer.t_arrive, self.sim.now, tuple(xfer.path))
            return
        self.reverts += 1
        if len(xfer.path) == 2:
            self.fabric.report_revert(self.src, self.fabric.adj[self.src][xfer.path[1]])
            self._queue.append(xfer.slice)
            self._wake()
        else:
            # a second failure while already detoured: hand back and flag
            self.escalated = True
            self.returned.append(xfer.slice)

    @property
    def idle(self) -> bool:
        return not self._queue and self.outstanding == 0


def failover_latency_penalty(fabric: OaeFabric, a: str, b: str, c: str) -> int:
    """Extra one-way latency of the detour ``a->c->b`` over the direct link."""
    ab = fabric.link_between(a, b)
    ac = fabric.link_between(a, c)
    cb = fabric.link_between(c, b)
    return ac.delay + cb.delay - ab.delay
