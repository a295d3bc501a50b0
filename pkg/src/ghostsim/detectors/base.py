"""Shared pieces for the timeout-based detectors: verdicts and heartbeat streams."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

from ..errors import ConfigError
from ..kernel import RngStream, Simulator
from ..topology import DOWN, UP, TopologyPair

ALIVE = "alive"
SUSPECT = "suspect"
DEAD = "dead"
DEGRADED = "degraded"


@dataclass(frozen=True)
class DetectorVerdict:
    detector: str
    observer: str
    subject: str
    status: str
    t: int
    suspicion: float = 0.0
    bandwidth: Fraction | None = None


class VerdictLog:
    def __init__(self) -> None:
        self.verdicts: list[DetectorVerdict] = []

    def append(self, v: DetectorVerdict) -> None:
        self.verdicts.append(v)

    def __len__(self) -> int:
        return len(self.verdicts)

    def __iter__(self):
        return iter(self.verdicts)

    def count(self, detector: str | None = None, status: str | None = None,
              subject: str | None = None, observer: str | None = None) -> int:
        return sum(1 for v in self.verdicts
                   if (detector is None or v.detector == detector)
                   and (status is None or v.status == status)
                   and (subject is None or v.subject == subject)
                   and (observer is None or v.observer == observer))

    def counts(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for v in self.verdicts:
            d = out.setdefault(v.detector, {})
            d[v.status] = d.get(v.status, 0) + 1
        return {k: dict(sorted(v.items())) for k, v in sorted(out.items())}


VERDICT_CSV_COLUMNS = ("t", "detector", "observer", "subject", "status", "suspicion", "bandwidth")


def write_verdict_csv(verdicts: Iterable[DetectorVerdict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(VERDICT_CSV_COLUMNS)
        for v in verdicts:
            w.writerow([v.t, v.detector, v.observer, v.subject, v.status, repr(float(v.suspicion)),
                        "" if v.bandwidth is None else str(v.bandwidth)])


class Detector:
    """A detector owned by one observer and watching one subject link.

    Only status changes are logged; ``dead`` maps to a believed-down link and
    ``alive`` to believed-up, while ``suspect`` leaves the belief untouched.
    """

    kind = "detector"

    def __init__(self, sim: Simulator, topo: TopologyPair, observer: str, subject: str,
                 log: VerdictLog | None = None, name: str | None = None):
        topo.observer(observer)
        topo.actual.attr(subject)
        self.sim = sim
        self.topo = topo
        self.observer = observer
        self.subject = subject
        self.log = log if log is not None else VerdictLog()
        self.name = name or self.kind
        self.status = ALIVE

    def _verdict(self, status: str, suspicion: float = 0.0) -> None:
        if status == self.status:
            return
        self.status = status
        t = self.sim.now
        self.log.append(DetectorVerdict(self.name, self.observer, self.subject, status, t, suspicion))
        if status == DEAD:
            self.topo.set_belief(self.observer, self.subject, DOWN, t)
        elif status == ALIVE:
            self.topo.set_belief(self.observer, self.subject, UP, t)


class HeartbeatSource:
    """Periodic messages from the far end of ``link`` to a receiver callback.

    A heartbeat sent at ``s`` is delivered iff the link is up on arrival and
    did not change state after ``s``. The period is re-read before every send
    so a negotiated interval change takes effect on the next packet.
    """

    def __init__(self, sim: Simulator, topo: TopologyPair, link: str,
                 interval: int | Callable[[], int], on_receive: Callable[[int], None],
                 delay: int = 0, jitter: int = 0, rng: RngStream | None = None,
                 phase: int | None = None, name: str = "hb"):
        self._interval = interval if callable(interval) else (lambda: interval)
        if self._interval() <= 0:
            raise ConfigError("heartbeat interval must be > 0")
        if delay < 0 or jitter < 0:
            raise ConfigError("heartbeat delay and jitter must be >= 0")
        if jitter and rng is None:
            raise ConfigError("jitter needs a random stream")
        self.sim = sim
        self.topo = topo
        self.link = link
        self.on_receive = on_receive
        self.delay = delay
        self.jitter = jitter
        self.rng = rng
        self.name = name
        self.sent = 0
        self.delivered = 0
        first = sim.now + (self._interval() if phase is None else phase)
        sim.schedule(first, self._send, target=link, kind=f"{name}:send")

    def _send(self) -> None:
        now = self.sim.now
        self.sent += 1
        flight = self.delay + (self.rng.integers(0, self.jitter + 1) if self.jitter else 0)
        if flight == 0:
            self._arrive(now)
        else:
            self.sim.schedule(now + flight, self._arrive, now, target=self.link, kind=f"{self.name}:arrive")
        self.sim.schedule(now + self._interval(), self._send, target=self.link, kind=f"{self.name}:send")

    def _arrive(self, sent_at: int) -> None:
        if self.topo.stable_since(self.link, sent_at):
            self.delivered += 1
            self.on_receive(self.sim.now)
