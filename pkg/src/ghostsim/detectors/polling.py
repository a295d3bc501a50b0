from __future__ import annotations

from ..errors import ConfigError
from ..kernel import Simulator
from ..topology import TopologyPair
from ..units import S
from .base import ALIVE, DEGRADED, Detector, DetectorVerdict, VerdictLog


class StatusPollingDetector(Detector):
    """Reads the link's negotiated-speed register every ``period``.

    This is the only detector that sees silent degradation: it copies the
    actual bandwidth factor into the observer's belief. It makes no up/down
    judgement.
    """

    kind = "status-poll"

    def __init__(self, sim: Simulator, topo: TopologyPair, observer: str, link: str,
                 period: int = 1 * S, phase: int | None = None,
                 log: VerdictLog | None = None, name: str | None = None):
        if period <= 0:
            raise ConfigError("poll period must be > 0")
        super().__init__(sim, topo, observer, link, log, name)
        self.period = period
        self.polls = 0
        first = sim.now + (period if phase is None else phase)
        sim.schedule(first, self._poll, target=link, kind=f"{self.name}:poll")

    def _poll(self) -> None:
        self.polls += 1
        t = self.sim.now
        actual = self.topo.actual.attr(self.subject)
        believed = self.topo.observer(self.observer).believed.attr(self.subject)
        if actual.state == "up" and actual.bandwidth != believed.bandwidth:
            status = DEGRADED if actual.bandwidth < 1 else ALIVE
            self.status = status
            self.log.append(DetectorVerdict(self.name, self.observer, self.subject, status, t,
                                            bandwidth=actual.bandwidth))
            self.topo.set_belief(self.observer, self.subject, None, t, bandwidth=actual.bandwidth)
        self.sim.schedule(t + self.period, self._poll, target=self.subject, kind=f"{self.name}:poll")
