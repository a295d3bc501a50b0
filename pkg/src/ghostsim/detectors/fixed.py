from __future__ import annotations

from ..errors import ConfigError
from ..kernel import Simulator
from ..topology import TopologyPair
from ..units import MS
from .base import ALIVE, DEAD, SUSPECT, Detector, HeartbeatSource, VerdictLog


class FixedTimeoutDetector(Detector):
    """Timeout-and-retry on a heartbeat stream with period ``poll``.

    Silence is counted from the first missed heartbeat deadline
    (``t_last + poll``). Once it reaches ``timeout`` the detector suspects the
    link and sends ``retries`` probes, each waiting one ``rtt``; if none comes
    back the link is declared dead. Any received message restores alive.
    A stale-up ghost therefore lasts between ``timeout + retries*rtt`` and
    that plus one ``poll``.
    """

    kind = "fixed-timeout"

    def __init__(self, sim: Simulator, topo: TopologyPair, observer: str, link: str,
                 timeout: int = 50 * MS, retries: int = 0, rtt: int = 1 * MS,
                 poll: int = 1 * MS, delay: int = 0, jitter: int = 0,
                 log: VerdictLog | None = None, name: str | None = None):
        if timeout <= 0:
            raise ConfigError(f"timeout must be > 0, got {timeout}")
        if retries < 0:
            raise ConfigError(f"retries must be >= 0, got {retries}")
        if rtt <= 0 or poll <= 0:
            raise ConfigError("rtt and poll must be > 0")
        super().__init__(sim, topo, observer, link, log, name)
        self.timeout = timeout
        self.retries = retries
        self.rtt = rtt
        self.poll = poll
        self.t_last = sim.now
        self._timer = None
        self._probe = None
        self._arm()
        rng = sim.rng(f"{self.name}:{observer}:{link}:jitter") if jitter else None
        self.source = HeartbeatSource(sim, topo, link, poll, self._on_message, delay=delay,
                                      jitter=jitter, rng=rng, name=f"{self.name}:hb")

    @property
    def min_silence_threshold(self) -> int:
        return self.timeout

    @property
    def max_detection_delay(self) -> int:
        return self.timeout + self.retries * self.rtt + self.poll

    def _arm(self) -> None:
        self.sim.cancel(self._timer)
        self._timer = self.sim.schedule(self.t_last + self.poll + self.timeout, self._on_silence,
                                        target=self.subject, kind=f"{self.name}:silence")

    def _on_message(self, t: int) -> None:
        self.t_last = t
        self.sim.cancel(self._probe)
        self._probe = None
        self._arm()
        self._verdict(ALIVE)

    def _on_silence(self) -> None:
        self._timer = None
        if self.retries == 0:
            self._verdict(DEAD)
            return
        self._verdict(SUSPECT)
        self._send_probe(0)

    def _send_probe(self, attempt: int) -> None:
        sent = self.sim.now
        self._probe = self.sim.schedule(sent + self.rtt, self._probe_result, attempt, sent,
                                        target=self.subject, kind=f"{self.name}:retry")

    def _probe_result(self, attempt: int, sent: int) -> None:
        self._probe = None
        if self.topo.stable_since(self.subject, sent):
            self._on_message(self.sim.now)
        elif attempt + 1 < self.retries:
            self._send_probe(attempt + 1)
        else:
            self._verdict(DEAD)
