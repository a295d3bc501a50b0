"""BFD-style session with flap suppression."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..errors import ConfigError
from ..kernel import Simulator
from ..topology import TopologyPair
from ..units import MS, S
from .base import ALIVE, DEAD, Detector, HeartbeatSource, VerdictLog


@dataclass
class BfdSession:
    """Pure session state; the simulation driver feeds it packet and timer events.

    A control packet is expected every effective interval. Each expected
    packet is granted one further interval of grace before it counts as
    missed, so ``detect_multiplier`` consecutive misses are recognised
    ``(detect_multiplier + 1)`` intervals after the last received packet.
    """

    tx_interval: int = 10 * MS
    detect_multiplier: int = 3
    suppressed_interval: int = 1 * S
    flap_limit: int = 3
    flap_window: int = 15 * S
    decay_after: int = 60 * S
    up: bool = True
    suppressed: bool = False
    interval: int = 0
    t_last_rx: int = 0
    last_flap: int | None = None
    flap_times: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.tx_interval <= 0 or self.detect_multiplier < 1:
            raise ConfigError("BFD needs tx_interval > 0 and detect_multiplier >= 1")
        if self.suppressed_interval <= self.tx_interval:
            raise ConfigError("suppressed_interval must exceed tx_interval")
        if not self.interval:
            self.interval = self.tx_interval

    def detection_deadline(self) -> int:
        return self.t_last_rx + (self.detect_multiplier + 1) * self.interval

    def decay(self, t: int) -> None:
        """Halve the raised interval for every ``decay_after`` without a flap."""
        if not self.suppressed or self.last_flap is None:
            return
        steps = (t - self.last_flap) // self.decay_after
        if steps <= 0:
            return
        interval = self.suppressed_interval >> min(steps, 62)
        if interval <= self.tx_interval:
            self.interval = self.tx_interval
            self.suppressed = False
        else:
            self.interval = interval

    def on_packet(self, t: int) -> bool:
        """Returns True when the session transitions to up."""
        self.t_last_rx = t
        self.decay(t)
        was_down = not self.up
        self.up = True
        return was_down

    def on_timer(self, t: int) -> bool:
        """Returns True when the session transitions to down (a flap)."""
        if not self.up or t < self.detection_deadline():
            return False
        self.up = False
        self.last_flap = t
        self.flap_times.append(t)
        while self.flap_times and self.flap_times[0] <= t - self.flap_window:
            self.flap_times.popleft()
        if len(self.flap_times) >= self.flap_limit and not self.suppressed:
            self.suppressed = True
            self.interval = self.suppressed_interval
        elif self.suppressed:
            self.interval = self.suppressed_interval
        return True


def bfd_step(session: BfdSession, event: str, t: int) -> str:
    """Advance a session by one ``"packet"`` or ``"timer"`` event; returns the status."""
    if event == "packet":
        session.on_packet(t)
    elif event == "timer":
        session.on_timer(t)
    else:
        raise ConfigError(f"unknown BFD event {event!r}")
    return ALIVE if session.up else DEAD


class BfdDetector(Detector):
    kind = "bfd"

    def __init__(self, sim: Simulator, topo: TopologyPair, observer: str, link: str,
                 tx_interval: int = 10 * MS, detect_multiplier: int = 3,
                 suppressed_interval: int = 1 * S, flap_limit: int = 3,
                 flap_window: int = 15 * S, decay_after: int = 60 * S, delay: int = 0,
                 log: VerdictLog | None = None, name: str | None = None):
        super().__init__(sim, topo, observer, link, log, name)
        self.session = BfdSession(tx_interval, detect_multiplier, suppressed_interval,
                                  flap_limit, flap_window, decay_after, t_last_rx=sim.now)
        self.suppression_times: list[int] = []
        self._timer = None
        self._arm()
        self.source = HeartbeatSource(sim, topo, link, lambda: self.session.interval,
                                      self._on_packet, delay=delay, name=f"{self.name}:ctl")

    @property
    def min_silence_threshold(self) -> int:
        return self.session.detect_multiplier * self.session.interval

    def _arm(self) -> None:
        self.sim.cancel(self._timer)
        self._timer = self.sim.schedule(self.session.detection_deadline(), self._on_timer,
                                        target=self.subject, kind=f"{self.name}:detect")

    def _on_packet(self, t: int) -> None:
        self.session.on_packet(t)
        self._arm()
        self._verdict(ALIVE)

    def _on_timer(self) -> None:
        self._timer = None
        was_suppressed = self.session.suppressed
        if self.session.on_timer(self.sim.now):
            if self.session.suppressed and not was_suppressed:
                self.suppression_times.append(self.sim.now)
            self._verdict(DEAD)
