"""Phi Accrual: continuous suspicion from heartbeat inter-arrival statistics."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from statistics import NormalDist

from ..errors import ConfigError
from ..kernel import Simulator
from ..topology import TopologyPair
from ..units import MS
from .base import ALIVE, DEAD, Detector, HeartbeatSource, VerdictLog

EXPONENTIAL = "exponential"
NORMAL = "normal"
LN10 = math.log(10)


@dataclass
class HeartbeatHistory:
    window: int = 100
    intervals: deque = field(default_factory=deque)
    t_last: int | None = None

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError("history window must be >= 1")
        self.intervals = deque(self.intervals, maxlen=self.window)

    def record(self, t: int) -> None:
        if self.t_last is not None:
            gap = t - self.t_last
            if gap > 0:
                self.intervals.append(gap)
        self.t_last = t

    def __len__(self) -> int:
        return len(self.intervals)

    def mean(self) -> float:
        return sum(self.intervals) / len(self.intervals)

    def std(self) -> float:
        m = self.mean()
        return math.sqrt(sum((x - m) ** 2 for x in self.intervals) / len(self.intervals))


def phi(history: HeartbeatHistory, t_now: int, distribution: str = EXPONENTIAL,
        min_std: float | None = None) -> float:
    """Suspicion ``-log10(P(next heartbeat later than now))``.

    An empty history has no defined distribution; it returns 0 so the
    subject is treated as alive.
    """
    if not len(history) or history.t_last is None:
        return 0.0
    elapsed = max(t_now - history.t_last, 0)
    mean = history.mean()
    if distribution == EXPONENTIAL:
        return elapsed / (mean * LN10)
    if distribution == NORMAL:
        sigma = max(history.std(), min_std if min_std is not None else 0.1 * mean)
        p_later = 0.5 * math.erfc((elapsed - mean) / (sigma * math.sqrt(2)))
        if p_later <= 0.0:
            return math.inf
        return -math.log10(p_later)
    raise ConfigError(f"unknown phi distribution {distribution!r}")


def crossing_delay(history: HeartbeatHistory, threshold: float, distribution: str = EXPONENTIAL,
                   min_std: float | None = None) -> int:
    """Elapsed time after the last heartbeat at which phi reaches ``threshold``."""
    mean = history.mean()
    if distribution == EXPONENTIAL:
        return math.ceil(threshold * mean * LN10)
    sigma = max(history.std(), min_std if min_std is not None else 0.1 * mean)
    z = NormalDist().inv_cdf(1.0 - 10.0 ** (-threshold))
    return max(math.ceil(mean + sigma * z), 1)


class PhiAccrualDetector(Detector):
    """Declares dead when phi crosses ``threshold``; alive on the next heartbeat.

    Until ``min_samples`` inter-arrivals are known the subject is kept alive.
    The crossing instant is computed in closed form and scheduled directly,
    so there is no polling error.
    """

    kind = "phi-accrual"

    def __init__(self, sim: Simulator, topo: TopologyPair, observer: str, link: str,
                 threshold: float = 8.0, window: int = 100, min_samples: int | None = None,
                 interval: int = 100 * MS, jitter: int = 0, delay: int = 0,
                 distribution: str = EXPONENTIAL, min_std: float | None = None,
                 log: VerdictLog | None = None, name: str | None = None):
        if threshold <= 0:
            raise ConfigError("phi threshold must be > 0")
        if distribution not in (EXPONENTIAL, NORMAL):
            raise ConfigError(f"unknown phi distribution {distribution!r}")
        if distribution == NORMAL and threshold > 15:
            raise ConfigError("normal-fit phi threshold above 15 underflows double precision")
        super().__init__(sim, topo, observer, link, log, name)
        self.threshold = threshold
        self.distribution = distribution
        self.min_std = min_std
        self.interval = interval
        self.history = HeartbeatHistory(window)
        self.min_samples = window if min_samples is None else min_samples
        self._timer = None
        rng = sim.rng(f"{self.name}:{observer}:{link}:jitter") if jitter else None
        self.source = HeartbeatSource(sim, topo, link, interval, self._on_heartbeat, delay=delay,
                                      jitter=jitter, rng=rng, name=f"{self.name}:hb")

    def phi_now(self) -> float:
        return phi(self.history, self.sim.now, self.distribution, self.min_std)

    def crossing_delay(self) -> int:
        return crossing_delay(self.history, self.threshold, self.distribution, self.min_std)

    @property
    def min_silence_threshold(self) -> int:
        """Lower bound on a stale-up ghost: the crossing delay minus one heartbeat gap."""
        return self.crossing_delay() - self.interval

    def _on_heartbeat(self, t: int) -> None:
        self.history.record(t)
        self._verdict(ALIVE)
        self.sim.cancel(self._timer)
        self._timer = None
        if len(self.history) >= self.min_samples:
            at = t + self.crossing_delay()
            self._timer = self.sim.schedule(at, self._on_crossing, target=self.subject,
                                            kind=f"{self.name}:crossing")

    def _on_crossing(self) -> None:
        self._timer = None
        self._verdict(DEAD, self.phi_now())
