"""Fleet fault models: flaps, hard failures and silent speed degradation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, FaultError
from .kernel import RngStream, Simulator
from .topology import DOWN, FULL_RATE, UP, TopologyPair
from .units import H, MS, S

DEGRADE_GEN5_TO_GEN1 = Fraction(5, 64)  # 2.5 GT/s over 32 GT/s, i.e. 1/12.8

DOWN_EVENT = "down"
UP_EVENT = "up"
HARD_EVENT = "hard-down"
DEGRADE_EVENT = "degrade"
FAULT_KINDS = (DOWN_EVENT, UP_EVENT, HARD_EVENT, DEGRADE_EVENT)


@dataclass(frozen=True)
class LogUniform:
    low: int = 1 * MS
    high: int = 10 * S

    def __post_init__(self):
        if not (0 < self.low <= self.high):
            raise ConfigError(f"log-uniform bounds must satisfy 0 < low <= high, got {self}")

    def sample(self, rng: RngStream) -> int:
        if self.low == self.high:
            return self.low
        return int(round(math.exp(rng.uniform(math.log(self.low), math.log(self.high)))))

    def sample_many(self, rng: RngStream, n: int) -> np.ndarray:
        u = rng.generator.uniform(math.log(self.low), math.log(self.high), size=n)
        return np.rint(np.exp(u))


@dataclass(frozen=True)
class Fixed:
    value: int

    def __post_init__(self):
        if self.value <= 0:
            raise ConfigError(f"fixed down duration must be > 0, got {self.value}")

    def sample(self, rng: RngStream) -> int:
        return self.value

    def sample_many(self, rng: RngStream, n: int) -> np.ndarray:
        return np.full(n, float(self.value))


@dataclass(frozen=True)
class FlapModel:
    flap_mttf: int = 300_000 * H
    down_duration: LogUniform | Fixed = field(default_factory=LogUniform)
    hard_mtbf: int | None = 10_000_000 * H

    def __post_init__(self):
        if self.flap_mttf <= 0:
            raise ConfigError("flap_mttf must be > 0")
        if self.hard_mtbf is not None and self.hard_mtbf <= 0:
            raise ConfigError("hard_mtbf must be > 0")


@dataclass(frozen=True)
class SilentDegradeModel:
    probability: float = 0.0
    factor: Fraction = DEGRADE_GEN5_TO_GEN1

    def __post_init__(self):
        if not 0 <= self.probability <= 1:
            raise ConfigError("degrade probability must be in [0, 1]")
        if not 0 < Fraction(self.factor) < 1:
            raise ConfigError("degrade factor must be in (0, 1)")


@dataclass(frozen=True, order=True)
class FaultEvent:
    t: int
    link: str
    kind: str
    param: Fraction | None = None

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise ConfigError(f"unknown fault kind {self.kind!r}")


def fleet_inter_arrival_mean(n_links: float, per_link_mttf: float) -> float:
    """Mean gap between faults anywhere in a fleet of independent links."""
    if n_links < 1:
        raise ConfigError(f"n_links must be >= 1, got {n_links}")
    return per_link_mttf / n_links


def schedule_flaps(
    links: Sequence[str],
    model: FlapModel,
    horizon: int,
    rng: RngStream,
    degrade: SilentDegradeModel | None = None,
) -> list[FaultEvent]:
    """Independent per-link renewal process of flaps, plus permanent hard failures.

    Each flap is a down transition, a sampled down time, then an up
    transition; the next flap is drawn from the recovery instant. A hard
    failure takes the link down for good and ends its flap process.
    """
    events: list[FaultEvent] = []
    if horizon <= 0:
        return events
    for link in links:
        hard_at = None
        if model.hard_mtbf is not None:
            hard_at = rng.exponential(model.hard_mtbf)
            if hard_at >= horizon:
                hard_at = None
        end = horizon if hard_at is None else hard_at
        t = rng.exponential(model.flap_mttf)
        while t < end:
            down = max(model.down_duration.sample(rng), 1)
            events.append(FaultEvent(t, link, DOWN_EVENT))
            t_up = t + down
            if t_up >= end:
                break
            events.append(FaultEvent(t_up, link, UP_EVENT))
            if degrade is not None and degrade.probability > 0 and rng.random() < degrade.probability:
                events.append(FaultEvent(t_up, link, DEGRADE_EVENT, Fraction(degrade.factor)))
            t = t_up + rng.exponential(model.flap_mttf)
        if hard_at is not None:
            events.append(FaultEvent(hard_at, link, HARD_EVENT))
    events.sort(key=lambda e: (e.t, e.link, FAULT_KINDS.index(e.kind)))
    return events


def sample_fleet_flap_times(n_links: int, flap_mttf: float, horizon: float, rng: RngStream,
                            down: LogUniform | Fixed | None = None,
                            chunk: int = 1_000_000) -> np.ndarray:
    """Superposed flap (down-transition) times for a large fleet, sorted.

    Same per-link renewal process as :func:`schedule_flaps` without hard
    failures, vectorised and chunked so that tens of millions of links fit
    in memory.
    """
    gen = rng.generator
    out = []
    remaining = int(n_links)
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        t = gen.exponential(flap_mttf, size=m)
        alive = t < horizon
        t = t[alive]
        while t.size:
            out.append(t)
            dd = down.sample_many(rng, t.size) if down is not None else 0.0
            t = t + dd + gen.exponential(flap_mttf, size=t.size)
            t = t[t < horizon]
    if not out:
        return np.empty(0)
    return np.sort(np.concatenate(out))


# -- CSV replay ------------------------------------------------------------
FAULT_CSV_COLUMNS = ("link", "kind", "t", "param")


def write_fault_csv(events: Iterable[FaultEvent], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FAULT_CSV_COLUMNS)
        for e in events:
            w.writerow([e.link, e.kind, e.t, "" if e.param is None else str(e.param)])


def read_fault_csv(path) -> list[FaultEvent]:
    with open(path, newline="") as fh:
        return [FaultEvent(int(r["t"]), r["link"], r["kind"],
                           Fraction(r["param"]) if r["param"] else None)
                for r in csv.DictReader(fh)]


class FaultInjector:
    """Applies fault events to G_A at their scheduled times.

    ``listeners`` receive ``(link, kind, t)`` for up/down transitions only:
    silent degradation is deliberately not announced to anyone.
    """

    def __init__(self, sim: Simulator, topo: TopologyPair):
        self.sim = sim
        self.topo = topo
        self.listeners: list[Callable[[str, str, int], None]] = []
        self.applied: list[FaultEvent] = []
        self.rejected: list[FaultEvent] = []
        self.hard_failed: set[str] = set()

    def inject(self, events: Iterable[FaultEvent]) -> None:
        for e in events:
            self.topo.actual.attr(e.link)
            self.sim.schedule(e.t, self._apply, e, target=e.link, kind=f"fault:{e.kind}")

    def _apply(self, e: FaultEvent) -> None:
        t = self.sim.now
        if e.link in self.hard_failed:
            self.rejected.append(e)
            return
        if e.kind == DEGRADE_EVENT:
            try:
                self.inject_silent_degrade(e.link, e.param, t)
            except FaultError:
                self.rejected.append(e)
            return
        if e.kind in (DOWN_EVENT, HARD_EVENT):
            self.topo.set_actual(e.link, DOWN, t)
            if e.kind == HARD_EVENT:
                self.hard_failed.add(e.link)
        else:
            # recovery retrains at full rate unless a degrade event follows
            self.topo.set_actual(e.link, UP, t, bandwidth=FULL_RATE)
        self.applied.append(e)
        for fn in self.listeners:
            fn(e.link, e.kind, t)

    def inject_silent_degrade(self, link: str, factor, t: int) -> None:
        factor = Fraction(factor)
        if not self.topo.is_up(link):
            raise FaultError(f"cannot degrade {link}: link is down")
        if factor == 1:
            return
        if not 0 < factor < 1:
            raise FaultError(f"degrade factor must be in (0, 1), got {factor}")
        self.topo.set_actual(link, None, t, bandwidth=factor)
        self.applied.append(FaultEvent(t, link, DEGRADE_EVENT, factor))
