"""Retry amplification in a FIFO queue with deterministic service.

Time advances in fixed steps of ``dt``. Requests are tracked as cohorts
(same enqueue step, same attempt number) so millions of requests cost only
a few list operations per step. A client waits ``timeout`` for its answer;
if none arrives it abandons the request and retries, but the abandoned copy
stays queued and still consumes service when it reaches the head. Once the
queue wait exceeds the timeout, every completion is wasted on an abandoned
request, which is what keeps the storm going after the trigger is gone.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..kernel import RngStream
from ..units import MS, S

IMMEDIATE = "immediate"
BACKOFF = "backoff"
RETRY_POLICIES = (IMMEDIATE, BACKOFF)


@dataclass(frozen=True)
class ServiceModel:
    capacity: float                 # requests per second
    queue_limit: int | None = None  # arrivals beyond this are dropped silently

    def __post_init__(self):
        if self.capacity <= 0:
            raise ConfigError("service capacity must be > 0")
        if self.queue_limit is not None and self.queue_limit < 1:
            raise ConfigError("queue_limit must be >= 1")


@dataclass(frozen=True)
class ClientModel:
    rate: float                     # offered requests per second
    timeout: int = 1 * S
    max_retries: int | None = None  # None means retry forever
    policy: str = IMMEDIATE
    backoff: int = 0
    rate_changes: tuple[tuple[int, float], ...] = ()  # (t, new rate)

    def __post_init__(self):
        if self.rate < 0 or any(r < 0 for _, r in self.rate_changes):
            raise ConfigError("offered rate must be >= 0")
        if self.timeout <= 0:
            raise ConfigError("request timeout must be > 0")
        if self.policy not in RETRY_POLICIES:
            raise ConfigError(f"retry policy must be one of {RETRY_POLICIES}, got {self.policy!r}")
        if self.max_retries is not None and self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.backoff < 0:
            raise ConfigError("backoff must be >= 0")

    def rate_at(self, t: int) -> float:
        rate = self.rate
        for start, r in self.rate_changes:
            if t >= start:
                rate = r
        return rate


@dataclass(frozen=True)
class Trigger:
    start: int
    end: int
    capacity: float

    def __post_init__(self):
        if self.end <= self.start:
            raise ConfigError("trigger must end after it starts")
        if self.capacity <= 0:
            raise ConfigError("trigger capacity must be > 0")


@dataclass(frozen=True)
class Shedding:
    start: int
    fraction: float = 0.5

    def __post_init__(self):
        if not 0 <= self.fraction <= 1:
            raise ConfigError("shed fraction must be in [0, 1]")


SERIES = ("offered", "retries", "effective", "goodput", "wasted", "dropped", "shed",
          "gave_up", "first_attempts", "first_timeouts", "queue")


@dataclass
class StormResult:
    dt: int
    series: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.series["queue"])

    def per_second(self, name: str) -> np.ndarray:
        """Counts per 1 s bin (rates in requests/s); queue depth is averaged."""
        per_bin = S // self.dt
        x = self.series[name]
        n = len(x) // per_bin
        binned = x[: n * per_bin].reshape(n, per_bin)
        return binned.mean(axis=1) if name == "queue" else binned.sum(axis=1)

    def window_mean(self, name: str, t0: int, t1: int) -> float:
        """Mean rate (per second) of ``name`` over [t0, t1)."""
        i0, i1 = t0 // self.dt, t1 // self.dt
        x = self.series[name][i0:i1]
        if name == "queue":
            return float(x.mean())
        return float(x.sum()) / ((i1 - i0) * self.dt / S)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("t",) + SERIES)
            for i in range(self.steps):
                w.writerow([i * self.dt] + [int(self.series[k][i]) for k in SERIES])


class _Cohort:
    __slots__ = ("step", "attempt", "remaining")

    def __init__(self, step: int, attempt: int, count: int):
        self.step = step
        self.attempt = attempt
        self.remaining = count


def run_retry_storm(service: ServiceModel, clients: ClientModel, triggers=(),
                    horizon: int = 600 * S, seed: int = 0, dt: int = 10 * MS,
                    shedding: Shedding | None = None) -> StormResult:
    """Simulate the queue; returns per-step series in request counts.

    Per step the order is: client timeouts, fresh arrivals and due retries,
    shedding, admission against the queue limit, then FIFO service.
    """
    if dt <= 0 or horizon <= 0:
        raise ConfigError("dt and horizon must be > 0")
    if S % dt:
        raise ConfigError("dt must divide one second")
    n_steps = horizon // dt
    t_steps = -(-clients.timeout // dt)
    b_steps = clients.backoff // dt if clients.policy == BACKOFF else 0
    dt_s = dt / S
    track_attempts = clients.max_retries is not None
    rng_arrive = RngStream(seed, "workload:arrivals").generator
    rng_shed = RngStream(seed, "workload:shed").generator
    rng_admit = RngStream(seed, "workload:admission").generator

    out = {k: np.zeros(n_steps, dtype=np.int64) for k in SERIES}
    queue: deque[_Cohort] = deque()
    qlen = 0
    tokens = 0.0
    timeouts: dict[int, list[_Cohort]] = defaultdict(list)
    lost: dict[int, dict[int, int]] = defaultdict(lambda: defaultdict(int))  # dropped, by attempt
    due: dict[int, dict[int, int]] = defaultdict(lambda: defaultdict(int))   # retries, by attempt

    def retry_later(step: int, attempt: int, n: int) -> int:
        """Schedule ``n`` retries of requests on ``attempt``; returns give-ups."""
        if n == 0:
            return 0
        if track_attempts and attempt >= clients.max_retries:
            return n
        due[step + b_steps][attempt + 1 if track_attempts else 1] += n
        return 0

    for i in range(n_steps):
        t = i * dt
        gave_up = 0
        first_to = 0
        for c in timeouts.pop(i, ()):
            if c.attempt == 0:
                first_to += c.remaining
            gave_up += retry_later(i, c.attempt, c.remaining)
        for attempt, n in lost.pop(i, {}).items():
            if attempt == 0:
                first_to += n
            gave_up += retry_later(i, attempt, n)

        fresh = int(rng_arrive.poisson(clients.rate_at(t) * dt_s))
        retries_by = due.pop(i, {})
        retries = sum(retries_by.values())
        shed = 0
        if shedding is not None and t >= shedding.start and retries:
            kept = {}
            for attempt, n in retries_by.items():
                k = int(rng_shed.binomial(n, 1 - shedding.fraction))
                shed += n - k
                if k:
                    kept[attempt] = k
            retries_by = kept
        groups = ([(0, fresh)] if fresh else []) + sorted(retries_by.items())
        arriving = fresh + retries - shed

        dropped = 0
        if service.queue_limit is not None and qlen + arriving > service.queue_limit:
            room = max(0, service.queue_limit - qlen)
            counts = np.array([n for _, n in groups], dtype=np.int64)
            admitted = rng_admit.multivariate_hypergeometric(counts, room) if room else \
                np.zeros_like(counts)
            new_groups = []
            for (attempt, n), a in zip(groups, admitted):
                if n - a:
                    lost[i + t_steps][attempt] += int(n - a)
                if a:
                    new_groups.append((attempt, int(a)))
            dropped = arriving - room
            groups = new_groups
        for attempt, n in groups:
            c = _Cohort(i, attempt, n)
            queue.append(c)
            timeouts[i + t_steps].append(c)
            qlen += n

        cap = service.capacity
        for trig in triggers:
            if trig.start <= t < trig.end:
                cap = trig.capacity
        tokens += cap * dt_s
        good = wasted = 0
        while queue and tokens >= 1:
            c = queue[0]
            n = min(c.remaining, int(tokens))
            tokens -= n
            c.remaining -= n
            qlen -= n
            if i - c.step < t_steps:
                good += n
            else:
                wasted += n
            if c.remaining == 0:
                queue.popleft()
        if not queue:
            tokens = min(tokens, 1.0)

        out["offered"][i] = fresh
        out["retries"][i] = retries
        out["effective"][i] = fresh + retries
        out["goodput"][i] = good
        out["wasted"][i] = wasted
        out["dropped"][i] = dropped
        out["shed"][i] = shed
        out["gave_up"][i] = gave_up
        out["first_attempts"][i] = fresh
        out["first_timeouts"][i] = first_to
        out["queue"][i] = qlen
    return StormResult(dt, out)


def conservation_residuals(res: StormResult) -> np.ndarray:
    """arrivals + retries - (completions + drops + sheds + queue delta), per step."""
    s = res.series
    dq = np.diff(np.concatenate([[0], s["queue"]]))
    return (s["offered"] + s["retries"]
            - (s["goodput"] + s["wasted"] + s["dropped"] + s["shed"] + dq))


@dataclass(frozen=True)
class HysteresisResult:
    recovered: bool
    degraded_dwell: int        # ticks with goodput below half of nominal
    recovered_at: int | None
    post_trigger_max: float    # highest 1 s goodput after the trigger ends


def hysteresis_experiment(result: StormResult, nominal: float, trigger_end: int,
                          recover_fraction: float = 0.9, window: int = 10 * S) -> HysteresisResult:
    """Did goodput get back to ``recover_fraction`` of nominal after the trigger?

    Recovery requires a ``window``-long moving average at or above the
    target, starting at or after ``trigger_end``. Dwell counts every 1 s bin
    below half of nominal over the whole run.
    """
    g = result.per_second("goodput")
    dwell = int(np.count_nonzero(g < 0.5 * nominal)) * S
    start = trigger_end // S
    w = max(1, window // S)
    recovered_at = None
    if len(g) - start >= w:
        moving = np.convolve(g[start:], np.ones(w) / w, mode="valid")
        hits = np.nonzero(moving >= recover_fraction * nominal)[0]
        if len(hits):
            recovered_at = (start + int(hits[0])) * S
    post = float(g[start:].max()) if start < len(g) else 0.0
    return HysteresisResult(recovered_at is not None, dwell, recovered_at, post)


def retry_fixed_point(result: StormResult, t0: int, t1: int) -> dict[str, float]:
    """Check effective load against offered * (1 + P_timeout) over [t0, t1).

    P_timeout is the measured share of first attempts that timed out; with
    one retry allowed each such timeout adds exactly one request.
    """
    offered = result.window_mean("offered", t0, t1)
    effective = result.window_mean("effective", t0, t1)
    first = result.window_mean("first_attempts", t0, t1)
    p_timeout = result.window_mean("first_timeouts", t0, t1) / first if first else 0.0
    predicted = offered * (1 + p_timeout)
    return {"offered": offered, "effective": effective, "p_timeout": p_timeout,
            "predicted": predicted,
            "relative_error": abs(effective - predicted) / predicted if predicted else 0.0,
            "amplification": effective / offered if offered else math.inf}
