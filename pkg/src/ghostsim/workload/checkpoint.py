"""Sharded checkpoint atomicity and the checkpoint/load feedback loop."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import ConfigError
from ..kernel import RngStream


def _check(q, K) -> None:
    if not 0 < q < 1:
        raise ConfigError(f"per-shard persistence probability must be in (0, 1), got {q}")
    if int(K) != K or K < 1:
        raise ConfigError(f"shard count must be an integer >= 1, got {K}")


def pr_non_atomic(q, K: int):
    """Probability that K independent shards neither all persist nor all fail.

    Exact for ``Fraction`` inputs; floats are evaluated with ``expm1``/``log1p``
    so the result stays accurate when ``q`` is close to 0 or 1.
    """
    _check(q, K)
    if K == 1:
        return Fraction(0) if isinstance(q, Fraction) else 0.0
    if isinstance(q, Fraction):
        return 1 - q**K - (1 - q) ** K
    q = float(q)
    return max(0.0, -math.expm1(K * math.log(q)) - math.exp(K * math.log1p(-q)))


@dataclass(frozen=True)
class Estimate:
    p: float
    stderr: float
    trials: int

    def agrees(self, exact: float, sigmas: float = 3.0) -> bool:
        return abs(self.p - exact) <= sigmas * self.stderr


def monte_carlo_non_atomic(q: float, K: int, trials: int, seed: int = 0,
                           stream: str = "checkpoint") -> Estimate:
    """Simulate ``trials`` checkpoints of K shards; count the mixed outcomes.

    The number of persisted shards per trial is Binomial(K, q), which is the
    same distribution as K Bernoulli draws. The standard error uses a floor
    of one pseudo-count so a zero-variance estimate is never reported as exact.
    """
    _check(q, K)
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if K == 1:
        return Estimate(0.0, 0.0, trials)
    rng = RngStream(seed, f"{stream}:{q}:{K}").generator
    ok = rng.binomial(K, q, size=trials)
    mixed = int(np.count_nonzero((ok > 0) & (ok < K)))
    p = mixed / trials
    var = max(p * (1 - p), 1.0 / trials)
    return Estimate(p, math.sqrt(var / trials), trials)


@dataclass(frozen=True)
class FeedbackParams:
    base_load: float = 1.0
    baseline_failure: float = 0.0
    sensitivity: float = 0.0
    cost: float = 0.0

    def __post_init__(self):
        for name in ("base_load", "baseline_failure", "sensitivity", "cost"):
            if getattr(self, name) < 0:
                raise ConfigError(f"feedback parameter {name} must be >= 0")

    def failure_rate(self, load: float) -> float:
        return self.baseline_failure + self.sensitivity * load

    @property
    def gain(self) -> float:
        """Loop gain d(L_{n+1})/d(L_n) = cost * f'(L)."""
        return self.cost * self.sensitivity

    def fixed_point(self) -> float | None:
        if self.gain >= 1:
            return None
        return (self.base_load + self.cost * self.baseline_failure) / (1 - self.gain)


@dataclass(frozen=True)
class FeedbackResult:
    loads: list[float]
    failure_rates: list[float]
    verdict: str
    diverged_at: int | None = None


def checkpoint_feedback_iterate(params: FeedbackParams, steps: int,
                                load_cap: float | None = None) -> FeedbackResult:
    """Iterate L_{n+1} = L_base + cost * f(L_n) starting from L_0 = L_base.

    The verdict is ``diverges`` when the loop gain is above 1 (growth is then
    geometric) or the load passes ``load_cap`` (default 10^6 times the base
    load); otherwise ``converges``.
    """
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    if load_cap is None:
        load_cap = 1e6 * max(params.base_load, 1.0)
    loads = [params.base_load]
    rates = [params.failure_rate(params.base_load)]
    diverged_at = None
    for n in range(steps):
        nxt = params.base_load + params.cost * rates[-1]
        loads.append(nxt)
        rates.append(params.failure_rate(nxt))
        if diverged_at is None and nxt > load_cap:
            diverged_at = n + 1
            break
    growing = params.gain > 1 and loads[-1] > loads[0]
    verdict = "diverges" if diverged_at is not None or growing else "converges"
    if verdict == "diverges" and diverged_at is None:
        diverged_at = len(loads) - 1
    return FeedbackResult(loads, rates, verdict, diverged_at)
