import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostsim.errors import ConfigError
from ghostsim.units import MS, S
from ghostsim.workload import (BACKOFF, ClientModel, FeedbackParams, ServiceModel, Shedding,
                               Trigger, checkpoint_feedback_iterate, conservation_residuals,
                               hysteresis_experiment, monte_carlo_non_atomic, pr_non_atomic,
                               retry_fixed_point, run_retry_storm)


# -- non-atomic checkpoint probability ---------------------------------------
def test_two_fair_shards():
    assert pr_non_atomic(Fraction(1, 2), 2) == Fraction(1, 2)
    assert pr_non_atomic(0.5, 2) == 0.5


def test_many_reliable_shards():
    # 1 - 0.999**4096 - 0.001**4096, evaluated independently in exact arithmetic
    exact = 1 - Fraction(999, 1000) ** 4096 - Fraction(1, 1000) ** 4096
    assert pr_non_atomic(0.999, 4096) == pytest.approx(float(exact), rel=1e-12)
    assert round(pr_non_atomic(0.999, 4096), 4) == 0.9834


@pytest.mark.parametrize("q", [0.01, 0.5, 0.999])
def test_single_shard_always_atomic(q):
    assert pr_non_atomic(q, 1) == 0
    assert monte_carlo_non_atomic(q, 1, 1000).p == 0


@pytest.mark.parametrize("q,K", [(0, 2), (1, 2), (1.5, 2), (0.5, 0), (0.5, 2.5)])
def test_out_of_range_inputs_rejected(q, K):
    with pytest.raises(ConfigError):
        pr_non_atomic(q, K)


@given(st.fractions(min_value=Fraction(1, 10**6), max_value=1 - Fraction(1, 10**6)),
       st.integers(1, 300))
def test_symmetry_under_complement_is_exact(q, K):
    assert pr_non_atomic(q, K) == pr_non_atomic(1 - q, K)


@given(st.floats(0.001, 0.999), st.integers(1, 2000))
def test_float_form_matches_exact_form(q, K):
    exact = pr_non_atomic(Fraction(q), K)
    assert pr_non_atomic(q, K) == pytest.approx(float(exact), rel=1e-9, abs=1e-12)


@given(st.fractions(min_value=Fraction(1, 100), max_value=Fraction(99, 100)), st.integers(1, 60))
def test_non_decreasing_in_shard_count(q, K):
    assert pr_non_atomic(q, K + 1) >= pr_non_atomic(q, K)


def test_large_shard_count_limit():
    assert pr_non_atomic(0.9, 200) > 1 - 1e-6


def test_monte_carlo_fair_two_shards():
    est = monte_carlo_non_atomic(0.5, 2, 10**6, seed=0)
    assert est.stderr == pytest.approx(0.0005, rel=1e-3)
    assert abs(est.p - 0.5) <= 0.0015


def test_monte_carlo_grows_with_shard_count():
    assert (monte_carlo_non_atomic(0.999, 64, 10**5).p
            < monte_carlo_non_atomic(0.999, 4096, 10**5).p)


def test_monte_carlo_reproducible_and_rejects_zero_trials():
    assert monte_carlo_non_atomic(0.3, 64, 1000, 5) == monte_carlo_non_atomic(0.3, 64, 1000, 5)
    with pytest.raises(ConfigError):
        monte_carlo_non_atomic(0.3, 64, 0)


# -- retry storms ------------------------------------------------------------
def storm(capacity=700, rate=300, timeout=1 * S, triggers=(), horizon=120 * S, **kw):
    shed = kw.pop("shedding", None)
    seed = kw.pop("seed", 7)
    return run_retry_storm(ServiceModel(capacity, kw.pop("queue_limit", 1000)),
                           ClientModel(rate, timeout, **kw), triggers, horizon, seed,
                           shedding=shed)


def test_no_overload_means_no_retries():
    res = storm(horizon=60 * S)
    s = res.series
    assert s["retries"].sum() == 0 and s["wasted"].sum() == 0 and s["dropped"].sum() == 0
    assert s["goodput"].sum() == pytest.approx(s["offered"].sum(), abs=1)
    assert abs(s["offered"].sum() / 60 - 300) < 10


@settings(max_examples=25, deadline=None)
@given(st.integers(50, 800), st.integers(50, 800), st.integers(1, 3),
       st.one_of(st.none(), st.integers(0, 5)), st.one_of(st.none(), st.integers(10, 2000)),
       st.integers(0, 2**16))
def test_queue_conserves_requests_every_step(capacity, rate, timeout_s, retries, limit, seed):
    res = run_retry_storm(ServiceModel(capacity, limit), ClientModel(rate, timeout_s * S, retries),
                          [Trigger(5 * S, 15 * S, capacity / 3)], 30 * S, seed,
                          shedding=Shedding(20 * S, 0.5))
    assert not conservation_residuals(res).any()
    assert (res.series["queue"] >= 0).all()
    if limit is not None:
        assert (res.series["queue"] <= limit).all()


def test_backoff_policy_delays_retries():
    trig = [Trigger(10 * S, 20 * S, 100)]
    fast = storm(triggers=trig, horizon=40 * S, max_retries=1)
    slow = storm(triggers=trig, horizon=40 * S, max_retries=1, policy=BACKOFF, backoff=2 * S)
    first = [int(np.nonzero(r.series["retries"])[0][0]) for r in (fast, slow)]
    assert first[1] - first[0] == 2 * S // fast.dt


def test_single_retry_steady_state_doubles_surviving_load():
    res = run_retry_storm(ServiceModel(300, 1000), ClientModel(280, 1 * S, 1),
                          [Trigger(60 * S, 600 * S, 250)], 600 * S, 7)
    fp = retry_fixed_point(res, 200 * S, 600 * S)
    assert fp["relative_error"] < 0.01
    assert fp["amplification"] == pytest.approx(2.0, abs=0.02)
    assert fp["effective"] == pytest.approx(560, rel=0.01)


def test_no_trigger_trivially_recovered():
    res = storm(horizon=60 * S)
    h = hysteresis_experiment(res, 300, 0)
    assert h.recovered and h.degraded_dwell == 0


def test_trigger_with_unbounded_retries_never_recovers():
    res = storm(triggers=[Trigger(60 * S, 120 * S, 280)], horizon=600 * S)
    h = hysteresis_experiment(res, 300, 120 * S)
    assert not h.recovered and h.post_trigger_max < 150
    assert h.degraded_dwell >= 480 * S


def test_shedding_retries_breaks_the_storm():
    res = storm(triggers=[Trigger(60 * S, 120 * S, 280)], horizon=600 * S,
                shedding=Shedding(200 * S, 0.5))
    h = hysteresis_experiment(res, 300, 200 * S)
    assert h.recovered and h.recovered_at < 600 * S


def test_aggressive_retries_amplify_over_tenfold():
    res = storm(timeout=500 * MS, max_retries=20, triggers=[Trigger(60 * S, 120 * S, 280)],
                horizon=300 * S)
    assert res.window_mean("effective", 80 * S, 120 * S) >= 10 * res.window_mean(
        "offered", 80 * S, 120 * S)


def test_storm_reproducible_per_seed():
    a = storm(triggers=[Trigger(10 * S, 20 * S, 100)], horizon=40 * S)
    b = storm(triggers=[Trigger(10 * S, 20 * S, 100)], horizon=40 * S)
    assert all((a.series[k] == b.series[k]).all() for k in a.series)


@pytest.mark.parametrize("bad", [
    lambda: ServiceModel(0),
    lambda: ClientModel(-1),
    lambda: Trigger(5 * S, 1 * S, 10),
    lambda: Shedding(0, 1.5),
    lambda: run_retry_storm(ServiceModel(10), ClientModel(1), dt=3 * MS),
])
def test_invalid_models_rejected(bad):
    with pytest.raises(ConfigError):
        bad()


# -- checkpoint feedback loop ------------------------------------------------
def test_zero_cost_load_stays_at_base():
    res = checkpoint_feedback_iterate(FeedbackParams(2.0, 0.3, 0.8, 0.0), 20)
    assert res.loads == [2.0] * 21 and res.verdict == "converges"


def test_half_gain_converges_geometrically():
    p = FeedbackParams(1.0, 0.1, 0.5, 1.0)
    res = checkpoint_feedback_iterate(p, 60)
    fixed = (1.0 + 0.1) / (1 - 0.5)
    assert p.fixed_point() == pytest.approx(fixed)
    assert res.verdict == "converges" and res.loads[-1] == pytest.approx(fixed, rel=1e-12)
    errs = [abs(x - fixed) for x in res.loads[:10]]
    assert all(b == pytest.approx(0.5 * a) for a, b in zip(errs, errs[1:]))


def test_gain_above_one_diverges_within_fifty_steps():
    p = FeedbackParams(1.0, 0.1, 1.5, 1.0)
    res = checkpoint_feedback_iterate(p, 50)
    assert p.fixed_point() is None
    assert res.verdict == "diverges" and res.diverged_at <= 50
    assert res.loads[-1] > 1.5 ** 30


def test_feedback_rejects_negative_parameters():
    with pytest.raises(ConfigError):
        FeedbackParams(sensitivity=-1.0)
    with pytest.raises(ConfigError):
        checkpoint_feedback_iterate(FeedbackParams(), 0)


def test_feedback_growth_matches_closed_form():
    p = FeedbackParams(1.0, 0.0, 1.2, 1.0)
    res = checkpoint_feedback_iterate(p, 10)
    # L_n = sum_{i<=n} 1.2**i for L_0 = 1
    assert res.loads == pytest.approx([sum(1.2 ** i for i in range(n + 1)) for n in range(11)])
    assert math.isfinite(res.loads[-1])
