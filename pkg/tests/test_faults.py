from fractions import Fraction

import numpy as np
import pytest

from conftest import link_topology
from ghostsim.errors import ConfigError, FaultError
from ghostsim.faults import (DEGRADE_EVENT, DOWN_EVENT, HARD_EVENT, UP_EVENT, FaultEvent,
                             FaultInjector, Fixed, FlapModel, LogUniform, SilentDegradeModel,
                             fleet_inter_arrival_mean, read_fault_csv, sample_fleet_flap_times,
                             schedule_flaps, write_fault_csv)
from ghostsim.kernel import RngStream, Simulator
from ghostsim.topology import SILENT_DEGRADE, STALE_UP
from ghostsim.units import H, MS, S


def test_fleet_mean_2023_row_is_three_hours():
    assert fleet_inter_arrival_mean(1e5, 3e5 * H) == 3 * H


def test_fleet_mean_single_link_is_per_link_value():
    assert fleet_inter_arrival_mean(1, 7 * H) == 7 * H


def test_fleet_mean_2025_link_count_gives_48_seconds():
    assert fleet_inter_arrival_mean(2.25e7, 3e5 * H) == pytest.approx(48 * S)


def test_fleet_mean_needs_a_link():
    with pytest.raises(ConfigError):
        fleet_inter_arrival_mean(0, 1)


def test_empty_horizon_gives_empty_schedule():
    assert schedule_flaps(["L0"], FlapModel(), 0, RngStream(0, "f")) == []


def test_flap_count_matches_poisson_mean():
    # 1e5 links at 3e5 h for 30 h: Poisson mean 10 per run
    links = [f"L{i}" for i in range(100_000)]
    model = FlapModel(300_000 * H, Fixed(1 * MS), None)
    counts = [sum(e.kind == DOWN_EVENT for e in schedule_flaps(links, model, 30 * H, RngStream(s, "f")))
              for s in range(5)]
    assert abs(np.mean(counts) - 10) < 3 * np.sqrt(10 / 5)


def test_hard_failures_about_one_per_96_hours():
    links = [f"L{i}" for i in range(100_000)]
    model = FlapModel(10**9 * H, Fixed(1 * MS), 10_000_000 * H)
    total = sum(sum(e.kind == HARD_EVENT for e in schedule_flaps(links, model, 96 * H, RngStream(s, "h")))
                for s in range(10))
    assert abs(total - 9.6) < 3 * np.sqrt(9.6)


def test_each_flap_is_down_then_up_with_sampled_duration():
    events = schedule_flaps(["L0"], FlapModel(1 * S, Fixed(30 * MS), None), 100 * S, RngStream(1, "f"))
    downs = [e.t for e in events if e.kind == DOWN_EVENT]
    ups = [e.t for e in events if e.kind == UP_EVENT]
    assert len(downs) > 50
    assert all(u - d == 30 * MS for d, u in zip(downs, ups))


def test_hard_failure_ends_the_flap_process():
    events = schedule_flaps(["L0"], FlapModel(1 * S, Fixed(1 * MS), 20 * S), 10_000 * S,
                            RngStream(2, "f"))
    hard = [e for e in events if e.kind == HARD_EVENT]
    assert len(hard) == 1
    assert max(e.t for e in events) == hard[0].t


def test_loguniform_downtime_stays_in_range():
    d = LogUniform(1 * MS, 10 * S)
    xs = d.sample_many(RngStream(0, "d"), 10_000)
    assert xs.min() >= 1 * MS and xs.max() <= 10 * S
    # log-uniform: the median sits at the geometric mean
    assert np.median(xs) == pytest.approx((1e9 * 1e13) ** 0.5, rel=0.1)


def test_superposition_empirical_mean_within_five_percent():
    times = sample_fleet_flap_times(10_000, 3e5 * 3600.0, 3e5 * 3600.0 * 1.5, RngStream(0, "fleet"))
    gaps = np.diff(times)
    assert gaps.size >= 10_000
    assert abs(gaps.mean() / (3e5 * 3600.0 / 10_000) - 1) < 0.05


def test_invalid_models_are_rejected():
    with pytest.raises(ConfigError):
        FlapModel(0)
    with pytest.raises(ConfigError):
        SilentDegradeModel(0.5, Fraction(1))
    with pytest.raises(ConfigError):
        FaultEvent(0, "L0", "explode")


def test_fault_csv_round_trip(tmp_path):
    events = [FaultEvent(5, "L0", DOWN_EVENT), FaultEvent(9, "L0", DEGRADE_EVENT, Fraction(5, 64))]
    write_fault_csv(events, tmp_path / "f.csv")
    assert read_fault_csv(tmp_path / "f.csv") == events


def test_silent_degrade_opens_ghost_without_any_announcement():
    sim = Simulator(0)
    topo = link_topology()
    inj = FaultInjector(sim, topo)
    heard = []
    inj.listeners.append(lambda *a: heard.append(a))
    inj.inject([FaultEvent(10, "L0", DEGRADE_EVENT, Fraction(10, 128))])
    sim.run_until(20)
    assert topo.is_up("L0")
    assert [(r.kind, r.t_start) for r in topo.records] == [(SILENT_DEGRADE, 10)]
    assert heard == []


def test_degrade_by_factor_one_is_a_no_op():
    sim = Simulator(0)
    topo = link_topology()
    FaultInjector(sim, topo).inject_silent_degrade("L0", 1, 0)
    assert topo.records == []


def test_degrade_on_down_link_is_rejected():
    sim = Simulator(0)
    topo = link_topology()
    inj = FaultInjector(sim, topo)
    topo.set_actual("L0", "down", 0)
    with pytest.raises(FaultError):
        inj.inject_silent_degrade("L0", Fraction(1, 2), 1)
    inj.inject([FaultEvent(5, "L0", DEGRADE_EVENT, Fraction(1, 2))])
    sim.run_until(10)
    assert len(inj.rejected) == 1


def test_recovery_after_hard_failure_is_rejected():
    sim = Simulator(0)
    topo = link_topology()
    inj = FaultInjector(sim, topo)
    inj.inject([FaultEvent(1, "L0", HARD_EVENT), FaultEvent(5, "L0", UP_EVENT)])
    sim.run_until(10)
    assert not topo.is_up("L0") and len(inj.rejected) == 1
    assert topo.records[0].kind == STALE_UP and topo.records[0].t_end is None


def test_recovery_retrains_at_full_rate():
    sim = Simulator(0)
    topo = link_topology()
    FaultInjector(sim, topo).inject([FaultEvent(1, "L0", DEGRADE_EVENT, Fraction(1, 2)),
                                     FaultEvent(2, "L0", DOWN_EVENT), FaultEvent(3, "L0", UP_EVENT)])
    sim.run_until(5)
    assert topo.actual.attr("L0").bandwidth == 1


def test_degrade_attaches_to_recoveries_with_probability():
    events = schedule_flaps(["L0"], FlapModel(1 * S, Fixed(1 * MS), None), 2000 * S,
                            RngStream(0, "f"), SilentDegradeModel(0.25, Fraction(5, 64)))
    ups = sum(e.kind == UP_EVENT for e in events)
    degrades = sum(e.kind == DEGRADE_EVENT for e in events)
    assert abs(degrades / ups - 0.25) < 0.05
