"""One test per acceptance criterion; each prints a PASS/FAIL line with its evidence."""

import itertools
import time
from fractions import Fraction

from ghostsim import cli
from ghostsim.detectors import BfdSession, FixedTimeoutDetector, bfd_step
from ghostsim.faults import FaultInjector, FlapModel, Fixed, schedule_flaps
from ghostsim.kernel import Simulator
from ghostsim.oae import CONFIRMED, REVERTED, rlfd_convergence
from ghostsim.runner import run_scenario
from ghostsim.scenarios import builtin, builtin_raw, list_scenarios
from ghostsim.table1 import DEFAULT_ROWS, reproduce_table1
from ghostsim.topology import SILENT_DEGRADE, STALE_UP
from ghostsim.units import MS, NS, S
from ghostsim.workload import monte_carlo_non_atomic, pr_non_atomic

from conftest import link_topology, token_once
from oracles import token_dag_run


def test_fixed_timeout_ghost_bound(criterion):
    start = time.perf_counter()
    poll = 1 * MS
    total, outside = 0, []
    for tau, retries, rtt in itertools.product((10 * MS, 50 * MS, 120 * MS), (0, 1, 3),
                                               (1 * MS, 2 * MS, 5 * MS)):
        hi = tau + retries * rtt + poll
        sim = Simulator(tau + retries + rtt)
        topo = link_topology(4)
        links = [f"L{i}" for i in range(4)]
        for lid in links:
            FixedTimeoutDetector(sim, topo, "obs", lid, timeout=tau, retries=retries, rtt=rtt,
                                 poll=poll)
        # outages outlast detection so every stale-up ghost is closed by a verdict
        horizon = 10 * (4 * hi)
        model = FlapModel(2 * hi, Fixed(2 * hi), None)
        FaultInjector(sim, topo).inject(schedule_flaps(links, model, horizon, sim.rng("faults")))
        sim.run_until(horizon)
        ghosts = [r for r in topo.records if r.kind == STALE_UP and r.t_end is not None]
        total += len(ghosts)
        outside += [(tau, retries, rtt, r.duration()) for r in ghosts
                    if not tau <= r.duration() <= hi]
    elapsed = time.perf_counter() - start
    ok = total >= 1000 and not outside and elapsed < 60
    criterion(1, ok, f"{total} failures over 27 (tau, R, rtt) settings, {len(outside)} outside "
                     f"[tau, tau+R*rtt+poll], {elapsed:.1f}s")


def test_fleet_flap_arithmetic(criterion):
    rows = {r.label: r for r in reproduce_table1(seed=0, min_flaps=10_000)}
    r23, r24, r25 = rows["2023"], rows["2024"], rows["2025"]
    ok = (r23.analytic_flap_s == 3 * 3600.0 and r23.sim_flaps >= 10_000
          and r23.sim_relative_error() < 0.05
          and abs(r25.analytic_flap_s - 48.0) < 1e-9
          and next(r for r in DEFAULT_ROWS if r.label == "2025").n_links == 2.25e7
          and not r23.flags and not r25.flags
          and any("hard" in f for f in r24.flags))
    criterion(2, ok, f"2023 flap gap {r23.analytic_flap_s:.0f}s analytic, "
                     f"{r23.sim_flap_mean_s:.0f}s over {r23.sim_flaps} flaps "
                     f"({100 * r23.sim_relative_error():.2f}% off); 2025 "
                     f"{r25.analytic_flap_s:g}s at n=2.25e7; 2024 flagged={bool(r24.flags)}")


def test_non_atomic_checkpoint_oracle(criterion):
    worst, misses = 0.0, []
    for q, k in itertools.product((0.3, 0.5, 0.9, 0.999), (1, 2, 64, 4096)):
        est = monte_carlo_non_atomic(q, k, 100_000, seed=0)
        exact = pr_non_atomic(q, k)
        z = abs(est.p - exact) / est.stderr if est.stderr else 0.0
        worst = max(worst, z)
        if not est.agrees(exact):
            misses.append((q, k))
    symmetric = all(pr_non_atomic(Fraction(str(q)), k) == pr_non_atomic(1 - Fraction(str(q)), k)
                    for q, k in itertools.product((0.3, 0.5, 0.9, 0.999), (1, 2, 64, 4096)))
    criterion(3, not misses and symmetric,
              f"16 grid points at 1e5 trials, worst |z|={worst:.2f}, misses={misses}, "
              f"exact symmetry={symmetric}")


def test_k8s_ghost_window(criterion):
    windows = []
    for seed in range(100):
        for duration in ("45s", "200s", "1000s"):
            raw = builtin_raw("k8s-partition")
            raw["seed"] = seed
            raw["horizon"] = "1500s"
            raw["faults"][0]["duration"] = duration
            report = run_scenario(cli.parse_config(raw)).report
            for ep in report["detectors"]["k8s#0"]["episodes"]:
                windows.append(ep["window"])
    lo, hi = min(windows), max(windows)
    ok = len(windows) == 300 and 40 * S <= lo and hi <= 340 * S
    criterion(4, ok, f"{len(windows)} partition episodes over 100 seeds, windows "
                     f"{lo / S:.1f}s..{hi / S:.1f}s")


def _flaps_suppress(times):
    s = BfdSession(suppressed_interval=2 * S)
    for t in times:
        s.t_last_rx = t - 40 * MS
        bfd_step(s, "timer", t)
        bfd_step(s, "packet", t + 1)
    return s.suppressed


def test_bfd_suppression(criterion):
    rule = (_flaps_suppress([1 * S, 8 * S, 15 * S + 999 * MS])
            and not _flaps_suppress([1 * S, 8 * S])
            and not _flaps_suppress([1 * S, 8 * S, 16 * S + 1])
            and _flaps_suppress([1 * S, 20 * S, 30 * S, 34 * S]))
    result = run_scenario(builtin("bfd-suppression"))
    ups = sorted((r for r in result.topo.records if r.kind == STALE_UP), key=lambda r: r.t_start)
    fast = max(r.duration() for r in ups if r.t_start < 9 * S)
    slow = next(r.duration() for r in ups if r.t_start >= 30 * S)
    ratio = slow / fast
    criterion(5, rule and ratio >= 100,
              f"3-in-15s rule holds={rule}; post-suppression ghost {slow / MS:.0f}ms vs fast "
              f"{fast / MS:.0f}ms = {ratio:.0f}x")


def test_token_conservation(criterion):
    exhaustive = 0
    bad = []
    for direction in ("both", "forward", "reverse"):
        for t1 in range(98, 198):
            for length in (1, 7, 48, None):
                ledger = token_once(direction, t1, None if length is None else t1 + length)
                exhaustive += 1
                (res,) = ledger.resolutions
                holders = [x for x, w in ledger.wallets.items() if 0 in w]
                want = res.dst if res.outcome == CONFIRMED else res.src
                if res.count != 1 or holders != [want] or ledger.escrow:
                    bad.append((direction, t1, length))
    resolutions = reverted = 0
    for seed in range(10_000):
        res, counts, escrow = token_dag_run(seed)
        resolutions += len(res)
        reverted += sum(r.outcome == REVERTED for r in res)
        if any(r.count != 1 for r in res) or set(counts.values()) != {1} or escrow:
            bad.append(seed)
    criterion(6, not bad, f"{exhaustive} single-failure offsets + 10^4 DAG schedules "
                          f"({resolutions} resolutions, {reverted} reverted); violations={bad[:5]}")


def test_rlfd_determinism(criterion):
    delta, s = 500 * NS, 51_200
    bound = 2 * (delta + s) + delta + s
    t0 = 10 * 2 * (delta + s)
    lat = {rlfd_convergence(delta, s, t0, seed=seed) - t0 for seed in range(100)}
    criterion(7, lat == {bound}, f"100 seeds -> latencies {sorted(lat)}, analytic B+d+s={bound}")


def test_ghost_ratio(criterion):
    result = run_scenario(builtin("ghost-compare"))
    dist = result.report["ghost_distribution"]
    oae = max(v["max"] for v in dist["oae"].values() if v["count"])
    tar = max(v["max"] for v in dist["tar"].values() if v["count"])
    delay = result.report["config"]["topology"]["oae"]["delay"]
    ratio = tar / oae
    criterion(8, ratio >= 100 and delay <= 1000 * NS,
              f"max TAR ghost {tar / MS:.2f}ms vs max OAE ghost {oae / NS:.1f}ns "
              f"= {ratio:.0f}x at delta={delay / NS:.0f}ns")


def test_metastable_hysteresis(criterion):
    basic = run_scenario(builtin("metastable-basic")).report["workload"]
    shed = run_scenario(builtin("metastable-shed")).report["workload"]
    storm = run_scenario(builtin("retry-1000pct")).report["workload"]
    stuck = basic["post_trigger_bins"] == 480 and basic["post_trigger_bins_below_half"] == 480
    recovered = shed["recovered"] and shed["recovered_at"] >= 200 * S
    amp = storm["overload"]["amplification"]
    criterion(9, stuck and recovered and amp >= 10,
              f"basic below half for {basic['post_trigger_bins_below_half']}/480 post-trigger "
              f"seconds; shed recovered at {shed['recovered_at'] and shed['recovered_at'] / S}s; "
              f"retry amplification {amp:.1f}x")


def test_silent_degrade_invisible(criterion):
    result = run_scenario(builtin("silent-degrade"))
    verdicts = result.report["verdicts"]
    updown = [n for n in result.report["detectors"] if not n.startswith("status-poll")]
    quiet = all(sum(verdicts.get(n, {}).values()) == 0 for n in updown)
    t_fault = 10_300 * MS
    ghosts = {r.observer: r for r in result.topo.records if r.kind == SILENT_DEGRADE}
    poll = ghosts["poll"]
    closed = poll.t_end is not None and poll.t_end - t_fault <= 1 * S
    others_open = all(ghosts[o].t_end is None for o in ("fixed", "phi", "bfd"))
    criterion(10, quiet and closed and others_open,
              f"up/down verdicts {[sum(verdicts.get(n, {}).values()) for n in updown]}; "
              f"status poll closed the ghost after {(poll.t_end - t_fault) / MS:.0f}ms; "
              f"other ghosts still open={others_open}")


def test_byte_identical_reruns(tmp_path, criterion):
    differing = []
    for name in list_scenarios():
        runs = []
        for rep in ("a", "b"):
            out = tmp_path / name / rep
            cli.execute(builtin_raw(name), out, keep_trace=True)
            runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        if runs[0] != runs[1]:
            differing.append(name)
    criterion(11, not differing, f"{len(list_scenarios())} scenarios run twice, "
                                 f"differing={differing}")
