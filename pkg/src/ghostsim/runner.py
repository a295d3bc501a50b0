"""Build and execute a simulation from a validated ScenarioConfig."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config import ScenarioConfig, topology_links
from .detectors import (BfdDetector, FixedTimeoutDetector, K8sNodeLifecycle, PhiAccrualDetector,
                        StatusPollingDetector, SwimGroup, VerdictLog, node_link, pods_link,
                        status_link)
from .errors import ConfigError
from .faults import (DEGRADE_EVENT, DOWN_EVENT, HARD_EVENT, UP_EVENT, FaultEvent, FaultInjector,
                     Fixed, FlapModel, LogUniform, SilentDegradeModel, read_fault_csv,
                     schedule_flaps)
from .kernel import Simulator
from .oae import OaeFabric, OaeLink, Slice, SliceStream, TokenLedger
from .table1 import FleetRow, reproduce_table1, table1_rows
from .topology import STALE_UP, Graph, GhostRecord, TopologyPair, ghost_stats
from .workload import (ClientModel, FeedbackParams, ServiceModel, Shedding, Trigger,
                       checkpoint_feedback_iterate, hysteresis_experiment, monte_carlo_non_atomic,
                       pr_non_atomic, retry_fixed_point, run_retry_storm)

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    config: ScenarioConfig
    report: dict
    topo: TopologyPair | None = None
    verdicts: VerdictLog = field(default_factory=VerdictLog)
    faults: list[FaultEvent] = field(default_factory=list)
    fabric: OaeFabric | None = None
    trace: list | None = None
    tables: dict[str, tuple[tuple[str, ...], list[list]]] = field(default_factory=dict)


def observer_group(name: str) -> str:
    """Observers named ``group:member`` are aggregated under ``group``."""
    return name.split(":", 1)[0]


def distribution(values) -> dict:
    if not values:
        return {"count": 0}
    arr = np.sort(np.asarray(values, dtype=np.int64))
    return {"count": int(arr.size), "min": int(arr[0]), "max": int(arr[-1]),
            "p50": int(arr[(arr.size - 1) // 2]), "p90": int(arr[int(0.9 * (arr.size - 1))]),
            "mean": float(arr.mean())}


def ghost_distributions(records, horizon: int) -> dict:
    """Closed and open ghost durations per observer group and kind."""
    groups: dict[str, dict[str, list[int]]] = {}
    for r in records:
        groups.setdefault(observer_group(r.observer), {}).setdefault(r.kind, []).append(
            r.duration(horizon))
    return {g: {k: distribution(v) for k, v in sorted(kinds.items())}
            for g, kinds in sorted(groups.items())}


def _jsonable_stats(stats: dict) -> dict:
    return {obs: {k: (dict(v) if isinstance(v, dict) else int(v)) for k, v in s.items()}
            for obs, s in sorted(stats.items())}


# -- construction ------------------------------------------------------------
def _build_graph(topology: dict) -> Graph:
    g = Graph()
    if topology["type"] == "links":
        for n in topology["nodes"]:
            g.add_node(n)
    for lid, a, b in topology_links(topology):
        for n in (a, b):
            if n not in g.nodes:
                g.add_node(n)
        g.add_link(lid, a, b)
    return g


def _observer_scopes(cfg: ScenarioConfig, links: list[tuple[str, str, str]]) -> dict[str, set]:
    scopes: dict[str, set] = {}
    for d in cfg.detectors:
        kind = d["type"]
        if kind == "swim":
            members = d["members"] or [a for _, a, _ in links]
            for m in members:
                scopes.setdefault(m, set()).update(node_link(x) for x in members if x != m)
        elif kind == "k8s":
            scopes.setdefault(d["observer"], set()).update(
                (status_link(d["node"]), pods_link(d["node"])))
        else:
            scopes.setdefault(d["observer"], set()).add(d["link"])
    return scopes


def _compile_faults(cfg: ScenarioConfig, sim: Simulator, link_ids: list[str]):
    events: list[FaultEvent] = []
    directional: list[dict] = []
    for f in cfg.faults:
        kind = f["type"]
        if kind == "flaps":
            d = f["down"]
            down = Fixed(d["value"]) if d["dist"] == "fixed" else LogUniform(d["low"], d["high"])
            model = FlapModel(f["flap_mttf"], down, f["hard_mtbf"])
            degrade = None
            if f["degrade_probability"] > 0:
                degrade = SilentDegradeModel(f["degrade_probability"], Fraction(f["degrade_factor"]))
            events += schedule_flaps(f["links"] or link_ids, model, cfg.horizon,
                                     sim.rng(f["stream"]), degrade)
        elif kind == "events":
            for e in f["events"]:
                param = None if e["param"] is None else Fraction(e["param"])
                events.append(FaultEvent(e["t"], e["link"], e["kind"], param))
        elif kind == "csv":
            events += read_fault_csv(f["path"])
        elif kind == "partition":
            start = f["t"]
            if f["jitter"]:
                start += sim.rng(f["stream"]).integers(0, f["jitter"] + 1)
            events.append(FaultEvent(start, f["link"], DOWN_EVENT))
            events.append(FaultEvent(start + f["duration"], f["link"], UP_EVENT))
        elif kind == "degrade":
            events.append(FaultEvent(f["t"], f["link"], DEGRADE_EVENT, Fraction(f["factor"])))
        elif kind == "oae-direction":
            directional.append(f)
    events.sort(key=lambda e: (e.t, e.link))
    return events, directional


def _build_detectors(cfg: ScenarioConfig, sim, topo, verdicts, links) -> list:
    dets = []
    for i, d in enumerate(cfg.detectors):
        kind = d["type"]
        name = f"{kind}#{i}"
        if kind == "fixed-timeout":
            dets.append(FixedTimeoutDetector(sim, topo, d["observer"], d["link"], d["timeout"],
                                             d["retries"], d["rtt"], d["poll"], d["delay"],
                                             d["jitter"], verdicts, name))
        elif kind == "phi-accrual":
            dets.append(PhiAccrualDetector(sim, topo, d["observer"], d["link"], d["threshold"],
                                           d["window"], d["min_samples"], d["interval"],
                                           d["jitter"], d["delay"], d["distribution"],
                                           log=verdicts, name=name))
        elif kind == "bfd":
            dets.append(BfdDetector(sim, topo, d["observer"], d["link"], d["tx_interval"],
                                    d["detect_multiplier"], d["suppressed_interval"],
                                    d["flap_limit"], d["flap_window"], d["decay_after"],
                                    d["delay"], verdicts, name))
        elif kind == "k8s":
            dets.append(K8sNodeLifecycle(sim, topo, d["node"], d["grace"], d["eviction"],
                                         d["heartbeat"], d["observer"], verdicts, name,
                                         d["phase"]))
        elif kind == "status-poll":
            dets.append(StatusPollingDetector(sim, topo, d["observer"], d["link"], d["period"],
                                              d["phase"], verdicts, name))
        elif kind == "swim":
            members = d["members"] or [a for _, a, _ in links]
            dets.append(SwimGroup(sim, topo, members, d["period"], d["probe_timeout"],
                                  d["k_indirect"], d["suspicion_timeout"], d["delay"],
                                  log=verdicts, name=name))
    return dets


def _detector_extras(dets, records: list[GhostRecord], horizon: int) -> dict:
    out = {}
    for det in dets:
        info: dict = {"type": det.kind}
        if isinstance(det, FixedTimeoutDetector):
            lo, hi = det.timeout, det.timeout + det.retries * det.rtt + det.poll
            durs = [r.duration(horizon) for r in records
                    if r.observer == det.observer and r.link == det.subject
                    and r.kind == STALE_UP and r.t_end is not None]
            info.update(bound_low=lo, bound_high=hi, stale_up_count=len(durs),
                        stale_up_in_bounds=sum(lo <= x <= hi for x in durs))
        elif isinstance(det, BfdDetector):
            info.update(suppression_times=list(det.suppression_times),
                        suppressed=det.session.suppressed)
        elif isinstance(det, K8sNodeLifecycle):
            info["episodes"] = [
                {"t_last_heartbeat": e.t_last_heartbeat, "t_unreachable": e.t_unreachable,
                 "t_evicted": e.t_evicted, "t_reconnected": e.t_reconnected,
                 "window": e.window(horizon)} for e in det.episodes]
        elif isinstance(det, SwimGroup):
            info["messages"] = det.messages
        out[det.name] = info
    return out


# -- workloads ---------------------------------------------------------------
def _run_storm(w: dict, cfg: ScenarioConfig, result: RunResult) -> dict:
    service = ServiceModel(w["capacity"], w["queue_limit"])
    clients = ClientModel(w["rate"], w["timeout"], w["max_retries"], w["policy"], w["backoff"])
    triggers = [Trigger(t["start"], t["end"], t["capacity"]) for t in w["triggers"]]
    shed = None if w["shedding"] is None else Shedding(w["shedding"]["start"],
                                                       w["shedding"]["fraction"])
    res = run_retry_storm(service, clients, triggers, cfg.horizon, cfg.seed, w["dt"], shed)
    names = ("offered", "retries", "effective", "goodput", "wasted", "dropped", "shed",
             "gave_up", "first_attempts", "first_timeouts")
    bins = {n: res.per_second(n) for n in names}
    queue = res.per_second("queue")
    cols = ("second",) + names + ("queue_mean",)
    rows = [[i] + [int(bins[n][i]) for n in names] + [float(queue[i])]
            for i in range(len(queue))]
    result.tables["workload"] = (cols, rows)
    trigger_end = max((t.end for t in triggers), default=0)
    recovery_from = max(trigger_end, shed.start if shed else 0)
    hyst = hysteresis_experiment(res, w["rate"], recovery_from)
    g = bins["goodput"]
    post = g[trigger_end // 10**12:]
    summary = {
        "nominal": w["rate"],
        "recovered": hyst.recovered,
        "recovered_at": hyst.recovered_at,
        "degraded_dwell": hyst.degraded_dwell,
        "post_trigger_max_goodput": int(post.max()) if post.size else None,
        "post_trigger_bins_below_half": int(np.count_nonzero(post < 0.5 * w["rate"])),
        "post_trigger_bins": int(post.size),
        "peak_effective": int(bins["effective"].max()),
        "total_goodput": int(g.sum()),
    }
    win = w["overload"]
    if win is not None:
        offered = res.window_mean("offered", win["start"], win["end"])
        effective = res.window_mean("effective", win["start"], win["end"])
        summary["overload"] = {"offered": offered, "effective": effective,
                               "amplification": effective / offered if offered else None}
    if w["fixed_point"] is not None:
        summary["fixed_point"] = retry_fixed_point(res, w["fixed_point"]["start"],
                                                   w["fixed_point"]["end"])
    return summary


def _run_atomicity_sweep(w: dict, cfg: ScenarioConfig, result: RunResult) -> dict:
    rows = []
    for q in w["q"]:
        for k in w["K"]:
            est = monte_carlo_non_atomic(q, k, w["trials"], cfg.seed)
            exact = pr_non_atomic(q, k)
            rows.append([q, k, float(exact), est.p, est.stderr, est.agrees(exact)])
    cols = ("q", "K", "exact", "estimate", "stderr", "agrees")
    result.tables["atomicity"] = (cols, rows)
    return {"points": len(rows), "all_agree": all(r[-1] for r in rows)}


def _run_feedback(w: dict, cfg: ScenarioConfig, result: RunResult) -> dict:
    p = FeedbackParams(w["base_load"], w["baseline_failure"], w["sensitivity"], w["cost"])
    res = checkpoint_feedback_iterate(p, w["steps"])
    result.tables["feedback"] = (("step", "load", "failure_rate"),
                                 [[i, l, f] for i, (l, f) in enumerate(zip(res.loads,
                                                                           res.failure_rates))])
    return {"verdict": res.verdict, "diverged_at": res.diverged_at, "gain": p.gain,
            "fixed_point": p.fixed_point(), "final_load": res.loads[-1]}


def _run_table1(w: dict, cfg: ScenarioConfig, result: RunResult) -> dict:
    rows = None
    if w["rows"] is not None:
        rows = [FleetRow(**r) for r in w["rows"]]
    results = reproduce_table1(rows, cfg.seed, w["min_flaps"]) if rows else \
        reproduce_table1(seed=cfg.seed, min_flaps=w["min_flaps"])
    table = table1_rows(results)
    cols = tuple(table[0]) if table else ()
    result.tables["table1"] = (cols, [[r[c] for c in cols] for r in table])
    return {"rows": table}


def _start_tokens(w: dict, sim: Simulator, fabric: OaeFabric) -> TokenLedger:
    ledger = TokenLedger(fabric)
    rng = sim.rng("workload:tokens")
    nodes = sorted(fabric.adj)
    hops_left = {}

    def step(tid: int) -> None:
        tok = ledger.tokens[tid]
        if hops_left[tid] <= 0:
            return
        hops_left[tid] -= 1
        dst = rng.choice(sorted(fabric.adj[tok.holder]))
        ledger.transfer(tid, dst, on_done=lambda res: sim.schedule(
            sim.now + w["gap"], step, res.token_id, target="tokens", kind="token:next"))

    for j in range(w["tokens"]):
        ledger.mint(j, nodes[j % len(nodes)])
        hops_left[j] = w["hops"]
        sim.schedule(sim.now, step, j, target="tokens", kind="token:start")
    return ledger


def _token_summary(ledger: TokenLedger, result: RunResult) -> dict:
    res = ledger.resolutions
    result.tables["tokens"] = (("t", "token", "src", "dst", "outcome", "count"),
                               [[r.t, r.token_id, r.src, r.dst, r.outcome, r.count] for r in res])
    counts = [ledger.count(t) for t in ledger.tokens]
    return {"resolutions": len(res), "confirmed": sum(r.outcome == "delivered-confirmed" for r in res),
            "reverted": sum(r.outcome == "reverted" for r in res),
            "count_always_one": all(r.count == 1 for r in res) and all(c == 1 for c in counts),
            "in_flight_at_end": len(ledger.escrow)}


def _stream_summary(stream: SliceStream, result: RunResult) -> dict:
    rows = [[d.seq, d.t_launch, d.t_arrive, d.t_commit, "-".join(d.path)]
            for d in sorted(stream.delivered.values(), key=lambda d: d.seq)]
    result.tables["slices"] = (("seq", "t_launch", "t_arrive", "t_commit", "path"), rows)
    return {"delivered": len(stream.delivered), "duplicates": stream.duplicates,
            "reverts": stream.reverts, "escalated": stream.escalated,
            "returned": len(stream.returned),
            "latency": distribution([d.latency for d in stream.delivered.values()])}


# -- entry point -------------------------------------------------------------
def run_scenario(cfg: ScenarioConfig, keep_trace: bool = False) -> RunResult:
    sim = Simulator(cfg.seed, keep_trace=keep_trace)
    links = topology_links(cfg.topology)
    link_ids = [lid for lid, _, _ in links]
    result = RunResult(cfg, {})
    report: dict = {"scenario": cfg.name, "seed": cfg.seed, "horizon": cfg.horizon,
                    "config": cfg.to_dict()}
    topo = None
    fabric = None
    dets: list = []
    ledger = stream = None
    if links:
        topo = TopologyPair(_build_graph(cfg.topology))
        for o in cfg.topology["observers"]:
            topo.add_observer(o["name"], o["scope"])
        oae = cfg.topology["oae"]
        if oae is not None:
            ol = [OaeLink(lid, a, b, oae["delays"].get(lid, oae["delay"]), oae["slice_time"])
                  for lid, a, b in links]
            fabric = OaeFabric(sim, ol, topo, phase=oae["phase"])
        for obs, scope in sorted(_observer_scopes(cfg, links).items()):
            if obs not in topo.observers:
                topo.add_observer(obs, scope)
        events, directional = _compile_faults(cfg, sim, link_ids)
        injector = FaultInjector(sim, topo)
        injector.inject(events)
        result.faults = events
        for f in directional:
            sim.schedule(f["t"], fabric.fail, f["link"], f["direction"],
                         target=f["link"], kind="fault:oae-direction")
            if f["repair"] is not None:
                sim.schedule(f["t"] + f["repair"], fabric.repair, f["link"], f["direction"],
                             target=f["link"], kind="fault:oae-repair")
        dets = _build_detectors(cfg, sim, topo, result.verdicts, links)
        w = cfg.workload
        if w is not None and w["type"] == "tokens":
            ledger = _start_tokens(w, sim, fabric)
        elif w is not None and w["type"] == "slice-stream":
            stream = SliceStream(fabric, w["src"], w["dst"])
            sim.schedule(w["start"], stream.send, [Slice(i) for i in range(w["count"])],
                         target=w["src"], kind="stream:start")
    elif cfg.faults or cfg.detectors:
        raise ConfigError("topology.type: faults and detectors need a topology")

    summary = sim.run_until(cfg.horizon)
    report["kernel"] = {"events_processed": summary.events_processed,
                        "final_clock": summary.final_clock, "trace_hash": summary.trace_hash}
    if topo is not None:
        stats = ghost_stats(topo.records, cfg.horizon, topo.observers)
        report["ghosts"] = _jsonable_stats(stats)
        report["ghost_distribution"] = ghost_distributions(topo.records, cfg.horizon)
        report["verdicts"] = result.verdicts.counts()
        kinds = {}
        for e in result.faults:
            kinds[e.kind] = kinds.get(e.kind, 0) + 1
        report["faults"] = {"scheduled": len(result.faults), "applied": len(injector.applied),
                            "rejected": len(injector.rejected), "by_kind": dict(sorted(kinds.items()))}
        report["detectors"] = _detector_extras(dets, topo.records, cfg.horizon)
        result.topo = topo
    if fabric is not None:
        conv = []
        for t, lid, direction in fabric.failure_log:
            done = fabric.convergence_after(lid, t)
            conv.append({"link": lid, "direction": direction, "t_fail": t,
                         "t_converged": done, "latency": None if done is None else done - t})
        report["oae"] = {"belief_changes": len(fabric.changes),
                         "notifications": fabric.notifications,
                         "escalations": len(fabric.escalations), "convergence": conv,
                         "max_convergence_latency": max(
                             (c["latency"] for c in conv if c["latency"] is not None),
                             default=None)}
        result.tables["oae_beliefs"] = (("t", "node", "link", "state", "source"),
                                        [[c.t, c.node, c.link, c.state, c.source]
                                         for c in fabric.changes])
        result.fabric = fabric
    w = cfg.workload
    if w is not None:
        handlers = {"retry-storm": _run_storm, "atomicity-sweep": _run_atomicity_sweep,
                    "checkpoint-feedback": _run_feedback, "table1": _run_table1}
        if w["type"] in handlers:
            report["workload"] = {"type": w["type"], **handlers[w["type"]](w, cfg, result)}
        elif w["type"] == "tokens":
            report["workload"] = {"type": "tokens", **_token_summary(ledger, result)}
        elif w["type"] == "slice-stream":
            report["workload"] = {"type": "slice-stream", **_stream_summary(stream, result)}
    result.trace = sim.trace
    result.report = report
    return result
