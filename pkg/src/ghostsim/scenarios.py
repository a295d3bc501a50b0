"""Built-in named scenarios, stored as raw config trees."""

from __future__ import annotations

import copy

from .config import SCHEMA_VERSION, ScenarioConfig, parse_config
from .errors import ConfigError


def _cfg(name: str, horizon, seed: int = 0, **sections) -> dict:
    return {"schema_version": SCHEMA_VERSION, "name": name, "seed": seed, "horizon": horizon,
            **sections}


def _storm(name: str, horizon="600s", seed: int = 7, **workload) -> dict:
    w = {"type": "retry-storm", "capacity": 700, "queue_limit": 1000, "rate": 300,
         "timeout": "1s", "triggers": [{"start": "60s", "end": "120s", "capacity": 280}]}
    w.update(workload)
    return _cfg(name, horizon, seed, workload=w)


_PROP1_LINKS = [[f"L{i}", "A", f"B{i}"] for i in range(4)]
_TOKEN_LINKS = [[a + b, a, b] for a, b in (("N0", "N1"), ("N1", "N2"), ("N2", "N3"), ("N3", "N4"),
                                           ("N4", "N5"), ("N0", "N2"), ("N2", "N4"))]

SCENARIOS: dict[str, dict] = {
    "timeout-bound": _cfg(
        "timeout-bound", "30s", 1,
        topology={"type": "links", "links": _PROP1_LINKS},
        faults=[{"type": "flaps", "flap_mttf": "2s", "down": {"dist": "fixed", "value": "200ms"}}],
        detectors=[{"type": "fixed-timeout", "observer": "tar", "link": lid, "timeout": "50ms",
                    "retries": 3, "rtt": "2ms", "poll": "1ms"} for lid, _, _ in _PROP1_LINKS]),
    "ghost-compare": _cfg(
        "ghost-compare", "60s", 3,
        topology={"type": "triangle", "oae": {"delay": "500ns", "slice_time": "51.2ns"}},
        faults=[{"type": "flaps", "links": ["AB"], "flap_mttf": "5s",
                 "down": {"dist": "fixed", "value": "200ms"}}],
        detectors=[{"type": "fixed-timeout", "observer": f"tar:{obs}", "link": lid,
                    "timeout": "50ms", "poll": "1ms"}
                   for obs, lid in (("A", "AB"), ("A", "AC"), ("B", "AB"), ("B", "BC"),
                                    ("C", "AC"), ("C", "BC"))]),
    "k8s-partition": _cfg(
        "k8s-partition", "400s", 0,
        topology={"type": "k8s", "nodes": 1},
        faults=[{"type": "partition", "link": "ctrl:n0", "t": "100s", "duration": "200s",
                 "jitter": "10s"}],
        detectors=[{"type": "k8s", "node": "n0"}]),
    "bfd-suppression": _cfg(
        "bfd-suppression", "60s", 0,
        topology={"type": "links", "links": [["L0", "A", "B"]]},
        faults=[{"type": "events", "events": [
            {"t": t, "link": "L0", "kind": k}
            for t, k in (("1s", "down"), ("1.1s", "up"), ("5s", "down"), ("5.1s", "up"),
                         ("9s", "down"), ("9.1s", "up"), ("30s", "down"), ("50s", "up"))]}],
        detectors=[{"type": "bfd", "observer": "A", "link": "L0", "tx_interval": "10ms",
                    "detect_multiplier": 3, "suppressed_interval": "2s"}]),
    "silent-degrade": _cfg(
        "silent-degrade", "20s", 0,
        topology={"type": "links", "links": [["L0", "A", "B"]]},
        faults=[{"type": "degrade", "link": "L0", "t": "10.3s", "factor": "5/64"}],
        detectors=[
            {"type": "fixed-timeout", "observer": "fixed", "link": "L0", "timeout": "50ms"},
            {"type": "phi-accrual", "observer": "phi", "link": "L0", "interval": "100ms",
             "jitter": "5ms"},
            {"type": "bfd", "observer": "bfd", "link": "L0"},
            {"type": "status-poll", "observer": "poll", "link": "L0", "period": "1s"}]),
    "rlfd-triangle": _cfg(
        "rlfd-triangle", "1ms", 0,
        topology={"type": "triangle", "oae": {"delay": "500ns", "slice_time": "51.2ns"}},
        faults=[{"type": "oae-direction", "link": "AB", "direction": "both",
                 "t": 11_024_000}]),
    "token-conservation": _cfg(
        "token-conservation", "200us", 0,
        topology={"type": "links", "links": _TOKEN_LINKS,
                  "oae": {"delay": "500ns", "slice_time": "51.2ns"}},
        faults=[{"type": "oae-direction", "link": "N1N2", "direction": "reverse", "t": "3us",
                 "repair": "500ns"}],
        workload={"type": "tokens", "tokens": 4, "hops": 20}),
    "triangle-failover": _cfg(
        "triangle-failover", "100us", 0,
        topology={"type": "triangle", "oae": {"delay": "500ns", "slice_time": "51.2ns"}},
        faults=[{"type": "oae-direction", "link": "AB", "t": "300ns"}],
        workload={"type": "slice-stream", "src": "A", "dst": "B", "count": 10}),
    "swim-membership": _cfg(
        "swim-membership", "30s", 0,
        topology={"type": "membership", "members": 8},
        faults=[{"type": "events", "events": [{"t": "5s", "link": "node:m3",
                                               "kind": "hard-down"}]}],
        detectors=[{"type": "swim"}]),
    "metastable-basic": _storm("metastable-basic"),
    "metastable-shed": _storm("metastable-shed", shedding={"start": "200s", "fraction": 0.5}),
    "retry-1000pct": _storm("retry-1000pct", horizon="300s", timeout="500ms", max_retries=20,
                            overload={"start": "80s", "end": "120s"}),
    "retry-560": _storm("retry-560", capacity=300, rate=280, max_retries=1,
                        triggers=[{"start": "60s", "end": "600s", "capacity": 250}],
                        overload={"start": "200s", "end": "600s"},
                        fixed_point={"start": "200s", "end": "600s"}),
    "eq1-sweep": _cfg("eq1-sweep", "1s", 0, workload={"type": "atomicity-sweep"}),
    "table1": _cfg("table1", "1s", 0, workload={"type": "table1"}),
    "checkpoint-loop": _cfg("checkpoint-loop", "1s", 0, workload={
        "type": "checkpoint-feedback", "base_load": 1.0, "baseline_failure": 0.1,
        "sensitivity": 1.5, "cost": 1.0, "steps": 50}),
}


def list_scenarios() -> list[str]:
    return sorted(SCENARIOS)


def builtin_raw(name: str) -> dict:
    try:
        return copy.deepcopy(SCENARIOS[name])
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; see list-scenarios") from None


def builtin(name: str) -> ScenarioConfig:
    return parse_config(builtin_raw(name))
