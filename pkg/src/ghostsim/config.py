"""Declarative scenario files: a versioned JSON tree, validated and normalised.

Durations may be written as strings with units ("50ms", "3e5h") or plain
integers in ticks; after parsing every duration is an integer tick count so
that ``parse(emit(cfg)) == cfg`` holds exactly. Errors name the offending
key path, e.g. ``detectors[0].type``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .units import parse_duration

SCHEMA_VERSION = 1

# field kinds: "str", "int", "float", "bool", "dur", "frac", "strs", "any",
# a trailing "?" allows null. Each schema maps key -> (kind, default); a
# default of REQUIRED marks a mandatory key.
REQUIRED = object()

DOWN_SPECS = {
    "loguniform": {"low": ("dur", "1ms"), "high": ("dur", "10s")},
    "fixed": {"value": ("dur", REQUIRED)},
}

TOPOLOGY_SPECS = {
    "links": {"nodes": ("strs", []), "links": ("any", REQUIRED)},
    "triangle": {"nodes": ("strs", ["A", "B", "C"])},
    "membership": {"members": ("int", 8)},
    "k8s": {"nodes": ("int", 1)},
    "none": {},
}
TOPOLOGY_COMMON = {"oae": ("any?", None), "observers": ("any", [])}
OAE_SPEC = {"delay": ("dur", "500ns"), "slice_time": ("dur", "51.2ns"), "phase": ("dur", 0),
            "delays": ("any", {})}

FAULT_SPECS = {
    "flaps": {"links": ("strs", []), "flap_mttf": ("dur", REQUIRED), "down": ("any", {}),
              "hard_mtbf": ("dur?", None), "degrade_probability": ("float", 0.0),
              "degrade_factor": ("frac", "5/64"), "stream": ("str", "faults")},
    "events": {"events": ("any", REQUIRED)},
    "csv": {"path": ("str", REQUIRED)},
    "partition": {"link": ("str", REQUIRED), "t": ("dur", REQUIRED),
                  "duration": ("dur", REQUIRED), "jitter": ("dur", 0),
                  "stream": ("str", "partition")},
    "degrade": {"link": ("str", REQUIRED), "t": ("dur", REQUIRED), "factor": ("frac", "5/64")},
    "oae-direction": {"link": ("str", REQUIRED), "direction": ("str", "both"),
                      "t": ("dur", REQUIRED), "repair": ("dur?", None)},
}

DETECTOR_SPECS = {
    "fixed-timeout": {"observer": ("str", REQUIRED), "link": ("str", REQUIRED),
                      "timeout": ("dur", "50ms"), "retries": ("int", 0), "rtt": ("dur", "1ms"),
                      "poll": ("dur", "1ms"), "delay": ("dur", 0), "jitter": ("dur", 0)},
    "phi-accrual": {"observer": ("str", REQUIRED), "link": ("str", REQUIRED),
                    "threshold": ("float", 8.0), "window": ("int", 100),
                    "min_samples": ("int?", None), "interval": ("dur", "100ms"),
                    "jitter": ("dur", 0), "delay": ("dur", 0),
                    "distribution": ("str", "exponential")},
    "bfd": {"observer": ("str", REQUIRED), "link": ("str", REQUIRED),
            "tx_interval": ("dur", "10ms"), "detect_multiplier": ("int", 3),
            "suppressed_interval": ("dur", "1s"), "flap_limit": ("int", 3),
            "flap_window": ("dur", "15s"), "decay_after": ("dur", "60s"), "delay": ("dur", 0)},
    "k8s": {"node": ("str", REQUIRED), "grace": ("dur", "40s"), "eviction": ("dur", "300s"),
            "heartbeat": ("dur", "10s"), "observer": ("str", "controller"),
            "phase": ("dur?", None)},
    "status-poll": {"observer": ("str", REQUIRED), "link": ("str", REQUIRED),
                    "period": ("dur", "1s"), "phase": ("dur?", None)},
    "swim": {"members": ("strs", []), "period": ("dur", "1s"), "probe_timeout": ("dur", "200ms"),
             "k_indirect": ("int", 3), "suspicion_timeout": ("dur", "2s"),
             "delay": ("dur", "10ms")},
}

WORKLOAD_SPECS = {
    "retry-storm": {"capacity": ("float", REQUIRED), "queue_limit": ("int?", None),
                    "rate": ("float", REQUIRED), "timeout": ("dur", "1s"),
                    "max_retries": ("int?", None), "policy": ("str", "immediate"),
                    "backoff": ("dur", 0), "triggers": ("any", []), "shedding": ("any?", None),
                    "dt": ("dur", "10ms"), "overload": ("any?", None),
                    "fixed_point": ("any?", None)},
    "atomicity-sweep": {"q": ("any", [0.3, 0.5, 0.9, 0.999]), "K": ("any", [1, 2, 64, 4096]),
                  "trials": ("int", 100_000)},
    "checkpoint-feedback": {"base_load": ("float", 1.0), "baseline_failure": ("float", 0.0),
                            "sensitivity": ("float", 0.0), "cost": ("float", 0.0),
                            "steps": ("int", 50)},
    "table1": {"rows": ("any?", None), "min_flaps": ("int", 10_000)},
    "tokens": {"tokens": ("int", 4), "hops": ("int", 8), "gap": ("dur", 0)},
    "slice-stream": {"src": ("str", REQUIRED), "dst": ("str", REQUIRED),
                     "count": ("int", 10), "start": ("dur", 0)},
}
TRIGGER_SPEC = {"start": ("dur", REQUIRED), "end": ("dur", REQUIRED),
                "capacity": ("float", REQUIRED)}
SHED_SPEC = {"start": ("dur", REQUIRED), "fraction": ("float", 0.5)}
WINDOW_SPEC = {"start": ("dur", REQUIRED), "end": ("dur", REQUIRED)}
EVENT_SPEC = {"t": ("dur", REQUIRED), "link": ("str", REQUIRED), "kind": ("str", REQUIRED),
              "param": ("frac?", None)}
OBSERVER_SPEC = {"name": ("str", REQUIRED), "scope": ("strs?", None)}
ROW_SPEC = {"label": ("str", REQUIRED), "n_links": ("float", REQUIRED),
            "optics_lower_bound": ("float", REQUIRED), "stated_hard": ("str?", None),
            "stated_flap": ("str?", None), "hard_mtbf": ("str", "1e7h"),
            "flap_mttf": ("str", "3e5h")}


def _coerce(kind: str, value: Any, path: str):
    nullable = kind.endswith("?")
    kind = kind.rstrip("?")
    if value is None:
        if nullable:
            return None
        raise ConfigError(f"{path}: must not be null")
    try:
        if kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError
            return value
        if kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "dur":
            if isinstance(value, bool):
                raise TypeError
            d = parse_duration(value)
            if d < 0:
                raise ValueError("negative duration")
            return d
        if kind == "frac":
            if isinstance(value, bool):
                raise TypeError
            return str(Fraction(value).limit_denominator(10**12))
        if kind == "strs":
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise TypeError
            return list(value)
        if kind == "any":
            return copy.deepcopy(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        detail = f" ({exc})" if str(exc) else ""
        raise ConfigError(f"{path}: expected {kind}, got {value!r}{detail}") from None
    raise AssertionError(kind)


def _section(raw: Any, schema: dict, path: str, extra: tuple[str, ...] = ()) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = sorted(set(raw) - set(schema) - set(extra))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown key")
    out = {}
    for key, (kind, default) in schema.items():
        if key in raw:
            out[key] = _coerce(kind, raw[key], f"{path}.{key}")
        elif default is REQUIRED:
            raise ConfigError(f"{path}.{key}: required key missing")
        else:
            out[key] = _coerce(kind, copy.deepcopy(default), f"{path}.{key}")
    return out


def _typed(raw: Any, schemas: dict, path: str, common: dict | None = None) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    kind = raw.get("type")
    if kind not in schemas:
        raise ConfigError(f"{path}.type: unknown type {kind!r}; expected one of {sorted(schemas)}")
    schema = dict(schemas[kind])
    if common:
        schema.update(common)
    out = {"type": kind}
    out.update(_section(raw, schema, path, extra=("type",)))
    return out


def _list(raw: Any, path: str) -> list:
    if not isinstance(raw, list):
        raise ConfigError(f"{path}: expected a list")
    return raw


def _normalise_topology(raw: Any) -> dict:
    topo = _typed(raw, TOPOLOGY_SPECS, "topology", TOPOLOGY_COMMON)
    if topo["type"] == "links":
        links = []
        for i, item in enumerate(_list(topo["links"], "topology.links")):
            if (not isinstance(item, list) or len(item) != 3
                    or not all(isinstance(x, str) for x in item)):
                raise ConfigError(f"topology.links[{i}]: expected [link_id, node_a, node_b]")
            links.append(list(item))
        topo["links"] = links
    if topo["type"] in ("membership", "k8s") and topo.get("members", topo.get("nodes", 1)) < 1:
        raise ConfigError(f"topology.{'members' if topo['type'] == 'membership' else 'nodes'}: "
                          "must be >= 1")
    if topo["oae"] is not None:
        oae = _section(topo["oae"], OAE_SPEC, "topology.oae")
        delays = {}
        for lid, d in oae["delays"].items():
            delays[lid] = _coerce("dur", d, f"topology.oae.delays.{lid}")
        oae["delays"] = delays
        topo["oae"] = oae
    topo["observers"] = [_section(o, OBSERVER_SPEC, f"topology.observers[{i}]")
                         for i, o in enumerate(_list(topo["observers"], "topology.observers"))]
    return topo


def _normalise_fault(raw: Any, i: int) -> dict:
    path = f"faults[{i}]"
    f = _typed(raw, FAULT_SPECS, path)
    if f["type"] == "flaps":
        down = f["down"] or {"dist": "loguniform"}
        dist = down.get("dist") if isinstance(down, dict) else None
        if dist not in DOWN_SPECS:
            raise ConfigError(f"{path}.down.dist: unknown distribution {dist!r}")
        d = {"dist": dist}
        d.update(_section(down, DOWN_SPECS[dist], f"{path}.down", extra=("dist",)))
        f["down"] = d
        if not 0 <= f["degrade_probability"] <= 1:
            raise ConfigError(f"{path}.degrade_probability: must be in [0, 1]")
    elif f["type"] == "events":
        f["events"] = [_section(e, EVENT_SPEC, f"{path}.events[{j}]")
                       for j, e in enumerate(_list(f["events"], f"{path}.events"))]
    elif f["type"] == "oae-direction" and f["direction"] not in ("forward", "reverse", "both"):
        raise ConfigError(f"{path}.direction: expected forward, reverse or both")
    return f


def _normalise_workload(raw: Any) -> dict:
    w = _typed(raw, WORKLOAD_SPECS, "workload")
    if w["type"] == "retry-storm":
        w["triggers"] = [_section(t, TRIGGER_SPEC, f"workload.triggers[{i}]")
                         for i, t in enumerate(_list(w["triggers"], "workload.triggers"))]
        if w["shedding"] is not None:
            w["shedding"] = _section(w["shedding"], SHED_SPEC, "workload.shedding")
        for key in ("overload", "fixed_point"):
            if w[key] is not None:
                w[key] = _section(w[key], WINDOW_SPEC, f"workload.{key}")
    elif w["type"] == "atomicity-sweep":
        w["q"] = [_coerce("float", q, f"workload.q[{i}]") for i, q in enumerate(_list(w["q"], "workload.q"))]
        w["K"] = [_coerce("int", k, f"workload.K[{i}]") for i, k in enumerate(_list(w["K"], "workload.K"))]
    elif w["type"] == "table1" and w["rows"] is not None:
        w["rows"] = [_section(r, ROW_SPEC, f"workload.rows[{i}]")
                     for i, r in enumerate(_list(w["rows"], "workload.rows"))]
    return w


@dataclass
class ScenarioConfig:
    name: str
    seed: int = 0
    horizon: int = 0
    topology: dict = field(default_factory=lambda: {"type": "none", "oae": None, "observers": []})
    faults: list = field(default_factory=list)
    detectors: list = field(default_factory=list)
    workload: dict | None = None
    output: str | None = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "name": self.name, "seed": self.seed,
                "horizon": self.horizon, "topology": copy.deepcopy(self.topology),
                "faults": copy.deepcopy(self.faults), "detectors": copy.deepcopy(self.detectors),
                "workload": copy.deepcopy(self.workload), "output": self.output}

    def with_overrides(self, **changes) -> ScenarioConfig:
        d = self.to_dict()
        d.update(changes)
        return parse_config(d)


TOP_KEYS = ("schema_version", "name", "seed", "horizon", "topology", "faults", "detectors",
            "workload", "output")


def parse_config(raw: Any) -> ScenarioConfig:
    """Validate a config tree (already loaded from JSON) into a ScenarioConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    unknown = sorted(set(raw) - set(TOP_KEYS))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    name = _coerce("str", raw.get("name"), "name")
    seed = _coerce("int", raw.get("seed", 0), "seed")
    if seed < 0:
        raise ConfigError("seed: must be >= 0")
    if "horizon" not in raw:
        raise ConfigError("horizon: required key missing")
    horizon = _coerce("dur", raw["horizon"], "horizon")
    if horizon <= 0:
        raise ConfigError("horizon: must be > 0")
    topology = _normalise_topology(raw.get("topology", {"type": "none"}))
    faults = [_normalise_fault(f, i) for i, f in enumerate(_list(raw.get("faults", []), "faults"))]
    detectors = [_typed(d, DETECTOR_SPECS, f"detectors[{i}]")
                 for i, d in enumerate(_list(raw.get("detectors", []), "detectors"))]
    workload = raw.get("workload")
    if workload is not None:
        workload = _normalise_workload(workload)
    output = _coerce("str?", raw.get("output"), "output")
    cfg = ScenarioConfig(name, seed, horizon, topology, faults, detectors, workload, output)
    validate_references(cfg)
    return cfg


def topology_links(topology: dict) -> list[tuple[str, str, str]]:
    """The (link id, a, b) triples a topology section expands to."""
    kind = topology["type"]
    if kind == "links":
        return [tuple(x) for x in topology["links"]]
    if kind == "triangle":
        a, b, c = topology["nodes"]
        return [(f"{a}{b}", a, b), (f"{b}{c}", b, c), (f"{a}{c}", a, c)]
    if kind == "membership":
        return [(f"node:m{i}", f"m{i}", "fabric") for i in range(topology["members"])]
    if kind == "k8s":
        out = []
        for i in range(topology["nodes"]):
            n = f"n{i}"
            out += [(f"ctrl:{n}", "controller-plane", n), (f"pods:{n}", n, "workload")]
        return out
    return []


def validate_references(cfg: ScenarioConfig) -> None:
    """Every link, node and member a section mentions must exist."""
    topo = cfg.topology
    if topo["type"] == "triangle" and len(topo["nodes"]) != 3:
        raise ConfigError("topology.nodes: a triangle has exactly three nodes")
    links = {lid for lid, _, _ in topology_links(topo)}
    nodes = set(topo.get("nodes") or []) if topo["type"] == "links" else set()
    for i, (lid, a, b) in enumerate(topology_links(topo)):
        nodes.update((a, b))
    if topo["type"] == "links" and len(links) != len(topo["links"]):
        raise ConfigError("topology.links: duplicate link id")
    for i, o in enumerate(topo["observers"]):
        for lid in o["scope"] or []:
            if lid not in links:
                raise ConfigError(f"topology.observers[{i}].scope: unknown link {lid!r}")
    if topo["oae"] is not None:
        if topo["type"] not in ("links", "triangle"):
            raise ConfigError("topology.oae: the OAE overlay needs a links or triangle topology")
        for lid in topo["oae"]["delays"]:
            if lid not in links:
                raise ConfigError(f"topology.oae.delays.{lid}: unknown link")
    for i, f in enumerate(cfg.faults):
        path = f"faults[{i}]"
        if f["type"] == "flaps":
            for lid in f["links"]:
                if lid not in links:
                    raise ConfigError(f"{path}.links: unknown link {lid!r}")
        elif f["type"] == "events":
            for j, e in enumerate(f["events"]):
                if e["link"] not in links:
                    raise ConfigError(f"{path}.events[{j}].link: unknown link {e['link']!r}")
        elif f["type"] in ("partition", "degrade", "oae-direction"):
            if f["link"] not in links:
                raise ConfigError(f"{path}.link: unknown link {f['link']!r}")
            if f["type"] == "oae-direction" and topo["oae"] is None:
                raise ConfigError(f"{path}.type: oae-direction faults need topology.oae")
    k8s_nodes = {f"n{i}" for i in range(topo["nodes"])} if topo["type"] == "k8s" else set()
    members = {f"m{i}" for i in range(topo["members"])} if topo["type"] == "membership" else set()
    for i, d in enumerate(cfg.detectors):
        path = f"detectors[{i}]"
        if "link" in d and d["link"] not in links:
            raise ConfigError(f"{path}.link: unknown link {d['link']!r}")
        if d["type"] == "k8s" and d["node"] not in k8s_nodes:
            raise ConfigError(f"{path}.node: unknown k8s node {d['node']!r}")
        if d["type"] == "swim":
            if topo["type"] != "membership":
                raise ConfigError(f"{path}.type: swim needs a membership topology")
            for m in d["members"]:
                if m not in members:
                    raise ConfigError(f"{path}.members: unknown member {m!r}")
    w = cfg.workload
    if w is not None and w["type"] in ("tokens", "slice-stream") and topo["oae"] is None:
        raise ConfigError(f"workload.type: {w['type']} needs topology.oae")
    if w is not None and w["type"] == "slice-stream":
        for key in ("src", "dst"):
            if w[key] not in nodes:
                raise ConfigError(f"workload.{key}: unknown node {w[key]!r}")


def emit_config(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(raw)
