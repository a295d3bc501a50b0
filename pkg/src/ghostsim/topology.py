"""Actual vs believed topology and ghost interval bookkeeping.

A ghost is any interval during which an observer's believed attributes for a
link differ from the actual ones. Records are opened and closed incrementally
as either side changes, one record per (observer, link, kind).
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .errors import ConfigError, TopologyError

UP = "up"
DOWN = "down"

STALE_UP = "stale-up"
STALE_DOWN = "stale-down"
SILENT_DEGRADE = "silent-degrade"
GHOST_KINDS = (STALE_UP, STALE_DOWN, SILENT_DEGRADE)

FULL_RATE = Fraction(1)


@dataclass(frozen=True)
class Link:
    link_id: str
    a: str
    b: str

    def other(self, node: str) -> str:
        if node == self.a:
            return self.b
        if node == self.b:
            return self.a
        raise TopologyError(f"{node} is not an endpoint of {self.link_id}")


@dataclass
class LinkAttrs:
    state: str = UP
    bandwidth: Fraction = FULL_RATE


class Graph:
    def __init__(self) -> None:
        self.nodes: set[str] = set()
        self.links: dict[str, Link] = {}
        self.attrs: dict[str, LinkAttrs] = {}

    def add_node(self, node: str) -> None:
        self.nodes.add(node)

    def add_link(self, link_id: str, a: str, b: str) -> Link:
        if link_id in self.links:
            raise TopologyError(f"duplicate link {link_id}")
        for n in (a, b):
            if n not in self.nodes:
                raise TopologyError(f"link {link_id} endpoint {n} is not a node")
        link = Link(link_id, a, b)
        self.links[link_id] = link
        self.attrs[link_id] = LinkAttrs()
        return link

    def copy(self) -> Graph:
        g = Graph()
        g.nodes = set(self.nodes)
        g.links = dict(self.links)
        g.attrs = {k: LinkAttrs(v.state, v.bandwidth) for k, v in self.attrs.items()}
        return g

    def attr(self, link_id: str) -> LinkAttrs:
        try:
            return self.attrs[link_id]
        except KeyError:
            raise TopologyError(f"unknown link {link_id!r}") from None

    def links_of(self, node: str) -> list[Link]:
        return [l for l in self.links.values() if node in (l.a, l.b)]

    def up_neighbors(self, node: str) -> list[str]:
        return sorted(
            l.other(node) for l in self.links_of(node) if self.attrs[l.link_id].state == UP
        )


def divergence(actual: LinkAttrs, believed: LinkAttrs) -> set[str]:
    """Ghost kinds present when ``believed`` is compared against ``actual``."""
    kinds = set()
    if actual.state != believed.state:
        kinds.add(STALE_UP if believed.state == UP else STALE_DOWN)
    if actual.bandwidth != believed.bandwidth:
        kinds.add(SILENT_DEGRADE)
    return kinds


@dataclass
class GhostRecord:
    observer: str
    link: str
    kind: str
    t_start: int
    t_end: int | None = None

    def duration(self, horizon: int | None = None) -> int:
        end = self.t_end if self.t_end is not None else horizon
        if end is None:
            raise ValueError("open record needs a horizon")
        return max(end - self.t_start, 0)


@dataclass
class ObserverView:
    observer: str
    believed: Graph
    last_update: dict[str, int] = field(default_factory=dict)
    scope: frozenset[str] | None = None

    def tracks(self, link_id: str) -> bool:
        return self.scope is None or link_id in self.scope


class TopologyPair:
    """G_A plus one believed graph per observer, with incremental ghost records.

    Observers carry the full identifier set of G_A. An optional ``scope``
    limits which links the observer claims knowledge of; links outside the
    scope never produce records for that observer.
    """

    def __init__(self, graph: Graph):
        self.actual = graph
        self.observers: dict[str, ObserverView] = {}
        self.records: list[GhostRecord] = []
        self._open: dict[tuple[str, str, str], GhostRecord] = {}
        self._last_closed: dict[tuple[str, str, str], GhostRecord] = {}
        self.last_change: dict[str, int] = {lid: 0 for lid in graph.links}
        # (t, who, link, state, bandwidth) for every effective attribute change
        self.log: list[tuple[int, str, str, str, Fraction]] = []
        self.listeners: list = []

    # -- setup -------------------------------------------------------------
    def add_observer(self, name: str, scope: Iterable[str] | None = None) -> ObserverView:
        if name in self.observers:
            raise TopologyError(f"duplicate observer {name}")
        if name == "actual":
            raise TopologyError("'actual' is reserved")
        sc = None
        if scope is not None:
            sc = frozenset(scope)
            for lid in sc:
                self.actual.attr(lid)
        view = ObserverView(name, self.actual.copy(), scope=sc)
        self.observers[name] = view
        # beliefs start equal to the actual graph, so nothing is open yet
        return view

    def observer(self, name: str) -> ObserverView:
        try:
            return self.observers[name]
        except KeyError:
            raise TopologyError(f"unknown observer {name!r}") from None

    # -- queries -----------------------------------------------------------
    def is_up(self, link_id: str) -> bool:
        return self.actual.attr(link_id).state == UP

    def stable_since(self, link_id: str, t: int) -> bool:
        """Link is up now and has not changed state after ``t``."""
        return self.is_up(link_id) and self.last_change[link_id] <= t

    def believes_up(self, observer: str, link_id: str) -> bool:
        return self.observer(observer).believed.attr(link_id).state == UP

    # -- mutation ----------------------------------------------------------
    def set_actual(self, link_id: str, state: str | None = None, t: int = 0,
                   bandwidth: Fraction | None = None) -> None:
        attrs = self.actual.attr(link_id)
        changed = self._apply(attrs, state, bandwidth)
        if not changed:
            return
        if state is not None and changed[0]:
            self.last_change[link_id] = t
        self.log.append((t, "actual", link_id, attrs.state, attrs.bandwidth))
        for view in self.observers.values():
            if view.tracks(link_id):
                self._reconcile(view, link_id, t)
        for fn in self.listeners:
            fn(link_id, attrs, t)

    def set_belief(self, observer: str, link_id: str, state: str | None = None, t: int = 0,
                   bandwidth: Fraction | None = None) -> None:
        view = self.observer(observer)
        attrs = view.believed.attr(link_id)
        if not self._apply(attrs, state, bandwidth):
            return
        view.last_update[link_id] = t
        self.log.append((t, observer, link_id, attrs.state, attrs.bandwidth))
        if view.tracks(link_id):
            self._reconcile(view, link_id, t)

    @staticmethod
    def _apply(attrs: LinkAttrs, state: str | None, bandwidth) -> tuple[bool, bool] | None:
        if state is not None and state not in (UP, DOWN):
            raise ConfigError(f"bad link state {state!r}")
        s_changed = state is not None and state != attrs.state
        b_changed = False
        if bandwidth is not None:
            bw = Fraction(bandwidth)
            if not (0 < bw <= 1):
                raise ConfigError(f"bandwidth factor must be in (0, 1], got {bw}")
            b_changed = bw != attrs.bandwidth
        if s_changed:
            attrs.state = state
        if b_changed:
            attrs.bandwidth = Fraction(bandwidth)
        if s_changed or b_changed:
            return (s_changed, b_changed)
        return None

    def _reconcile(self, view: ObserverView, link_id: str, t: int) -> None:
        present = divergence(self.actual.attrs[link_id], view.believed.attrs[link_id])
        for kind in GHOST_KINDS:
            key = (view.observer, link_id, kind)
            is_open = key in self._open
            if kind in present and not is_open:
                self._open_record(key, t)
            elif kind not in present and is_open:
                self._close_record(key, t)

    def _open_record(self, key, t: int) -> None:
        last = self._last_closed.get(key)
        if last is not None and last.t_end is not None and last.t_end > t:
            # a zero-length record padded to one tick is still covering t
            last.t_end = None
            self._open[key] = last
            return
        rec = GhostRecord(key[0], key[1], key[2], t)
        self.records.append(rec)
        self._open[key] = rec

    def _close_record(self, key, t: int) -> None:
        rec = self._open.pop(key)
        rec.t_end = t if t > rec.t_start else rec.t_start + 1
        self._last_closed[key] = rec

    # -- results -----------------------------------------------------------
    def open_records(self) -> list[GhostRecord]:
        return list(self._open.values())

    def ghost_stats(self, horizon: int) -> dict[str, dict]:
        return ghost_stats(self.records, horizon, self.observers)


def ghost_stats(records: Iterable[GhostRecord], horizon: int,
                observers: Iterable[str] = ()) -> dict[str, dict]:
    """Per-observer aggregates. Open records are extended to ``horizon``."""
    out: dict[str, dict] = {}

    def blank():
        return {"total_ghost_time": 0, "max_ghost_duration": 0,
                "count_by_kind": {k: 0 for k in GHOST_KINDS}, "false_positive_count": 0,
                "max_by_kind": {k: 0 for k in GHOST_KINDS}}

    for name in observers:
        out[name] = blank()
    for rec in records:
        st = out.setdefault(rec.observer, blank())
        d = rec.duration(horizon)
        st["total_ghost_time"] += d
        st["max_ghost_duration"] = max(st["max_ghost_duration"], d)
        st["count_by_kind"][rec.kind] += 1
        st["max_by_kind"][rec.kind] = max(st["max_by_kind"][rec.kind], d)
        if rec.kind == STALE_DOWN:
            st["false_positive_count"] += 1
    return out


def durations(records: Iterable[GhostRecord], kind: str | None = None,
              observer: str | None = None, horizon: int | None = None) -> list[int]:
    return [r.duration(horizon) for r in records
            if (kind is None or r.kind == kind) and (observer is None or r.observer == observer)]


GHOST_CSV_COLUMNS = ("observer", "link", "kind", "t_start", "t_end")


def write_ghost_csv(records: Iterable[GhostRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GHOST_CSV_COLUMNS)
        for r in sorted(records, key=lambda r: (r.t_start, r.observer, r.link, r.kind)):
            w.writerow([r.observer, r.link, r.kind, r.t_start, "" if r.t_end is None else r.t_end])


def read_ghost_csv(path) -> list[GhostRecord]:
    with open(path, newline="") as fh:
        return [GhostRecord(row["observer"], row["link"], row["kind"], int(row["t_start"]),
                            int(row["t_end"]) if row["t_end"] else None)
                for row in csv.DictReader(fh)]


def write_log_csv(log, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t", "who", "link", "state", "bandwidth"))
        for t, who, link, state, bw in log:
            w.writerow([t, who, link, state, str(bw)])


def records_by_key(records: Iterable[GhostRecord]) -> dict[tuple[str, str, str], list[GhostRecord]]:
    groups: dict = defaultdict(list)
    for r in records:
        groups[(r.observer, r.link, r.kind)].append(r)
    return groups
