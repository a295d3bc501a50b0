"""SWIM: randomized probing, indirect probes, suspicion, piggybacked gossip.

Every member is an observer whose believed graph holds one ``node:<m>``
link per member; a crash takes that link down in G_A. Each member only
learns about crashes through its own probes or through gossip, so views
disagree while updates spread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import ConfigError
from ..kernel import Simulator
from ..topology import DOWN, UP, Graph, TopologyPair
from ..units import MS, S
from .base import ALIVE, DEAD, SUSPECT, DetectorVerdict, VerdictLog

FABRIC = "fabric"


def node_link(member: str) -> str:
    return f"node:{member}"


def membership_graph(members: list[str]) -> Graph:
    g = Graph()
    g.add_node(FABRIC)
    for m in members:
        g.add_node(m)
        g.add_link(node_link(m), m, FABRIC)
    return g


@dataclass
class _Member:
    name: str
    incarnation: int = 0
    view: dict = field(default_factory=dict)       # member -> (status, incarnation)
    updates: dict = field(default_factory=dict)    # member -> [status, incarnation, times_sent]
    order: list = field(default_factory=list)
    cursor: int = 0
    round_id: int = 0
    acked: set = field(default_factory=set)
    relays: dict = field(default_factory=dict)     # (prober, round) -> waiting


class SwimGroup:
    kind = "swim"

    def __init__(self, sim: Simulator, topo: TopologyPair, members: list[str],
                 period: int = 1 * S, probe_timeout: int = 200 * MS, k_indirect: int = 3,
                 suspicion_timeout: int = 2 * S, delay: int = 10 * MS, max_piggyback: int = 6,
                 retransmit_mult: int = 3, log: VerdictLog | None = None, name: str = "swim"):
        if len(members) < 2:
            raise ConfigError("SWIM needs at least two members")
        if not 0 < probe_timeout < period:
            raise ConfigError("probe timeout must be in (0, period)")
        if 2 * delay >= probe_timeout:
            raise ConfigError("round-trip delay must be below the probe timeout")
        if 4 * delay >= period - probe_timeout:
            raise ConfigError("indirect probe round trip must fit in the rest of the period")
        self.sim = sim
        self.topo = topo
        self.period = period
        self.probe_timeout = probe_timeout
        self.k = k_indirect
        self.suspicion_timeout = suspicion_timeout
        self.delay = delay
        self.max_piggyback = max_piggyback
        self.retransmit_limit = retransmit_mult * math.ceil(math.log2(len(members) + 1))
        self.log = log if log is not None else VerdictLog()
        self.name = name
        self.rng = sim.rng(f"{name}:protocol")
        self.members: dict[str, _Member] = {}
        self.messages = 0
        for m in members:
            topo.observer(m)
            topo.actual.attr(node_link(m))
            st = _Member(m, view={x: (ALIVE, 0) for x in members})
            st.order = self.rng.shuffled([x for x in members if x != m])
            self.members[m] = st
        for m in members:
            phase = self.rng.integers(0, period)
            sim.schedule(sim.now + phase, self._round, m, target=m, kind=f"{name}:round")

    # -- helpers -----------------------------------------------------------
    def alive(self, m: str) -> bool:
        return self.topo.is_up(node_link(m))

    def believed_members(self, m: str) -> frozenset[str]:
        """Members that ``m`` does not consider dead."""
        return frozenset(x for x, (s, _) in self.members[m].view.items() if s != DEAD)

    def _set_view(self, st: _Member, x: str, status: str, inc: int) -> None:
        old = st.view[x][0]
        st.view[x] = (status, inc)
        st.updates[x] = [status, inc, 0]
        if status != old:
            t = self.sim.now
            self.log.append(DetectorVerdict(self.name, st.name, node_link(x), status, t))
            if status == DEAD:
                self.topo.set_belief(st.name, node_link(x), DOWN, t)
            elif old == DEAD:
                self.topo.set_belief(st.name, node_link(x), UP, t)

    def _gossip(self, st: _Member) -> list[tuple[str, str, int]]:
        if not st.updates:
            return []
        chosen = sorted(st.updates.items(), key=lambda kv: (kv[1][2], kv[0]))[: self.max_piggyback]
        out = []
        for x, entry in chosen:
            out.append((x, entry[0], entry[1]))
            entry[2] += 1
            if entry[2] >= self.retransmit_limit:
                del st.updates[x]
        return out

    def _send(self, src: str, dst: str, handler, *args) -> None:
        if not self.alive(src):
            return
        self.messages += 1
        payload = self._gossip(self.members[src])
        self.sim.schedule(self.sim.now + self.delay, self._deliver, src, dst, payload, handler, args,
                          target=dst, kind=f"{self.name}:{handler.__name__.lstrip('_')}")

    def _deliver(self, src, dst, payload, handler, args) -> None:
        if not self.alive(dst):
            return
        self._merge(self.members[dst], payload)
        handler(src, dst, *args)

    def _merge(self, st: _Member, payload) -> None:
        for x, status, inc in payload:
            if x == st.name:
                if status == SUSPECT and inc >= st.incarnation:
                    st.incarnation = inc + 1
                    st.view[x] = (ALIVE, st.incarnation)
                    st.updates[x] = [ALIVE, st.incarnation, 0]
                continue
            cur, ci = st.view[x]
            if cur == DEAD:
                continue
            if status == DEAD:
                self._set_view(st, x, DEAD, inc)
            elif status == SUSPECT and ((cur == ALIVE and inc >= ci) or (cur == SUSPECT and inc > ci)):
                self._suspect(st, x, inc)
            elif status == ALIVE and inc > ci:
                self._set_view(st, x, ALIVE, inc)

    # -- protocol ----------------------------------------------------------
    def _next_target(self, st: _Member) -> str | None:
        for _ in range(2 * len(st.order) + 1):
            if st.cursor >= len(st.order):
                st.order = self.rng.shuffled(st.order)
                st.cursor = 0
            x = st.order[st.cursor]
            st.cursor += 1
            if st.view[x][0] != DEAD:
                return x
        return None

    def _round(self, m: str) -> None:
        if not self.alive(m):
            return
        now = self.sim.now
        self.sim.schedule(now + self.period, self._round, m, target=m, kind=f"{self.name}:round")
        st = self.members[m]
        target = self._next_target(st)
        if target is None:
            return
        st.round_id += 1
        rid = st.round_id
        self._send(m, target, self._on_ping, rid, None)
        self.sim.schedule(now + self.probe_timeout, self._on_probe_timeout, m, target, rid,
                          target=m, kind=f"{self.name}:probe-timeout")
        self.sim.schedule(now + self.period - 1, self._on_round_end, m, target, rid,
                          target=m, kind=f"{self.name}:round-end")

    def _on_ping(self, src, dst, rid, relay_for) -> None:
        self._send(dst, src, self._on_ack, rid, relay_for)

    def _on_ack(self, src, dst, rid, relay_for) -> None:
        st = self.members[dst]
        if relay_for is None:
            st.acked.add(rid)
        else:
            prober, prid = relay_for
            self._send(dst, prober, self._on_ack, prid, None)

    def _on_ping_req(self, src, dst, target, rid) -> None:
        self._send(dst, target, self._on_ping, rid, (src, rid))

    def _on_probe_timeout(self, m, target, rid) -> None:
        st = self.members[m]
        if rid in st.acked or not self.alive(m):
            return
        helpers = [x for x in st.view if x not in (m, target) and st.view[x][0] != DEAD]
        if helpers:
            for h in self.rng.choice(helpers, size=min(self.k, len(helpers)), replace=False):
                self._send(m, h, self._on_ping_req, target, rid)

    def _on_round_end(self, m, target, rid) -> None:
        st = self.members[m]
        if not self.alive(m):
            return
        if rid in st.acked:
            st.acked.discard(rid)
            return
        status, inc = st.view[target]
        if status == ALIVE:
            self._suspect(st, target, inc)

    def _suspect(self, st: _Member, x: str, inc: int) -> None:
        self._set_view(st, x, SUSPECT, inc)
        self.sim.schedule(self.sim.now + self.suspicion_timeout, self._on_suspicion_timeout,
                          st.name, x, inc, target=st.name, kind=f"{self.name}:suspicion")

    def _on_suspicion_timeout(self, m, x, inc) -> None:
        st = self.members[m]
        if not self.alive(m):
            return
        if st.view[x] == (SUSPECT, inc):
            self._set_view(st, x, DEAD, inc)
