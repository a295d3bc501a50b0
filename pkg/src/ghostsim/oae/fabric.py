"""An OAE fabric: links, per-node link-state belief, RLFD triangles, routing.

Each endpoint of every link runs a back-to-back liveness ping-pong of period
B (the link round trip), launched at ``phase + k*B``. A round is lost when
either of its legs overlaps a failure, and the initiator learns that at the
round's end. It then sends one notification slice to the third node of every
triangle containing the link, over the link joining them.

Liveness rounds are evaluated lazily: nothing is scheduled on a healthy
fabric, and only rounds that can be affected by a physical failure or repair
are examined.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

from ..errors import ConfigError, TopologyError
from ..kernel import Simulator
from ..topology import DOWN, UP, TopologyPair
from .link import OaeLink

log = logging.getLogger(__name__)

LIVENESS = "liveness"
REVERT = "revert"
NOTIFY = "notify"


@dataclass(frozen=True)
class Triangle:
    nodes: tuple[str, str, str]
    links: tuple[str, str, str]


@dataclass(frozen=True)
class BeliefChange:
    t: int
    node: str
    link: str
    state: str
    source: str


@dataclass(frozen=True)
class Escalation:
    t: int
    node: str
    triangle: Triangle
    reason: str


class OaeFabric:
    def __init__(self, sim: Simulator, links: list[OaeLink], topo: TopologyPair | None = None,
                 phase: int = 0, observer_prefix: str = "oae:"):
        if phase < 0:
            raise ConfigError("liveness phase must be >= 0")
        self.sim = sim
        self.topo = topo
        self.phase = phase
        self._syncing = False
        self.prefix = observer_prefix
        self.links: dict[str, OaeLink] = {}
        self.adj: dict[str, dict[str, str]] = {}   # node -> neighbour -> link id
        for link in links:
            if link.link_id in self.links:
                raise ConfigError(f"duplicate OAE link {link.link_id}")
            for x in (link.a, link.b):
                self.adj.setdefault(x, {})
            if link.b in self.adj[link.a]:
                raise ConfigError(f"parallel links between {link.a} and {link.b}")
            self.links[link.link_id] = link
            self.adj[link.a][link.b] = link.link_id
            self.adj[link.b][link.a] = link.link_id
        self.triangles = self._find_triangles()
        self.belief = {x: {lid: True for lid in self.links} for x in self.adj}
        self._belief_t = {x: {} for x in self.adj}
        self.epoch = {x: 0 for x in self.adj}
        self.routes = {x: self._bfs(x) for x in self.adj}
        self.changes: list[BeliefChange] = []
        self.escalations: list[Escalation] = []
        self.notifications = 0
        self.failure_listeners: list = []
        self.failure_log: list[tuple[int, str, str]] = []
        self._checks: set[tuple[str, str, int]] = set()
        if topo is not None:
            self._attach(topo)

    # -- construction ------------------------------------------------------
    def _find_triangles(self) -> list[Triangle]:
        found = set()
        for x, nbrs in self.adj.items():
            for y in nbrs:
                for z in nbrs:
                    if y < z and z in self.adj[y]:
                        nodes = tuple(sorted((x, y, z)))
                        found.add(nodes)
        out = []
        for a, b, c in sorted(found):
            out.append(Triangle((a, b, c), (self.adj[a][b], self.adj[b][c], self.adj[a][c])))
        return out

    def scope(self, node: str) -> set[str]:
        """Links a node can know about: its own plus those of its triangles."""
        sc = set(self.adj[node].values())
        for tri in self.triangles:
            if node in tri.nodes:
                sc.update(tri.links)
        return sc

    def observer_name(self, node: str) -> str:
        return f"{self.prefix}{node}"

    def _attach(self, topo: TopologyPair) -> None:
        for lid, link in self.links.items():
            topo_link = topo.actual.links.get(lid)
            if topo_link is None or {topo_link.a, topo_link.b} != {link.a, link.b}:
                raise TopologyError(f"OAE link {lid} is missing from G_A or has other endpoints")
        for x in sorted(self.adj):
            topo.add_observer(self.observer_name(x), scope=self.scope(x))
        topo.listeners.append(self._on_actual)

    def _on_actual(self, link_id: str, attrs, t: int) -> None:
        link = self.links.get(link_id)
        if link is None or self._syncing:
            return
        if attrs.state == DOWN:
            self.fail(link_id, t=t)
        else:
            self.repair(link_id, t=t)

    # -- physical failures -------------------------------------------------
    def _directions(self, link: OaeLink, direction: str | None):
        if direction is None or direction == "both":
            return [(link.a, link.b), (link.b, link.a)]
        if direction == "forward":
            return [(link.a, link.b)]
        if direction == "reverse":
            return [(link.b, link.a)]
        raise ConfigError(f"bad direction {direction!r}; use forward, reverse or both")

    def fail(self, link_id: str, direction: str | None = None, t: int | None = None) -> None:
        """Fail one or both directions of a link at ``t`` (default: now)."""
        t = self.sim.now if t is None else t
        link = self.links[link_id]
        changed = False
        for src, dst in self._directions(link, direction):
            changed |= link.fail(src, dst, t)
        if not changed:
            return
        self.failure_log.append((t, link_id, direction or "both"))
        for x in (link.a, link.b):
            self._schedule_check(x, link, self._round_at(link, t))
        for fn in self.failure_listeners:
            fn(link_id, t)
        self._sync_actual(link, t)

    def repair(self, link_id: str, direction: str | None = None, t: int | None = None) -> None:
        t = self.sim.now if t is None else t
        link = self.links[link_id]
        changed = False
        for src, dst in self._directions(link, direction):
            changed |= link.repair(src, dst, t)
        if not changed:
            return
        if link.is_up():
            for x in (link.a, link.b):
                self._schedule_check(x, link, self._round_at(link, t))
        self._sync_actual(link, t)

    def _sync_actual(self, link: OaeLink, t: int) -> None:
        if self.topo is None:
            return
        want = UP if link.is_up() else DOWN
        if self.topo.actual.attr(link.link_id).state != want:
            # the echo of our own update must not fail the healthy direction
            self._syncing = True
            try:
                self.topo.set_actual(link.link_id, want, t)
            finally:
                self._syncing = False

    # -- liveness rounds ---------------------------------------------------
    def _round_at(self, link: OaeLink, t: int) -> int:
        return max(0, (t - self.phase) // link.round_trip)

    def _schedule_check(self, x: str, link: OaeLink, k: int) -> None:
        key = (x, link.link_id, k)
        if key in self._checks:
            return
        self._checks.add(key)
        end = self.phase + (k + 1) * link.round_trip
        self.sim.schedule(max(end, self.sim.now), self._check, x, link, k,
                          target=x, kind="rlfd:round")

    def _check(self, x: str, link: OaeLink, k: int) -> None:
        self._checks.discard((x, link.link_id, k))
        y = link.other(x)
        start = self.phase + k * link.round_trip
        mid = start + link.one_way
        end = start + link.round_trip
        ok = link.clear(x, y, start, mid) and link.clear(y, x, mid, end)
        lid = link.link_id
        if self.belief[x][lid] and not ok:
            self._detect(x, lid, False, LIVENESS)
        elif not self.belief[x][lid] and ok:
            self._detect(x, lid, True, LIVENESS)
        if self.belief[x][lid]:
            if link.failure_pending_after(end):
                self._schedule_check(x, link, k + 1)
        elif link.is_up():
            self._schedule_check(x, link, k + 1)

    def report_revert(self, node: str, link_id: str) -> None:
        """A data slice from ``node`` over ``link_id`` came back reverted."""
        if self.belief[node][link_id]:
            self._detect(node, link_id, False, REVERT)
            link = self.links[link_id]
            if link.is_up():
                self._schedule_check(node, link, self._round_at(link, self.sim.now))

    # -- belief and notification -------------------------------------------
    def _detect(self, x: str, lid: str, up: bool, source: str) -> None:
        t = self.sim.now
        self._set_belief(x, lid, up, t, source)
        link = self.links[lid]
        y = link.other(x)
        for z, xz in self.adj[x].items():
            if z == y or y not in self.adj[z]:
                continue
            self._notify(x, z, self.links[xz], lid, up, t)

    def _notify(self, x: str, z: str, via: OaeLink, lid: str, up: bool, t_detect: int) -> None:
        self.notifications += 1
        t0 = self.sim.now

        def arrive():
            if via.clear(x, z, t0, t0 + via.one_way):
                if self._belief_t[z].get(lid, -1) <= t_detect:
                    self._set_belief(z, lid, up, self.sim.now, NOTIFY, t_detect)
            else:
                self._escalate(x, (x, z, self.links[lid].other(x)),
                              f"notification of {lid} over {via.link_id} lost")

        self.sim.schedule(t0 + via.one_way, arrive, target=z, kind="rlfd:notify")

    def _set_belief(self, x: str, lid: str, up: bool, t: int, source: str,
                    stamp: int | None = None) -> None:
        self._belief_t[x][lid] = t if stamp is None else stamp
        if self.belief[x][lid] == up:
            return
        self.belief[x][lid] = up
        state = UP if up else DOWN
        self.changes.append(BeliefChange(t, x, lid, state, source))
        # atomic commit of the new link state, then routing recompute
        self.epoch[x] += 1
        self.routes[x] = self._bfs(x)
        if self.topo is not None:
            self.topo.set_belief(self.observer_name(x), lid, state, t)
        if not up:
            for tri in self.triangles:
                if lid in tri.links and x in tri.nodes:
                    down = [l2 for l2 in tri.links if not self.belief[x][l2]]
                    if len(down) >= 2:
                        self._escalation(t, x, tri, f"links {', '.join(down)} down")

    def _escalate(self, x: str, nodes, reason: str) -> None:
        key = frozenset(nodes)
        for tri in self.triangles:
            if frozenset(tri.nodes) == key:
                self._escalation(self.sim.now, x, tri, reason)
                return

    def _escalation(self, t: int, x: str, tri: Triangle, reason: str) -> None:
        log.info("triangle %s degraded at %d (%s)", tri.nodes, t, reason)
        self.escalations.append(Escalation(t, x, tri, reason))

    # -- routing -----------------------------------------------------------
    def _bfs(self, src: str) -> dict[str, str]:
        """Next hop from ``src`` to every reachable node over believed-up links."""
        up = self.belief[src]
        nxt: dict[str, str] = {}
        seen = {src}
        q = deque()
        for n in sorted(self.adj[src]):
            if up[self.adj[src][n]]:
                seen.add(n)
                nxt[n] = n
                q.append(n)
        while q:
            u = q.popleft()
            for v in sorted(self.adj[u]):
                if v not in seen and up[self.adj[u][v]]:
                    seen.add(v)
                    nxt[v] = nxt[u]
                    q.append(v)
        return nxt

    def route(self, src: str, dst: str) -> list[str] | None:
        """Path ``src .. dst`` following ``src``'s believed graph, or None."""
        if src == dst:
            return [src]
        up = self.belief[src]
        prev = {src: None}
        q = deque([src])
        while q:
            u = q.popleft()
            for v in sorted(self.adj[u]):
                if v not in prev and up[self.adj[u][v]]:
                    prev[v] = u
                    if v == dst:
                        path = [v]
                        while prev[path[-1]] is not None:
                            path.append(prev[path[-1]])
                        return path[::-1]
                    q.append(v)
        return None

    def link_between(self, x: str, y: str) -> OaeLink:
        try:
            return self.links[self.adj[x][y]]
        except KeyError:
            raise TopologyError(f"no OAE link between {x} and {y}") from None

    def believes_up(self, node: str, link_id: str) -> bool:
        return self.belief[node][link_id]

    def members_of(self, link_id: str) -> set[str]:
        """Nodes expected to learn about ``link_id``: triangle members or endpoints."""
        members = set()
        for tri in self.triangles:
            if link_id in tri.links:
                members.update(tri.nodes)
        if not members:
            link = self.links[link_id]
            members = {link.a, link.b}
        return members

    def convergence_after(self, link_id: str, t_fail: int, state: str = DOWN) -> int | None:
        """First time after ``t_fail`` at which every member holds ``state``."""
        members = self.members_of(link_id)
        holding: dict[str, int] = {}
        for ch in self.changes:
            if ch.link != link_id or ch.node not in members or ch.t < t_fail:
                continue
            if ch.state == state:
                holding.setdefault(ch.node, ch.t)
                if len(holding) == len(members):
                    return max(holding.values())
            else:
                holding.pop(ch.node, None)
        return None

    def converged_at(self, link_id: str, state: str = DOWN) -> int | None:
        return self.convergence_after(link_id, 0, state)

def triangle_fabric(sim: Simulator, delay: int, slice_time: int, nodes=("A", "B", "C"),
                    topo: TopologyPair | None = None, phase: int = 0,
                    delays: dict[str, int] | None = None) -> OaeFabric:
    """Three nodes joined pairwise; link ids are the two endpoint names joined."""
    a, b, c = nodes
    links = []
    for x, y in ((a, b), (b, c), (a, c)):
        lid = f"{x}{y}"
        links.append(OaeLink(lid, x, y, (delays or {}).get(lid, delay), slice_time))
    return OaeFabric(sim, links, topo=topo, phase=phase)


def rlfd_convergence(delay: int, slice_time: int, t0: int, seed: int = 0,
                     link_id: str = "AB") -> int | None:
    """Fail ``link_id`` of a uniform triangle at ``t0``; return full-triangle convergence."""
    sim = Simulator(seed)
    fab = triangle_fabric(sim, delay, slice_time)
    sim.schedule(t0, fab.fail, link_id, target=link_id, kind="fault:down")
    sim.run_until(t0 + 10 * fab.links[link_id].round_trip)
    return fab.converged_at(link_id)
