"""Kubernetes node lifecycle: grace period, then pod eviction.

Each worker node ``n`` is modelled by two links from the controller's point
of view: ``ctrl:n`` (can the control plane reach the kubelet) and ``pods:n``
(are the node's pods running). A partition takes ``ctrl:n`` down while the
kubelet keeps ``pods:n`` up, which is exactly the divergence the controller
cannot see.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError
from ..kernel import Simulator
from ..topology import DOWN, UP, TopologyPair
from ..units import S
from .base import ALIVE, DEAD, Detector, DetectorVerdict, HeartbeatSource, VerdictLog

EVICTED = "evicted"
CONTROLLER = "controller"


def status_link(node: str) -> str:
    return f"ctrl:{node}"


def pods_link(node: str) -> str:
    return f"pods:{node}"


@dataclass
class PartitionEpisode:
    node: str
    t_last_heartbeat: int
    t_unreachable: int
    t_evicted: int | None = None
    t_reconnected: int | None = None

    @property
    def t_resolved(self) -> int | None:
        ends = [t for t in (self.t_evicted, self.t_reconnected) if t is not None]
        return min(ends) if ends else None

    def window(self, horizon: int | None = None) -> int | None:
        """Controller-observed ghost window: silence start to eviction or reconnect.

        The controller cannot see the partition instant; its window opens at
        the last heartbeat it received.
        """
        end = self.t_resolved
        if end is None:
            end = horizon
        if end is None:
            return None
        return end - self.t_last_heartbeat


class K8sNodeLifecycle(Detector):
    kind = "k8s-node"

    def __init__(self, sim: Simulator, topo: TopologyPair, node: str,
                 grace: int = 40 * S, eviction: int = 300 * S, heartbeat: int = 10 * S,
                 observer: str = CONTROLLER, log: VerdictLog | None = None,
                 name: str | None = None, phase: int | None = None):
        if grace <= 0 or eviction <= 0 or heartbeat <= 0:
            raise ConfigError("k8s grace, eviction and heartbeat periods must be > 0")
        super().__init__(sim, topo, observer, status_link(node), log, name)
        topo.actual.attr(pods_link(node))
        self.node = node
        self.grace = grace
        self.eviction = eviction
        self.heartbeat = heartbeat
        self.t_last = sim.now
        self.evicted = False
        self.episodes: list[PartitionEpisode] = []
        self._grace_timer = None
        self._evict_timer = None
        self._arm()
        self.source = HeartbeatSource(sim, topo, status_link(node), heartbeat, self._on_status,
                                      phase=phase, name=f"{self.name}:kubelet")

    @property
    def min_silence_threshold(self) -> int:
        return self.grace - self.heartbeat

    def _arm(self) -> None:
        self.sim.cancel(self._grace_timer)
        self._grace_timer = self.sim.schedule(self.t_last + self.grace, self._on_grace,
                                              target=self.subject, kind=f"{self.name}:grace")

    def _on_status(self, t: int) -> None:
        self.t_last = t
        self._arm()
        if self.status == ALIVE:
            return
        self.sim.cancel(self._evict_timer)
        self._evict_timer = None
        ep = self.episodes[-1]
        ep.t_reconnected = t
        self._verdict(ALIVE)
        if self.evicted:
            # kubelet learns its pods were deleted and stops them
            self.topo.set_actual(pods_link(self.node), DOWN, t)
        else:
            self.topo.set_belief(self.observer, pods_link(self.node), UP, t)
        self.evicted = False

    def _on_grace(self) -> None:
        self._grace_timer = None
        t = self.sim.now
        self.episodes.append(PartitionEpisode(self.node, self.t_last, t))
        self._verdict(DEAD)
        self.topo.set_belief(self.observer, pods_link(self.node), DOWN, t)
        self._evict_timer = self.sim.schedule(t + self.eviction, self._on_evict,
                                              target=self.subject, kind=f"{self.name}:evict")

    def _on_evict(self) -> None:
        self._evict_timer = None
        t = self.sim.now
        self.evicted = True
        self.episodes[-1].t_evicted = t
        self.log.append(DetectorVerdict(self.name, self.observer, self.subject, EVICTED, t))

    def restart_pods(self, t: int) -> None:
        """Pods rescheduled back onto the node after it rejoined."""
        self.topo.set_actual(pods_link(self.node), UP, t)
        self.topo.set_belief(self.observer, pods_link(self.node), UP, t)
