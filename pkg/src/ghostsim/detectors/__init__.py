from .base import (ALIVE, DEAD, DEGRADED, SUSPECT, Detector, DetectorVerdict, HeartbeatSource,
                   VerdictLog, write_verdict_csv)
from .bfd import BfdDetector, BfdSession, bfd_step
from .fixed import FixedTimeoutDetector
from .k8s import CONTROLLER, EVICTED, K8sNodeLifecycle, PartitionEpisode, pods_link, status_link
from .phi import EXPONENTIAL, NORMAL, HeartbeatHistory, PhiAccrualDetector, crossing_delay, phi
from .polling import StatusPollingDetector
from .swim import SwimGroup, membership_graph, node_link

__all__ = [
    "ALIVE", "DEAD", "DEGRADED", "SUSPECT", "EVICTED", "CONTROLLER", "EXPONENTIAL", "NORMAL",
    "Detector", "DetectorVerdict", "HeartbeatSource", "VerdictLog", "write_verdict_csv",
    "BfdDetector", "BfdSession", "bfd_step", "FixedTimeoutDetector", "K8sNodeLifecycle",
    "PartitionEpisode", "pods_link", "status_link", "HeartbeatHistory", "PhiAccrualDetector",
    "crossing_delay", "phi", "StatusPollingDetector", "SwimGroup", "membership_graph", "node_link",
]
