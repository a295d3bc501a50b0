from .fabric import (LIVENESS, NOTIFY, REVERT, BeliefChange, Escalation, OaeFabric, Triangle,
                     rlfd_convergence, triangle_fabric)
from .failover import Delivery, SliceStream, failover_latency_penalty
from .link import (CONFIRMED, REVERTED, SLICE_BYTES, Hop, OaeLink, Slice, Transfer, path_legs,
                   path_transfer, pif_transfer, slice_time_for)
from .token import HELD, IN_FLIGHT_FORWARD, IN_FLIGHT_REVERTING, Resolution, Token, TokenLedger

__all__ = [
    "LIVENESS", "NOTIFY", "REVERT", "BeliefChange", "Escalation", "OaeFabric", "Triangle",
    "rlfd_convergence", "triangle_fabric", "Delivery", "SliceStream", "failover_latency_penalty",
    "CONFIRMED", "REVERTED", "SLICE_BYTES", "Hop", "OaeLink", "Slice", "Transfer", "path_legs",
    "path_transfer", "pif_transfer", "slice_time_for", "HELD", "IN_FLIGHT_FORWARD",
    "IN_FLIGHT_REVERTING", "Resolution", "Token", "TokenLedger",
]
