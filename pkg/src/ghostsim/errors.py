class GhostSimError(Exception):
    """Base class for simulator errors."""


class ConfigError(GhostSimError):
    """Invalid scenario configuration or invalid operation arguments."""


class CausalityError(GhostSimError):
    """An event was scheduled before the current simulation clock."""


class TopologyError(GhostSimError):
    """Reference to an unknown node, link or observer."""


class FaultError(GhostSimError):
    """A fault could not be injected in the current link state."""
