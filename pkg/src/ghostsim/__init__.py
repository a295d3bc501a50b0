"""Discrete-event simulator for topology ghosts under timeout-based and atomic link protocols."""

__version__ = "0.1.0"
