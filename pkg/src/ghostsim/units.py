"""Integer time units and duration parsing.

Simulation time is an integer count of picoseconds. OAE slice times such as
51.2 ns need sub-nanosecond resolution, while fleet fault models run for
thousands of hours; Python integers cover both without rounding drift.
"""

from __future__ import annotations

import re
from fractions import Fraction

PS = 1
NS = 1_000
US = 1_000_000
MS = 1_000_000_000
S = 1_000_000_000_000
MIN = 60 * S
H = 3600 * S
DAY = 24 * H

_UNITS = {
    "ps": PS,
    "ns": NS,
    "us": US,
    "µs": US,
    "ms": MS,
    "s": S,
    "min": MIN,
    "m": MIN,
    "h": H,
    "d": DAY,
}

_DURATION_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([a-zµ]+)\s*$")


def parse_duration(value: int | float | str) -> int:
    """Convert ``"50ms"``, ``"51.2ns"``, ``"3e5h"`` or a bare tick count to ticks.

    Bare numbers are taken as picosecond ticks and must be integral.
    """
    if isinstance(value, bool):
        raise ValueError(f"not a duration: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"bare durations are integer ticks, got {value!r}")
        return int(value)
    m = _DURATION_RE.match(value)
    if m is None:
        if value.strip().lstrip("-").isdigit():
            return int(value)
        raise ValueError(f"cannot parse duration {value!r}")
    number, unit = m.groups()
    if unit not in _UNITS:
        raise ValueError(f"unknown time unit {unit!r} in {value!r}")
    ticks = Fraction(number) * _UNITS[unit]
    return round(ticks)


def to_seconds(ticks: int | float) -> float:
    return ticks / S


def seconds(x: float) -> int:
    return round(x * S)


def format_duration(ticks: int) -> str:
    """Human-readable rendering with the largest unit that keeps a short mantissa."""
    for name, size in (("h", H), ("s", S), ("ms", MS), ("us", US), ("ns", NS)):
        if abs(ticks) >= size:
            return f"{ticks / size:.6g}{name}"
    return f"{ticks}ps"
