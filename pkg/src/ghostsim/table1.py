"""Fleet-scale flap and hard-failure arithmetic for growing optic counts.

Independent links superpose: a fleet of ``n`` links with per-link mean time
``T`` sees an event every ``T / n`` on average. Each row is checked against
the figures it states by solving for the link count those figures imply.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .faults import fleet_inter_arrival_mean, sample_fleet_flap_times
from .kernel import RngStream
from .units import S, parse_duration

HOUR_S = 3600.0


@dataclass(frozen=True)
class FleetRow:
    label: str
    n_links: float
    optics_lower_bound: float
    stated_hard: str | None = None
    stated_flap: str | None = None
    hard_mtbf: str = "1e7h"
    flap_mttf: str = "3e5h"


DEFAULT_ROWS = (
    FleetRow("2023", 1e5, 1e5, "4d", "3h"),
    FleetRow("2024", 1e6, 1e6, "7d", "12min"),
    FleetRow("2025", 2.25e7, 1e7, "30min", "48s"),
)


@dataclass
class FleetResult:
    label: str
    n_links: float
    analytic_hard_s: float
    analytic_flap_s: float
    stated_hard_s: float | None
    stated_flap_s: float | None
    implied_n_hard: float | None
    implied_n_flap: float | None
    sim_flaps: int = 0
    sim_flap_mean_s: float | None = None
    sim_flap_ci_s: tuple[float, float] | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return not self.flags

    def sim_relative_error(self) -> float | None:
        if self.sim_flap_mean_s is None:
            return None
        return abs(self.sim_flap_mean_s - self.analytic_flap_s) / self.analytic_flap_s


def _seconds(text: str | None) -> float | None:
    return None if text is None else parse_duration(text) / S


def check_row(row: FleetRow, tolerance: float = 0.25) -> FleetResult:
    """Analytic fleet means plus consistency flags for the stated figures.

    A row is flagged when a stated figure implies fewer optics than the row's
    own lower bound, or when the hard and flap figures imply link counts
    that differ by more than ``tolerance`` (relative).
    """
    if row.n_links < 1:
        raise ConfigError(f"row {row.label}: n_links must be >= 1")
    mtbf = _seconds(row.hard_mtbf)
    mttf = _seconds(row.flap_mttf)
    hard_s = _seconds(row.stated_hard)
    flap_s = _seconds(row.stated_flap)
    res = FleetResult(
        row.label, row.n_links,
        fleet_inter_arrival_mean(row.n_links, mtbf), fleet_inter_arrival_mean(row.n_links, mttf),
        hard_s, flap_s,
        mtbf / hard_s if hard_s else None, mttf / flap_s if flap_s else None)
    for name, n in (("hard", res.implied_n_hard), ("flap", res.implied_n_flap)):
        if n is not None and n < row.optics_lower_bound * (1 - 1e-9):
            res.flags.append(f"stated {name} figure implies {n:.3g} optics, "
                             f"below the row's {row.optics_lower_bound:.3g}")
    if res.implied_n_hard and res.implied_n_flap:
        lo, hi = sorted((res.implied_n_hard, res.implied_n_flap))
        if hi / lo - 1 > tolerance:
            res.flags.append(f"hard and flap figures imply {res.implied_n_hard:.3g} "
                             f"vs {res.implied_n_flap:.3g} optics")
    return res


def simulate_flap_interval(n_links: float, flap_mttf_s: float, rng: RngStream,
                           min_flaps: int = 10_000) -> tuple[int, float, tuple[float, float]]:
    """Empirical mean fleet flap gap over a horizon long enough for ``min_flaps``.

    Returns ``(flaps, mean gap, 95% interval)``; the interval uses the
    exponential-gap standard error ``mean / sqrt(flaps)``.
    """
    expected_gap = flap_mttf_s / n_links
    horizon = expected_gap * min_flaps * 1.1
    times = sample_fleet_flap_times(int(round(n_links)), flap_mttf_s, horizon, rng)
    while times.size < min_flaps + 1:
        horizon *= 1.5
        times = sample_fleet_flap_times(int(round(n_links)), flap_mttf_s, horizon, rng)
    gaps = np.diff(times)
    mean = float(gaps.mean())
    half = 1.96 * mean / math.sqrt(gaps.size)
    return int(times.size), mean, (mean - half, mean + half)


def reproduce_table1(rows=DEFAULT_ROWS, seed: int = 0, min_flaps: int = 10_000,
                     simulate: bool = True) -> list[FleetResult]:
    out = []
    for row in rows:
        res = check_row(row)
        if simulate:
            rng = RngStream(seed, f"table1:{row.label}")
            res.sim_flaps, res.sim_flap_mean_s, res.sim_flap_ci_s = simulate_flap_interval(
                row.n_links, _seconds(row.flap_mttf), rng, min_flaps)
        out.append(res)
    return out


TABLE1_COLUMNS = ("label", "n_links", "analytic_hard_s", "analytic_flap_s", "stated_hard_s",
                  "stated_flap_s", "implied_n_hard", "implied_n_flap", "sim_flaps",
                  "sim_flap_mean_s", "sim_flap_ci_low_s", "sim_flap_ci_high_s", "flags")


def table1_rows(results: list[FleetResult]) -> list[dict]:
    rows = []
    for r in results:
        d = asdict(r)
        ci = d.pop("sim_flap_ci_s") or (None, None)
        d["sim_flap_ci_low_s"], d["sim_flap_ci_high_s"] = ci
        d["flags"] = "; ".join(r.flags)
        rows.append({k: d[k] for k in TABLE1_COLUMNS})
    return rows


def write_table1_csv(results: list[FleetResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TABLE1_COLUMNS)
        w.writeheader()
        for row in table1_rows(results):
            w.writerow({k: "" if v is None else (repr(v) if isinstance(v, float) else v)
                        for k, v in row.items()})
