"""Run artifacts on disk, and an independent recomputation from them.

``report.json`` holds only values derived from the seeded run (no wall
clock, sorted keys) so that two runs with one seed are byte-identical.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from pathlib import Path

from .faults import write_fault_csv
from .runner import RunResult, ghost_distributions
from .topology import (GHOST_KINDS, STALE_DOWN, GhostRecord, read_ghost_csv, write_ghost_csv,
                       write_log_csv)
from .detectors import write_verdict_csv


def _default(obj):
    from fractions import Fraction
    if isinstance(obj, Fraction):
        return str(obj)
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=_default) + "\n"


def write_table(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def write_artifacts(result: RunResult, outdir: str | Path) -> list[Path]:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def target(name: str) -> Path:
        p = out / name
        written.append(p)
        return p

    target("report.json").write_text(dumps_report(result.report))
    if result.topo is not None:
        write_ghost_csv(result.topo.records, target("ghosts.csv"))
        write_verdict_csv(result.verdicts, target("verdicts.csv"))
        write_fault_csv(result.faults, target("faults.csv"))
        write_log_csv(result.topo.log, target("topology_log.csv"))
    if result.trace:
        write_table(target("trace.csv"), ("fire_at", "seq", "target", "kind"), result.trace)
    for name, (cols, rows) in sorted(result.tables.items()):
        write_table(target(f"{name}.csv"), cols, rows)
    return written


# -- independent checker -----------------------------------------------------
def _stats_from_records(records: list[GhostRecord], horizon: int, observers) -> dict:
    out = {}
    for name in observers:
        out[name] = {"total_ghost_time": 0, "max_ghost_duration": 0,
                     "count_by_kind": {k: 0 for k in GHOST_KINDS},
                     "max_by_kind": {k: 0 for k in GHOST_KINDS}, "false_positive_count": 0}
    for r in records:
        d = max((r.t_end if r.t_end is not None else horizon) - r.t_start, 0)
        s = out[r.observer]
        s["total_ghost_time"] += d
        s["max_ghost_duration"] = max(s["max_ghost_duration"], d)
        s["count_by_kind"][r.kind] += 1
        s["max_by_kind"][r.kind] = max(s["max_by_kind"][r.kind], d)
        s["false_positive_count"] += r.kind == STALE_DOWN
    return out


def recompute(outdir: str | Path) -> dict[str, bool]:
    """Re-derive report figures from the CSV artifacts; one flag per section."""
    out = Path(outdir)
    report = json.loads((out / "report.json").read_text())
    checks: dict[str, bool] = {}
    horizon = report["horizon"]
    if "ghosts" in report:
        records = read_ghost_csv(out / "ghosts.csv")
        checks["ghosts"] = _stats_from_records(records, horizon, report["ghosts"]) == report["ghosts"]
        checks["ghost_distribution"] = json.loads(json.dumps(
            ghost_distributions(records, horizon))) == report["ghost_distribution"]
        with open(out / "verdicts.csv", newline="") as fh:
            counts: dict[str, Counter] = {}
            for row in csv.DictReader(fh):
                counts.setdefault(row["detector"], Counter())[row["status"]] += 1
        checks["verdicts"] = {k: dict(v) for k, v in counts.items()} == report["verdicts"]
        with open(out / "faults.csv", newline="") as fh:
            kinds = Counter(row["kind"] for row in csv.DictReader(fh))
        checks["faults"] = dict(kinds) == report["faults"]["by_kind"]
    w = report.get("workload")
    if w is not None and w["type"] == "retry-storm":
        with open(out / "workload.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        good = [int(r["goodput"]) for r in rows]
        eff = [int(r["effective"]) for r in rows]
        end = max((t["end"] for t in report["config"]["workload"]["triggers"]), default=0)
        post = good[end // 10**12:]
        nominal = w["nominal"]
        checks["workload"] = (
            sum(good) == w["total_goodput"]
            and max(eff) == w["peak_effective"]
            and sum(g < 0.5 * nominal for g in post) == w["post_trigger_bins_below_half"]
            and sum(g < 0.5 * nominal for g in good) * 10**12 == w["degraded_dwell"])
    if "oae" in report:
        with open(out / "oae_beliefs.csv", newline="") as fh:
            n = sum(1 for _ in csv.DictReader(fh))
        checks["oae"] = n == report["oae"]["belief_changes"]
    return checks
