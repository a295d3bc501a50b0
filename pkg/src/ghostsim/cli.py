"""Command-line entry point: run, sweep, table1, list-scenarios, validate.

Exit codes: 0 success, 1 configuration error, 2 a run violated one of its
own consistency checks (or the kernel detected a causality violation).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import emit_config, parse_config
from .errors import ConfigError, GhostSimError
from .report import recompute, write_artifacts
from .runner import run_scenario
from .scenarios import SCENARIOS, builtin_raw, list_scenarios
from .table1 import reproduce_table1, table1_rows, write_table1_csv

log = logging.getLogger("ghostsim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
OUT_ENV = "GHOSTSIM_OUT"


class RunCheckFailed(GhostSimError):
    """A finished run's artifacts disagree with its report."""


def output_root() -> Path:
    return Path(os.environ.get(OUT_ENV, "runs"))


def load_raw(ref: str) -> dict:
    """A built-in scenario name or a path to a JSON scenario file."""
    if ref in SCENARIOS:
        return builtin_raw(ref)
    path = Path(ref)
    if not path.exists():
        raise ConfigError(f"{ref!r} is neither a built-in scenario nor a file")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{ref}: invalid JSON ({exc})") from None


def set_path(raw: dict, dotted: str, value) -> None:
    """Assign ``value`` at a dotted path such as ``detectors.0.timeout``."""
    keys = dotted.split(".")
    node = raw
    for i, key in enumerate(keys):
        last = i == len(keys) - 1
        if isinstance(node, list):
            try:
                idx = int(key)
                node[idx]
            except (ValueError, IndexError):
                raise ConfigError(f"{dotted}: no list element {key!r}") from None
            if last:
                node[idx] = value
            else:
                node = node[idx]
        elif isinstance(node, dict):
            if last:
                node[key] = value
            else:
                if key not in node:
                    raise ConfigError(f"{dotted}: no key {key!r}")
                node = node[key]
        else:
            raise ConfigError(f"{dotted}: cannot index into a scalar")


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_seeds(text: str) -> list[int]:
    try:
        if ":" in text:
            a, b = text.split(":", 1)
            seeds = list(range(int(a), int(b)))
        else:
            seeds = [int(s) for s in text.split(",") if s]
    except ValueError:
        raise ConfigError(f"--seeds: expected a:b or a comma list, got {text!r}") from None
    if not seeds:
        raise ConfigError(f"--seeds: {text!r} selects no seeds")
    return seeds


def parse_grid(items: list[str]) -> list[tuple[str, list]]:
    grid = []
    for item in items:
        key, sep, values = item.partition("=")
        vals = [parse_value(v) for v in values.split(",") if v.strip()]
        if not sep or not key or not vals:
            raise ConfigError(f"--grid: {item!r} is empty; expected key=v1,v2,...")
        grid.append((key, vals))
    return grid


def execute(raw: dict, outdir: Path, keep_trace: bool = False):
    cfg = parse_config(raw)
    result = run_scenario(cfg, keep_trace=keep_trace)
    write_artifacts(result, outdir)
    checks = recompute(outdir)
    failed = sorted(k for k, ok in checks.items() if not ok)
    if failed:
        raise RunCheckFailed(f"{cfg.name}: report disagrees with artifacts in {failed}")
    w = result.report.get("workload") or {}
    if w.get("type") == "tokens" and not w["count_always_one"]:
        raise RunCheckFailed(f"{cfg.name}: token count diverged from one")
    return result


def flatten(report: dict) -> dict:
    """Scalar report entries under dotted keys; bulky sections are skipped."""
    out = {}

    def walk(prefix: str, node) -> None:
        if isinstance(node, dict):
            for k, v in node.items():
                walk(f"{prefix}.{k}" if prefix else str(k), v)
        elif isinstance(node, (list, tuple)):
            return
        else:
            out[prefix] = node

    for key, value in report.items():
        if key not in ("config", "ghost_distribution", "detectors"):
            walk(key, value)
    return out


def _sweep_point(job: tuple[int, dict, dict, str]) -> dict:
    index, raw, params, outdir = job
    result = execute(raw, Path(outdir))
    return {"point": index, **params, **flatten(result.report)}


# -- verbs -------------------------------------------------------------------
def cmd_run(args) -> int:
    raw = load_raw(args.scenario)
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = parse_config(raw)
    out = Path(args.out) if args.out else output_root() / cfg.name / f"seed-{cfg.seed}"
    result = execute(raw, out, keep_trace=args.trace)
    print(f"{cfg.name} seed={cfg.seed} events={result.report['kernel']['events_processed']} "
          f"-> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = load_raw(args.scenario)
    seeds = parse_seeds(args.seeds) if args.seeds else [base.get("seed", 0)]
    grid = parse_grid(args.grid or [])
    keys = [k for k, _ in grid]
    combos = list(itertools.product(*[v for _, v in grid])) if grid else [()]
    out = Path(args.out) if args.out else output_root() / f"sweep-{base.get('name', 'scenario')}"
    jobs = []
    for combo in combos:
        for seed in seeds:
            raw = json.loads(json.dumps(base))
            raw["seed"] = seed
            params = {"seed": seed}
            for k, v in zip(keys, combo):
                set_path(raw, k, v)
                params[k] = v
            parse_config(raw)  # fail fast before any work starts
            jobs.append((len(jobs), raw, params, str(out / f"point-{len(jobs):04d}")))
    log.info("sweep: %d points, %d jobs", len(jobs), args.jobs)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    lead = ["point", "seed"] + keys
    columns = lead + sorted({c for r in rows for c in r} - set(lead))
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "aggregate.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for r in rows:
            w.writerow({k: (json.dumps(v) if isinstance(v, (list, dict)) else v)
                        for k, v in r.items()})
    print(f"sweep: {len(rows)} points -> {out / 'aggregate.csv'}")
    return EXIT_OK


def cmd_table1(args) -> int:
    results = reproduce_table1(seed=args.seed, min_flaps=args.min_flaps,
                               simulate=not args.analytic)
    out = Path(args.out) if args.out else output_root() / "table1"
    out.mkdir(parents=True, exist_ok=True)
    write_table1_csv(results, out / "table1.csv")
    for row in table1_rows(results):
        sim = "" if row["sim_flap_mean_s"] is None else f" sim={row['sim_flap_mean_s']:.4g}s"
        flag = f"  FLAG: {row['flags']}" if row["flags"] else ""
        print(f"{row['label']}: n={row['n_links']:.3g} hard={row['analytic_hard_s']:.4g}s "
              f"flap={row['analytic_flap_s']:.4g}s{sim}{flag}")
    return EXIT_OK


def cmd_list(args) -> int:
    for name in list_scenarios():
        print(name)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = parse_config(load_raw(args.scenario))
    if args.emit:
        sys.stdout.write(emit_config(cfg))
    else:
        print(f"{cfg.name}: ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ghostsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run one scenario and write its artifacts")
    r.add_argument("scenario", help="built-in name or JSON file")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<name>/seed-<seed>)")
    r.add_argument("--trace", action="store_true", help="also export the event trace")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a seed range and/or parameter grid")
    s.add_argument("scenario")
    s.add_argument("--seeds", help="a:b (half-open) or a comma list")
    s.add_argument("--grid", action="append", metavar="KEY=V1,V2",
                   help="dotted config path and values; repeat for a product grid")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("table1", help="fleet flap and hard-failure arithmetic")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--min-flaps", type=int, default=10_000)
    t.add_argument("--analytic", action="store_true", help="skip the simulated estimates")
    t.add_argument("--out")
    t.set_defaults(func=cmd_table1)

    ls = sub.add_parser("list-scenarios", help="print built-in scenario names")
    ls.set_defaults(func=cmd_list)

    v = sub.add_parser("validate", help="parse and check a scenario")
    v.add_argument("scenario")
    v.add_argument("--emit", action="store_true", help="print the normalised config")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GhostSimError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
