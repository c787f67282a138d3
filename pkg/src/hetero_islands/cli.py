"""Command line front end: seeded experiment batches, persistence, reports.

Subcommands: ``run``, ``report-table``, ``report-quartiles``, ``generate-bpp``,
``validate-config``. Config files are flat INI key=value sections (see
``load_config``). Relative output paths resolve against the
``HETERO_ISLANDS_OUTPUT_ROOT`` environment variable when it is set.
"""

import argparse
import configparser
import csv
import json
import math
import os
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from .core import (
    ConfigError,
    DEFAULT_CATALOG,
    MethodConfig,
    MethodKind,
    PlannerConfig,
)
from .planners import POLICIES
from .problems import (
    BppAdapter,
    BppInstance,
    CoAdapter,
    CoFunction,
    ExternalEvaluator,
    ParamsAdapter,
    TspAdapter,
    VcAdapter,
    generate_bpp_volumes,
    load_instance,
)
from .problems.loaders import write_volume_file
from .runtime import RunResult, VirtualClock, WallClock, run_experiment

ENV_OUTPUT_ROOT = "HETERO_ISLANDS_OUTPUT_ROOT"


@dataclass
class ExperimentConfig:
    label: str
    problem_id: str
    make_adapter: object  # zero-arg factory; adapters with external processes stay per-run
    planner: str
    planner_config: PlannerConfig
    method_config: MethodConfig
    clock: object
    runs: int
    seeds: List[int]
    output: Path


def _parse_kinds(raw: str) -> tuple:
    kinds = []
    for tok in raw.split(","):
        tok = tok.strip().upper()
        if not tok:
            continue
        try:
            kinds.append(MethodKind(tok))
        except ValueError:
            raise ConfigError(f"unknown method kind {tok!r}")
    if not kinds:
        raise ConfigError("empty portfolio")
    return tuple(kinds)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.read(path)

    if "problem" not in parser:
        raise ConfigError("missing [problem] section")
    prob = parser["problem"]
    family = prob.get("family", "").strip().lower()
    base = path.parent

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    if family == "tsp":
        instance_path = resolve(prob.get("instance", ""))
        if not instance_path.is_file():
            raise ConfigError(f"instance file not found: {instance_path}")
        inst = load_instance(instance_path, "tsplib")
        make_adapter = lambda: TspAdapter(inst)
        problem_id = f"tsp:{instance_path.name}"
    elif family == "bpp":
        if prob.get("instance"):
            instance_path = resolve(prob["instance"])
            if not instance_path.is_file():
                raise ConfigError(f"instance file not found: {instance_path}")
            inst = load_instance(instance_path, "bpp")
            problem_id = f"bpp:{instance_path.name}"
        else:
            n = prob.getint("generate_items", fallback=0)
            if n < 1:
                raise ConfigError("bpp needs 'instance' or 'generate_items'")
            gen_seed = prob.getint("generate_seed", fallback=0)
            inst = BppInstance(generate_bpp_volumes(n, gen_seed))
            problem_id = f"bpp:gen{n}:seed{gen_seed}"
        make_adapter = lambda: BppAdapter(inst)
    elif family == "vc":
        instance_path = resolve(prob.get("instance", ""))
        if not instance_path.is_file():
            raise ConfigError(f"instance file not found: {instance_path}")
        inst = load_instance(instance_path, "dimacs")
        make_adapter = lambda: VcAdapter(inst)
        problem_id = f"vc:{instance_path.name}"
    elif family == "co":
        function = prob.get("function", "f14").strip().lower()
        dim = prob.getint("dimension", fallback=10)
        shift_seed = prob.getint("shift_seed", fallback=0)
        if shift_seed:
            x_opt = np.random.default_rng(shift_seed).uniform(-4.0, 4.0, dim)
        else:
            x_opt = None
        de_f = parser.getfloat("methods", "de_f", fallback=1.0) if parser.has_section("methods") else 1.0
        fn = CoFunction(function, dim, x_opt=x_opt)
        make_adapter = lambda: CoAdapter(fn, de_weight=de_f)
        problem_id = f"co:{function}:d{dim}:shift{shift_seed}"
    elif family == "params":
        evaluator_kind = prob.get("evaluator", "surrogate").strip().lower()
        if evaluator_kind == "surrogate":
            make_adapter = lambda: ParamsAdapter()
            problem_id = "params:surrogate"
        elif evaluator_kind == "external":
            command = prob.get("command", "").strip()
            if not command:
                raise ConfigError("external evaluator needs 'command'")
            timeout = prob.getfloat("timeout", fallback=60.0)
            make_adapter = lambda: ParamsAdapter(
                evaluator=ExternalEvaluator(command.split(), timeout=timeout)
            )
            problem_id = f"params:external:{command}"
        else:
            raise ConfigError(f"unknown evaluator {evaluator_kind!r}")
    else:
        raise ConfigError(f"unknown problem family {family!r}")

    catalog = DEFAULT_CATALOG
    exploration = None
    if parser.has_section("portfolio"):
        port = parser["portfolio"]
        if port.get("kinds"):
            catalog = _parse_kinds(port["kinds"])
        if port.get("exploration"):
            exploration = frozenset(_parse_kinds(port["exploration"]))

    plan = parser["planner"] if parser.has_section("planner") else {}
    planner = (plan.get("name", "static") or "static").strip().lower()
    if planner not in POLICIES:
        raise ConfigError(f"unknown planner {planner!r}; choose from {sorted(POLICIES)}")

    run_sec = parser["run"] if parser.has_section("run") else {}
    islands = int(run_sec.get("islands", 16))
    runs = int(run_sec.get("runs", 9))

    planner_config = PlannerConfig(
        iterations=int(plan.get("iterations", 50)),
        islands=islands,
        runs=runs,
        n_init=int(plan.get("n_init", 5)),
        n_protect=int(plan.get("n_protect", 3)),
        n_patience=int(plan.get("n_patience", 3)),
        m_min=int(plan.get("m_min", 3)),
        top_n=int(plan.get("top_n", 10)),
        catalog=catalog,
        exploration_kinds=exploration
        if exploration is not None
        else PlannerConfig.__dataclass_fields__["exploration_kinds"].default,
    )

    method_kwargs = {}
    if parser.has_section("methods"):
        for key, raw in parser["methods"].items():
            if key not in MethodConfig.__dataclass_fields__:
                raise ConfigError(f"unknown method parameter {key!r}")
            anno = MethodConfig.__dataclass_fields__[key].type
            method_kwargs[key] = int(raw) if anno is int else float(raw)
    method_config = MethodConfig(**method_kwargs)

    clock_sec = parser["clock"] if parser.has_section("clock") else {}
    mode = (clock_sec.get("mode", "virtual") or "virtual").strip().lower()
    if mode == "virtual":
        clock = VirtualClock(
            steps_per_iteration=int(clock_sec.get("steps_per_iteration", 5000)),
            steps_per_migration=int(clock_sec.get("steps_per_migration", 500)),
        )
    elif mode == "wall":
        clock = WallClock(
            iteration_seconds=float(clock_sec.get("iteration_seconds", 60.0)),
            migration_seconds=float(clock_sec.get("migration_seconds", 5.0)),
        )
    else:
        raise ConfigError(f"unknown clock mode {mode!r}")

    seeds_raw = run_sec.get("seeds", "")
    if seeds_raw.strip():
        seeds = [int(tok) for tok in seeds_raw.split(",") if tok.strip()]
    else:
        seeds = list(range(1, runs + 1))
    if len(seeds) != runs:
        raise ConfigError(f"seeds list length {len(seeds)} != runs {runs}")

    output = Path(run_sec.get("output", "runs/" + planner))
    if not output.is_absolute():
        root = os.environ.get(ENV_OUTPUT_ROOT)
        output = (Path(root) / output) if root else (Path.cwd() / output)

    label = (run_sec.get("label", "") or planner).strip()
    return ExperimentConfig(
        label=label,
        problem_id=problem_id,
        make_adapter=make_adapter,
        planner=planner,
        planner_config=planner_config,
        method_config=method_config,
        clock=clock,
        runs=runs,
        seeds=seeds,
        output=output,
    )


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _write_run_dir(run_dir: Path, cfg: ExperimentConfig, result: RunResult) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "events.ndjson").write_bytes(result.events_ndjson())
    with open(run_dir / "planner.ndjson", "w") as fh:
        for record in result.planner_records:
            fh.write(json.dumps(record.to_json(), sort_keys=True, separators=(",", ":")) + "\n")
    kinds = [k.value for k in cfg.planner_config.catalog]
    with open(run_dir / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "best"] + kinds)
        for row in result.trace:
            writer.writerow(
                [row["iteration"], _fmt(row["best"])] + [row["kinds"].get(k, 0) for k in kinds]
            )
    payload = {
        "label": cfg.label,
        "planner": result.planner,
        "problem": cfg.problem_id,
        "seed": result.seed,
        "best_objective": result.best_objective,
        "best_genome": result.best_genome_text,
        "total_evaluations": result.total_evaluations,
        "stats": result.stats,
    }
    with open(run_dir / "result.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def _fmt(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")


def cmd_run(config_path, out_override: Optional[str] = None) -> Path:
    cfg = load_config(config_path)
    if out_override:
        cfg.output = Path(out_override)
    cfg.output.mkdir(parents=True, exist_ok=True)
    shutil.copy(config_path, cfg.output / "config.ini")
    rows = []
    failures = 0
    for i, seed in enumerate(cfg.seeds, start=1):
        adapter = cfg.make_adapter()
        try:
            result = run_experiment(
                adapter,
                cfg.planner,
                cfg.planner_config,
                cfg.method_config,
                cfg.clock,
                seed,
            )
        except Exception as exc:  # mid-run failure: flag and continue
            failures += 1
            rows.append({"seed": seed, "status": f"failed: {exc}", "best": None, "dir": None})
            continue
        finally:
            close = getattr(adapter, "close", None)
            if close:
                close()
        run_dir = cfg.output / f"run_{i:02d}"
        _write_run_dir(run_dir, cfg, result)
        rows.append(
            {
                "seed": seed,
                "status": "ok",
                "best": result.best_objective,
                "evaluations": result.total_evaluations,
                "dir": run_dir.name,
            }
        )
        print(f"run {i}/{cfg.runs} seed={seed} best={result.best_objective:.6g}")
    summary = {
        "label": cfg.label,
        "planner": cfg.planner,
        "problem": cfg.problem_id,
        "runs": rows,
        "failures": failures,
    }
    with open(cfg.output / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    with open(cfg.output / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "planner", "problem", "seed", "status", "best", "dir"])
        for row in rows:
            writer.writerow(
                [cfg.label, cfg.planner, cfg.problem_id, row["seed"], row["status"], _fmt(row["best"]), row["dir"]]
            )
    if failures:
        print(f"warning: {failures} run(s) failed; summary flags them", file=sys.stderr)
    return cfg.output


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _read_summary(run_dir: Path) -> dict:
    summary_path = Path(run_dir) / "summary.json"
    if not summary_path.is_file():
        raise ConfigError(f"no summary.json under {run_dir}")
    with open(summary_path) as fh:
        return json.load(fh)


def _finals(summary: dict) -> List[float]:
    return [row["best"] for row in summary["runs"] if row.get("status") == "ok"]


def report_table(run_dirs) -> List[dict]:
    """Per configuration: mean, min, max of final objectives."""
    summaries = [_read_summary(d) for d in run_dirs]
    problems = {s["problem"] for s in summaries}
    if len(problems) > 1:
        raise ConfigError(f"mismatched benchmarks across run dirs: {sorted(problems)}")
    rows = []
    for s in sorted(summaries, key=lambda s: s["label"]):
        finals = _finals(s)
        if not finals:
            raise ConfigError(f"no completed runs for {s['label']}")
        rows.append(
            {
                "label": s["label"],
                "runs": len(finals),
                "mean": sum(finals) / len(finals),
                "min": min(finals),
                "max": max(finals),
            }
        )
    return rows


def nearest_rank_percentile(pool: List[float], pct: float) -> float:
    """Smallest pool value with at least pct percent of the pool at or below it."""
    if not pool:
        raise ConfigError("empty objective pool")
    ordered = sorted(pool)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


def report_quartiles(run_dirs, planners: Optional[List[str]] = None) -> dict:
    """Count, per configuration, how many runs landed in the pooled lowest
    quartile (nearest-rank percentile over all configurations together)."""
    summaries = [_read_summary(d) for d in run_dirs]
    problems = {s["problem"] for s in summaries}
    if len(problems) > 1:
        raise ConfigError(f"mismatched benchmarks across run dirs: {sorted(problems)}")
    pool = [v for s in summaries for v in _finals(s)]
    threshold = nearest_rank_percentile(pool, 25.0)
    rows = []
    for s in sorted(summaries, key=lambda s: s["label"]):
        if planners and s["label"] not in planners:
            continue
        finals = _finals(s)
        rows.append(
            {
                "label": s["label"],
                "runs": len(finals),
                "top": sum(1 for v in finals if v <= threshold),
            }
        )
    return {"threshold": threshold, "pool_size": len(pool), "rows": rows}


def _print_table(rows, columns) -> None:
    widths = {c: max(len(c), *(len(str(_cell(r, c))) for r in rows)) for c in columns}
    print("  ".join(c.ljust(widths[c]) for c in columns))
    for r in rows:
        print("  ".join(str(_cell(r, c)).ljust(widths[c]) for c in columns))


def _cell(row, column):
    v = row[column]
    if isinstance(v, float):
        return format(v, ".6g")
    return v


# ---------------------------------------------------------------------------
# argparse wiring
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetero-islands",
        description="Heterogeneous island-model optimization with replacement planners.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the seeded experiment batch in a config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="override the output directory")

    p_table = sub.add_parser("report-table", help="mean/min/max of final objectives per configuration")
    p_table.add_argument("run_dirs", nargs="+")
    p_table.add_argument("--csv", help="also write the table as CSV")

    p_quart = sub.add_parser(
        "report-quartiles", help="count runs in the pooled lowest quartile per configuration"
    )
    p_quart.add_argument("run_dirs", nargs="+")
    p_quart.add_argument("--planners", help="comma-separated configuration labels to include")
    p_quart.add_argument("--csv", help="also write the counts as CSV")

    p_gen = sub.add_parser("generate-bpp", help="write a reproducible random volume list")
    p_gen.add_argument("items", type=int)
    p_gen.add_argument("seed", type=int)
    p_gen.add_argument("out")

    p_val = sub.add_parser("validate-config", help="check a config file and exit")
    p_val.add_argument("config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            out = cmd_run(args.config, args.out)
            print(f"results in {out}")
        elif args.command == "report-table":
            rows = report_table(args.run_dirs)
            print("final objective per configuration (mean with min/max over runs)")
            _print_table(rows, ["label", "runs", "mean", "min", "max"])
            if args.csv:
                with open(args.csv, "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["label", "runs", "mean", "min", "max"])
                    for r in rows:
                        writer.writerow([r["label"], r["runs"], _fmt(r["mean"]), _fmt(r["min"]), _fmt(r["max"])])
        elif args.command == "report-quartiles":
            planners = [p.strip() for p in args.planners.split(",")] if args.planners else None
            report = report_quartiles(args.run_dirs, planners)
            print(
                f"pooled lowest quartile threshold (nearest-rank 25th percentile of "
                f"{report['pool_size']} runs): {report['threshold']:.6g}"
            )
            _print_table(report["rows"], ["label", "runs", "top"])
            if args.csv:
                with open(args.csv, "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["label", "runs", "top"])
                    for r in report["rows"]:
                        writer.writerow([r["label"], r["runs"], r["top"]])
        elif args.command == "generate-bpp":
            volumes = generate_bpp_volumes(args.items, args.seed)
            write_volume_file(args.out, volumes)
            print(f"wrote {args.items} volumes to {args.out}")
        elif args.command == "validate-config":
            cfg = load_config(args.config)
            print(f"ok: {cfg.label} ({cfg.problem_id}, planner={cfg.planner}, runs={cfg.runs})")
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
