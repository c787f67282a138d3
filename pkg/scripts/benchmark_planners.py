#!/usr/bin/env python3
"""Compare every replacement planner on one benchmark problem.

Runs each planner for the configured number of seeded repetitions, persists
the per-run artifacts under the output root, and prints both report tables
(mean/min/max per planner, and the pooled lowest-quartile counts).

Example:

    python scripts/benchmark_planners.py --problem tsp --instance tests/data/tsp50.tsp \\
        --runs 5 --iterations 25 --steps 2000 --migration 200 --out runs/tsp50
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hetero_islands.cli import _print_table, _write_run_dir, report_quartiles, report_table
from hetero_islands.cli import ExperimentConfig
from hetero_islands.core import MethodConfig, PlannerConfig
from hetero_islands.planners import POLICIES
from hetero_islands.problems import (
    BppAdapter,
    BppInstance,
    CoAdapter,
    CoFunction,
    TspAdapter,
    VcAdapter,
    generate_bpp_volumes,
    load_instance,
)
from hetero_islands.runtime import VirtualClock, run_experiment

import json


def build_adapter(args):
    if args.problem == "tsp":
        return lambda: TspAdapter(load_instance(args.instance, "tsplib")), f"tsp:{Path(args.instance).name}"
    if args.problem == "vc":
        return lambda: VcAdapter(load_instance(args.instance, "dimacs")), f"vc:{Path(args.instance).name}"
    if args.problem == "bpp":
        if args.instance:
            return lambda: BppAdapter(load_instance(args.instance, "bpp")), f"bpp:{Path(args.instance).name}"
        inst = BppInstance(generate_bpp_volumes(args.items, 0))
        return lambda: BppAdapter(inst), f"bpp:gen{args.items}"
    fn = CoFunction(args.function, args.dimension)
    return lambda: CoAdapter(fn), f"co:{args.function}:d{args.dimension}"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--problem", choices=("tsp", "bpp", "co", "vc"), default="co")
    parser.add_argument("--instance", help="instance file for tsp/vc/bpp")
    parser.add_argument("--items", type=int, default=1000, help="generated item count for bpp")
    parser.add_argument("--function", default="f14", choices=("f04", "f08", "f14", "f17"))
    parser.add_argument("--dimension", type=int, default=10)
    parser.add_argument("--islands", type=int, default=16)
    parser.add_argument("--iterations", type=int, default=25)
    parser.add_argument("--steps", type=int, default=2000, help="virtual steps per planning iteration")
    parser.add_argument("--migration", type=int, default=200, help="virtual steps per migration round")
    parser.add_argument("--runs", type=int, default=5)
    parser.add_argument("--planners", default=",".join(sorted(POLICIES)))
    parser.add_argument("--out", default="runs/planner-benchmark")
    args = parser.parse_args()

    make_adapter, problem_id = build_adapter(args)
    clock = VirtualClock(args.steps, args.migration)
    out_root = Path(args.out)
    planners = [p.strip() for p in args.planners.split(",") if p.strip()]
    run_dirs = []
    for planner in planners:
        planner_config = PlannerConfig(iterations=args.iterations, islands=args.islands, runs=args.runs)
        out_dir = out_root / planner
        out_dir.mkdir(parents=True, exist_ok=True)
        cfg = ExperimentConfig(
            label=planner,
            problem_id=problem_id,
            make_adapter=make_adapter,
            planner=planner,
            planner_config=planner_config,
            method_config=MethodConfig(),
            clock=clock,
            runs=args.runs,
            seeds=list(range(1, args.runs + 1)),
            output=out_dir,
        )
        rows = []
        for i, seed in enumerate(cfg.seeds, start=1):
            result = run_experiment(
                make_adapter(), planner, planner_config, MethodConfig(), clock, seed
            )
            run_dir = out_dir / f"run_{i:02d}"
            _write_run_dir(run_dir, cfg, result)
            rows.append({"seed": seed, "status": "ok", "best": result.best_objective, "dir": run_dir.name})
            print(f"{planner} seed={seed} best={result.best_objective:.6g}")
        (out_dir / "summary.json").write_text(
            json.dumps({"label": planner, "planner": planner, "problem": problem_id, "runs": rows}, indent=2)
        )
        run_dirs.append(out_dir)

    print("\nfinal objectives per planner")
    _print_table(report_table(run_dirs), ["label", "runs", "mean", "min", "max"])
    report = report_quartiles(run_dirs)
    print(f"\npooled lowest-quartile threshold: {report['threshold']:.6g}")
    _print_table(report["rows"], ["label", "runs", "top"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
