#!/usr/bin/env python3
"""Run every method kind as a homogeneous island portfolio on one problem and
print the final objectives next to the heterogeneous static portfolio.

Example:

    python scripts/homogeneous_baselines.py --function f08 --runs 3
"""

import argparse
import statistics
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from hetero_islands.core import DEFAULT_CATALOG, MethodConfig, PlannerConfig
from hetero_islands.problems import CoAdapter, CoFunction, TspAdapter, load_instance
from hetero_islands.runtime import VirtualClock, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--problem", choices=("tsp", "co"), default="co")
    parser.add_argument("--instance", help="coordinate file for tsp")
    parser.add_argument("--function", default="f14", choices=("f04", "f08", "f14", "f17"))
    parser.add_argument("--dimension", type=int, default=10)
    parser.add_argument("--islands", type=int, default=16)
    parser.add_argument("--iterations", type=int, default=25)
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--migration", type=int, default=200)
    parser.add_argument("--runs", type=int, default=5)
    args = parser.parse_args()

    if args.problem == "tsp":
        if not args.instance:
            parser.error("--instance is required for tsp")
        inst = load_instance(args.instance, "tsplib")
        make_adapter = lambda: TspAdapter(inst)
    else:
        fn = CoFunction(args.function, args.dimension)
        make_adapter = lambda: CoAdapter(fn)

    clock = VirtualClock(args.steps, args.migration)
    portfolios = {"het-static": DEFAULT_CATALOG}
    portfolios.update({f"hom-{kind.value}": (kind,) for kind in DEFAULT_CATALOG})

    print(f"{'portfolio':<12} {'median':>14} {'min':>14} {'max':>14}")
    for label, catalog in portfolios.items():
        config = PlannerConfig(
            iterations=args.iterations,
            islands=args.islands,
            catalog=catalog,
            m_min=min(3, len(catalog)),
        )
        finals = []
        for seed in range(1, args.runs + 1):
            result = run_experiment(make_adapter(), "static", config, MethodConfig(), clock, seed)
            finals.append(result.best_objective)
        print(
            f"{label:<12} {statistics.median(finals):>14.6g} {min(finals):>14.6g} {max(finals):>14.6g}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
