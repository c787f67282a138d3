"""End-to-end acceptance suite.

Each test is one criterion, prints a single [PASS]/[FAIL] line (run pytest
with -s to stream them), and enforces its stated tolerance and runtime
budget. The heavy portfolio-comparison criteria distribute their independent
seeded runs over a process pool when more than one CPU is available.
"""

import functools
import os
import time
from concurrent.futures import ProcessPoolExecutor

import pytest

from hetero_islands.core import (
    DEFAULT_CATALOG,
    MethodConfig,
    MethodInstanceId,
    MethodKind,
    PlannerConfig,
    Rng,
    sequence_counter,
    validate_genome,
)
from hetero_islands.methods import method_init, method_step
from hetero_islands.planners import FeatureLedger, POLICIES
from hetero_islands.problems import (
    BppAdapter,
    BppInstance,
    CoAdapter,
    CoFunction,
    ParamsAdapter,
    TspAdapter,
    VcAdapter,
    VcInstance,
)
from hetero_islands.problems.loaders import load_tsplib, load_volumes
from hetero_islands.problems.permutations import sorted_pairs_ternary
from hetero_islands.core import Permutation
from hetero_islands.runtime import VirtualClock, run_experiment

from conftest import DATA
from oracles import bpp_optimum, ternary_reference, tsp_optimum

K = MethodKind
SEEDS = [1, 2, 3, 4, 5]
HEAVY_CLOCK = VirtualClock(steps_per_iteration=2000, steps_per_migration=200)
HEAVY_ITERATIONS = 25


def criterion(name, budget=None):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            t0 = time.monotonic()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\n[FAIL] {name} after {time.monotonic() - t0:.1f}s")
                raise
            elapsed = time.monotonic() - t0
            if budget is not None and elapsed >= budget:
                print(f"\n[FAIL] {name}: runtime {elapsed:.1f}s over the {budget:.0f}s budget")
                pytest.fail(f"{name}: runtime {elapsed:.1f}s exceeds budget {budget:.0f}s")
            print(f"\n[PASS] {name} in {elapsed:.1f}s")

        return wrapper

    return deco


# ---------------------------------------------------------------------------
# helpers shared by the heavy criteria (must be importable for process pools)
# ---------------------------------------------------------------------------


def _adapter(problem: str):
    if problem == "tsp50":
        return TspAdapter(load_tsplib(DATA / "tsp50.tsp"))
    if problem == "f14":
        return CoAdapter(CoFunction("f14", 10))
    if problem == "f08":
        return CoAdapter(CoFunction("f08", 10))
    raise ValueError(problem)


def final_objective(problem: str, catalog_names, seed: int) -> float:
    catalog = tuple(MethodKind(n) for n in catalog_names)
    config = PlannerConfig(
        iterations=HEAVY_ITERATIONS,
        islands=16,
        catalog=catalog,
        m_min=min(3, len(catalog)),
    )
    result = run_experiment(_adapter(problem), "static", config, MethodConfig(), HEAVY_CLOCK, seed)
    return result.best_objective


def run_portfolio_grid(problem: str, catalogs: dict) -> dict:
    """Median final objective per labeled catalog over the shared seeds."""
    jobs = [(label, names, seed) for label, names in catalogs.items() for seed in SEEDS]
    results: dict = {label: [] for label in catalogs}
    workers = min(os.cpu_count() or 1, len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                (label, pool.submit(final_objective, problem, names, seed))
                for label, names, seed in jobs
            ]
            for label, fut in futures:
                results[label].append(fut.result())
    else:
        for label, names, seed in jobs:
            results[label].append(final_objective(problem, names, seed))
    return {label: sorted(vals)[len(vals) // 2] for label, vals in results.items()}


def _catalog_grid():
    grid = {"het": [k.value for k in DEFAULT_CATALOG]}
    for kind in DEFAULT_CATALOG:
        grid[f"hom-{kind.value}"] = [kind.value]
    return grid


# ---------------------------------------------------------------------------
# 1. operator closure
# ---------------------------------------------------------------------------


def _closure_adapters():
    rng = Rng("closure-instances")
    tsp = TspAdapter(
        __import__("hetero_islands.problems.tsp", fromlist=["TspInstance"]).TspInstance.from_coords(
            [(rng.py.uniform(0, 100), rng.py.uniform(0, 100)) for _ in range(10)]
        )
    )
    bpp = BppAdapter(BppInstance([rng.py.uniform(0.05, 0.95) for _ in range(20)]))
    co = CoAdapter(CoFunction("f17", 6))
    edges = set()
    while len(edges) < 60:
        u, v = rng.py.randrange(30), rng.py.randrange(30)
        if u != v:
            edges.add((min(u, v), max(u, v)))
    vc = VcAdapter(VcInstance(30, sorted(edges)))
    params = ParamsAdapter()
    return [tsp, bpp, co, vc, params]


@criterion("operator closure: 10^4 applications per operator stay valid", budget=60)
def test_criterion_operator_closure():
    n = 10_000
    for adapter in _closure_adapters():
        rng = Rng(f"closure-{adapter.name}")
        spec = adapter.genome_spec
        op_state = adapter.make_op_state()
        pool = [adapter.random_solution(rng) for _ in range(8)]
        for g in pool:
            assert validate_genome(g, spec) is None

        def check(genome):
            violation = validate_genome(genome, spec)
            assert violation is None, f"{adapter.name}: {violation}"
            return genome

        for i in range(n):
            pool[i % 8] = check(adapter.random_solution(rng))
        cursor = adapter.initial_cursor()
        for _ in range(n):
            nxt = adapter.next_solution(cursor)
            if nxt is None:
                cursor = adapter.initial_cursor()
                continue
            genome, cursor = nxt
            check(genome)
        for i in range(n):
            pool[i % 8] = check(adapter.unary(pool[i % 8], rng, op_state))
        for i in range(n):
            pool[i % 8] = check(adapter.mutation(pool[i % 8], rng, op_state))
        for i in range(n):
            pool[i % 8] = check(adapter.binary(pool[i % 8], pool[(i + 1) % 8], rng))
        for i in range(n):
            pool[i % 8] = check(
                adapter.ternary(pool[i % 8], pool[(i + 1) % 8], pool[(i + 3) % 8], rng)
            )


# ---------------------------------------------------------------------------
# 2. oracle equivalence
# ---------------------------------------------------------------------------


@criterion("oracle equivalence: exhaustive search optima recovered", budget=120)
def test_criterion_oracle_equivalence():
    # systematic enumeration to exhaustion on both 7-city instances
    for name in ("tsp7.tsp", "tsp7b.tsp"):
        inst = load_tsplib(DATA / name)
        adapter = TspAdapter(inst)
        rng = Rng(f"bf-{name}")
        state = method_init(K.BF, MethodConfig(), adapter, rng, MethodInstanceId(0, 0), sequence_counter())
        while not state.finished:
            method_step(state, adapter, rng)
        assert state.best_own.objective == tsp_optimum(inst.dist.tolist()), name

    # evolutionary search against the exhaustive packing optimum
    for name in ("bpp4.txt", "bpp6.txt", "bpp7.txt"):
        inst = load_volumes(DATA / name)
        optimum = bpp_optimum(inst.volumes)
        config = PlannerConfig(iterations=10, islands=1, catalog=(K.EA,), m_min=1)
        clock = VirtualClock(steps_per_iteration=10_000, steps_per_migration=1000)
        result = run_experiment(BppAdapter(inst), "static", config, MethodConfig(), clock, seed=1)
        assert result.best_objective == float(optimum), name


# ---------------------------------------------------------------------------
# 3. ternary permutation operator vs reference
# ---------------------------------------------------------------------------


@criterion("ternary permutation operator matches the reference on 10^3 triples")
def test_criterion_ternary_reference():
    rng = Rng("ternary")
    for _ in range(1000):
        n = rng.py.randint(3, 50)
        perms = []
        for _ in range(3):
            order = list(range(n))
            rng.py.shuffle(order)
            perms.append(order)
        out = sorted_pairs_ternary(*(Permutation(p) for p in perms))
        assert out.order.tolist() == ternary_reference(*perms)


# ---------------------------------------------------------------------------
# 4. determinism of virtual-time runs
# ---------------------------------------------------------------------------


@criterion("determinism: byte-identical event logs per planner", budget=300)
def test_criterion_determinism():
    adapter_path = DATA / "tsp20.tsp"
    config = PlannerConfig(iterations=10, islands=8)
    clock = VirtualClock(steps_per_iteration=400, steps_per_migration=50)
    for planner in ("static", "random", "improvements", "top-shares"):
        logs = []
        for _ in range(2):
            adapter = TspAdapter(load_tsplib(adapter_path))
            result = run_experiment(adapter, planner, config, MethodConfig(), clock, seed=42)
            logs.append(result.events_ndjson())
        assert logs[0] == logs[1], planner


# ---------------------------------------------------------------------------
# 5. planner invariants over full runs
# ---------------------------------------------------------------------------


def _iteration_of(event, steps_per_iteration):
    return event["t"] // steps_per_iteration - 1


@criterion("planner invariants hold over full 50-iteration runs")
def test_criterion_planner_invariants():
    protecting = {"explore-exploit", "avg-fitness", "improvements", "distinct-shares", "lazy-improvements"}
    clock = VirtualClock(steps_per_iteration=120, steps_per_migration=30)
    config = PlannerConfig(iterations=50, islands=16)
    adapter_path = DATA / "tsp20.tsp"
    for planner in sorted(POLICIES):
        result = run_experiment(
            TspAdapter(load_tsplib(adapter_path)), planner, config, MethodConfig(), clock, seed=7
        )
        events = result.events
        start_iteration = {}
        kind_of = {}
        running = {}
        kills_at = {}
        kinds_at_boundary = []
        replay = FeatureLedger(config)
        window_events = []
        lazy_kill_checks = []
        for ev in events:
            tag = ev["ev"]
            if tag == "start":
                start_iteration[ev["instance"]] = ev["iteration"]
                kind_of[ev["instance"]] = ev["kind"]
                running[ev["island"]] = ev["instance"]
                window_events.append(ev)
            elif tag == "kill":
                t = _iteration_of(ev, clock.steps_per_iteration)
                kills_at.setdefault(t, []).append(ev["instance"])
            elif tag == "boundary":
                # ledger state at plan time: everything seen before this boundary
                replay.ingest(window_events)
                window_events = []
                kinds_at_boundary.append({kind_of[i] for i in running.values()})
                snap = replay.snapshot(ev["iteration"])
                lazy_kill_checks.append({str(r.instance): r for r in snap.rows})
                replay.end_iteration(ev["iteration"])
            else:
                window_events.append(ev)

        # island count preserved and at most one replacement per iteration
        assert len(running) == 16
        assert len(kinds_at_boundary) == config.iterations
        for t, killed in kills_at.items():
            assert len(killed) == 1, f"{planner}: {len(killed)} replacements in iteration {t}"
        if planner == "static":
            assert not kills_at  # the full catalog ran at start, so never-run stays quiet
        if planner == "random":
            # declares no protection, so it replaces in every single iteration
            assert sum(len(k) for k in kills_at.values()) == config.iterations

        # protection windows respected
        if planner in protecting:
            for t, killed in kills_at.items():
                for instance in killed:
                    age = t - start_iteration[instance] + 1
                    assert age >= config.n_protect, f"{planner}: killed {instance} at age {age}"

        # diversity floor after the first boundary
        if planner == "random-diverse":
            for kinds in kinds_at_boundary[1:]:
                assert len(kinds) >= min(config.m_min, len(config.catalog)), kinds

        # the lazy policy only kills instances with no recent improvement
        if planner == "lazy-improvements":
            for t, killed in kills_at.items():
                rows = lazy_kill_checks[t]
                for instance in killed:
                    row = rows[instance]
                    recent = row.qi_recent[: config.n_patience]
                    assert len(recent) >= config.n_patience
                    assert sum(recent) == 0, f"killed {instance} with recent improvements {recent}"

        # the planner ledger's view of the best objective never worsens
        bests = [row["best"] for row in result.trace]
        assert bests == sorted(bests, reverse=True)
        ledger_bests = [s.global_best for s in result.ledger_snapshots if s.global_best is not None]
        assert ledger_bests == sorted(ledger_bests, reverse=True)


# ---------------------------------------------------------------------------
# 6. heterogeneous portfolio stays close to the best homogeneous one
# ---------------------------------------------------------------------------


@criterion("heterogeneity closeness on the 50-city tour and the 10-D power-sum", budget=900)
def test_criterion_heterogeneity_closeness():
    grid = _catalog_grid()

    tsp_medians = run_portfolio_grid("tsp50", grid)
    best_hom_tsp = min(v for k, v in tsp_medians.items() if k.startswith("hom-"))
    het_tsp = tsp_medians["het"]
    print(f"\n  tsp50 medians: {({k: round(v, 1) for k, v in tsp_medians.items()})}")
    assert het_tsp <= 1.15 * best_hom_tsp, (het_tsp, best_hom_tsp)

    f14_medians = run_portfolio_grid("f14", grid)
    best_hom_f14 = min(v for k, v in f14_medians.items() if k.startswith("hom-"))
    het_f14 = f14_medians["het"]
    print(f"  f14 medians: {({k: float(f'{v:.3g}') for k, v in f14_medians.items()})}")
    assert het_f14 <= best_hom_f14 + 1e-3, (het_f14, best_hom_f14)


# ---------------------------------------------------------------------------
# 7. valley-function desk check at the reduced budget
# ---------------------------------------------------------------------------


@criterion("best homogeneous local-search portfolio solves the 10-D valley function", budget=600)
def test_criterion_rosenbrock_desk_check():
    grid = {f"hom-{k.value}": [k.value] for k in (K.HC, K.TS, K.EA)}
    medians = run_portfolio_grid("f08", grid)
    print(f"\n  f08 medians: {({k: float(f'{v:.3g}') for k, v in medians.items()})}")
    assert min(medians.values()) <= 1e-1, medians


# ---------------------------------------------------------------------------
# 8. report correctness on synthetic fixtures
# ---------------------------------------------------------------------------


@criterion("report statistics reproduce hand-computed values exactly")
def test_criterion_report_correctness(tmp_path):
    import json

    from hetero_islands.cli import nearest_rank_percentile, report_quartiles, report_table

    def run_dir(label, finals):
        d = tmp_path / label
        d.mkdir()
        (d / "summary.json").write_text(
            json.dumps(
                {
                    "label": label,
                    "planner": label,
                    "problem": "synthetic",
                    "runs": [
                        {"seed": i, "status": "ok", "best": v, "dir": None}
                        for i, v in enumerate(finals, 1)
                    ],
                }
            )
        )
        return d

    a = run_dir("alpha", [3.0, 1.0, 2.0])
    rows = report_table([a])
    assert rows == [{"label": "alpha", "runs": 3, "mean": 2.0, "min": 1.0, "max": 3.0}]

    b = run_dir("solo", [4.5])
    rows = report_table([b])
    assert rows[0]["mean"] == rows[0]["min"] == rows[0]["max"] == 4.5

    assert nearest_rank_percentile(list(range(1, 9)), 25.0) == 2

    good = run_dir("good", [1.0, 2.0, 5.0, 6.0])
    bad = run_dir("bad", [3.0, 4.0, 7.0, 8.0])
    report = report_quartiles([good, bad])
    assert report["threshold"] == 2.0
    counts = {r["label"]: r["top"] for r in report["rows"]}
    assert counts == {"good": 2, "bad": 0}

    nine = run_dir("nine", [float(v) for v in range(1, 10)])
    solo_report = report_quartiles([nine])
    assert solo_report["rows"][0]["top"] <= 9
