"""Island execution fabric: workers, migration bus, clocks, event log.

Two interchangeable runtimes drive the same method/planner contracts:

* :class:`VirtualRuntime` -- a single-threaded lockstep scheduler counting
  steps instead of seconds. Every island advances one method step per tick
  (in island order); every ``steps_per_migration`` ticks the islands first
  drain their inboxes and then broadcast their best solutions; every
  ``steps_per_iteration`` ticks the planner runs. The whole run is a
  deterministic function of (config, seed).
* :class:`WallClockRuntime` -- one thread per island plus the planner thread,
  with time-based migration and iteration periods. Semantics match the
  virtual runtime at boundaries, but event interleaving is not reproducible.

Events are flat dicts serialized as canonical NDJSON, one record per line:

    {"ev":"start","t":0,"instance":"3.0","island":3,"kind":"HC","iteration":0}
    {"ev":"improve","t":17,"instance":"3.0","obj":123.5}
    {"ev":"share","t":200,"instance":"3.0","island":3,"kind":"HC","obj":...,
     "genome":"...","seq":12}            (plus "lineage" counts when the
                                          share improves the best shared so far)
    {"ev":"helped","t":400,"receiver":"2.0","sender":"3.0","sender_kind":"HC"}
    {"ev":"boundary","t":5000,"iteration":0}
    {"ev":"kill","t":5000,"instance":"3.0","island":3}
    {"ev":"evals","t":5000,"instance":"3.0","n":48210}
    {"ev":"drop","t":5000,"island":3,"n":2}
"""

import json
import queue
import threading
import time
from dataclasses import dataclass
from typing import Dict, List, Optional

from .core import (
    ConfigError,
    EvaluatedSolution,
    MethodConfig,
    MethodInstanceId,
    MethodKind,
    PlannerConfig,
    Rng,
    genome_to_text,
    sequence_counter,
)
from .methods import (
    MethodState,
    Migrant,
    incorporate_solution,
    method_init,
    method_step,
    receive_and_incorporate,
    share_best,
)
from .planners import get_policy, initial_assignment, planner_loop
from .problems.base import ProblemAdapter


@dataclass(frozen=True)
class VirtualClock:
    steps_per_iteration: int = 5000
    steps_per_migration: int = 500

    def __post_init__(self):
        if self.steps_per_iteration < 1 or self.steps_per_migration < 1:
            raise ConfigError("step counts must be >= 1")
        if self.steps_per_iteration % self.steps_per_migration != 0:
            raise ConfigError("steps_per_iteration must be a multiple of steps_per_migration")


@dataclass(frozen=True)
class WallClock:
    iteration_seconds: float = 60.0
    migration_seconds: float = 5.0

    def __post_init__(self):
        if self.iteration_seconds <= 0 or self.migration_seconds <= 0:
            raise ConfigError("clock periods must be positive")


def events_to_ndjson(events) -> bytes:
    lines = [json.dumps(ev, sort_keys=True, separators=(",", ":")) for ev in events]
    return ("\n".join(lines) + "\n").encode()


class _IslandSlot:
    __slots__ = ("island", "state", "rng", "seq", "kind")

    def __init__(self, island, state, rng, seq, kind):
        self.island = island
        self.state = state
        self.rng = rng
        self.seq = seq
        self.kind = kind


class VirtualRuntime:
    """Deterministic lockstep runtime; also the reference semantics."""

    def __init__(
        self,
        adapter: ProblemAdapter,
        assignment: List[MethodKind],
        method_config: MethodConfig,
        clock: VirtualClock,
        seed: int,
    ):
        self.adapter = adapter
        self.clock = clock
        self.method_config = method_config
        self.seed = seed
        self.step_no = 0
        self.events: List[dict] = []
        self._cursor = 0
        self.best: Optional[EvaluatedSolution] = None
        self.shared_best = float("inf")
        self.stats = {
            "shares": 0,
            "enqueued": 0,
            "refused": 0,
            "processed": 0,
            "destroyed": 0,
            "protocol_errors": 0,
        }
        islands = len(assignment)
        self.slots: List[_IslandSlot] = []
        for island, kind in enumerate(assignment):
            rng = Rng.for_island(seed, island)
            seq = sequence_counter(island, islands)
            instance = MethodInstanceId(island, 0)
            state = method_init(kind, method_config, adapter, rng, instance, seq)
            slot = _IslandSlot(island, state, rng, seq, kind)
            self.slots.append(slot)
            self._emit_start(instance, island, kind, iteration=0)
            self._emit_improve(state)

    # -- events -------------------------------------------------------------

    def _emit(self, ev: dict) -> None:
        self.events.append(ev)

    def _emit_start(self, instance, island, kind, iteration):
        self._emit(
            {
                "ev": "start",
                "t": self.step_no,
                "instance": str(instance),
                "island": island,
                "kind": kind.value,
                "iteration": iteration,
            }
        )

    def _emit_improve(self, state: MethodState) -> None:
        sol = state.best_own
        self._emit(
            {"ev": "improve", "t": self.step_no, "instance": str(state.instance_id), "obj": sol.objective}
        )
        if self.best is None or sol.objective < self.best.objective:
            self.best = sol

    # -- scheduling -----------------------------------------------------------

    def _tick(self) -> None:
        self.step_no += 1
        adapter = self.adapter
        for slot in self.slots:
            state = slot.state
            prev = state.best_own.objective
            method_step(state, adapter, slot.rng)
            if state.best_own.objective < prev:
                self._emit_improve(state)
        if self.step_no % self.clock.steps_per_migration == 0:
            self._migration_round()

    def _migration_round(self) -> None:
        adapter = self.adapter
        for slot in self.slots:
            pending = len(slot.state.inbox)
            if not pending:
                continue
            self.stats["processed"] += pending
            for rec in receive_and_incorporate(slot.state, adapter):
                if rec.protocol_error:
                    self.stats["protocol_errors"] += 1
                elif rec.helped:
                    self._emit(
                        {
                            "ev": "helped",
                            "t": self.step_no,
                            "receiver": str(slot.state.instance_id),
                            "sender": str(rec.sender),
                            "sender_kind": rec.sender_kind.value,
                        }
                    )
        for slot in self.slots:
            sol = share_best(slot.state)
            if sol is None:
                continue
            self.migrate(slot, sol)

    def migrate(self, sender_slot: _IslandSlot, sol: EvaluatedSolution) -> None:
        """Broadcast a copy to every other island; log the share once."""
        state = sender_slot.state
        ev = {
            "ev": "share",
            "t": self.step_no,
            "instance": str(state.instance_id),
            "island": sender_slot.island,
            "kind": state.kind.value,
            "obj": sol.objective,
            "genome": genome_to_text(sol.genome),
            "seq": sol.sequence_no,
        }
        if sol.objective < self.shared_best:
            # Only shares that improve the best-shared-so-far need lineage
            # detail (the ledger recomputes contribution counts from it).
            self.shared_best = sol.objective
            counts = sol.lineage.counts() if sol.lineage is not None else {}
            ev["lineage"] = {str(k): v for k, v in sorted(counts.items())}
        self._emit(ev)
        self.stats["shares"] += 1
        migrant = Migrant(sol, state.instance_id, state.kind)
        for other in self.slots:
            if other.island != sender_slot.island:
                other.state.inbox.append(migrant)
                self.stats["enqueued"] += 1

    # -- planner-facing handle ---------------------------------------------

    def advance_iteration(self) -> List[dict]:
        for _ in range(self.clock.steps_per_iteration):
            self._tick()
        iteration = self.step_no // self.clock.steps_per_iteration - 1
        self._emit({"ev": "boundary", "t": self.step_no, "iteration": iteration})
        out = self.events[self._cursor :]
        self._cursor = len(self.events)
        return out

    def replace_instance(self, island: int, kind: MethodKind, iteration: int) -> MethodInstanceId:
        slot = self.slots[island]
        old = slot.state
        dropped = len(old.inbox)
        if dropped:
            self.stats["destroyed"] += dropped
            self._emit({"ev": "drop", "t": self.step_no, "island": island, "n": dropped})
        self._emit(
            {"ev": "evals", "t": self.step_no, "instance": str(old.instance_id), "n": old.evaluations}
        )
        self._emit({"ev": "kill", "t": self.step_no, "instance": str(old.instance_id), "island": island})
        new_id = MethodInstanceId(island, old.instance_id.epoch + 1)
        state = method_init(kind, self.method_config, self.adapter, slot.rng, new_id, slot.seq)
        if self.best is not None:
            incorporate_solution(state, self.adapter, self.best)
        slot.state = state
        slot.kind = kind
        self._emit_start(new_id, island, kind, iteration)
        self._emit_improve(state)
        return new_id

    def running_kinds(self) -> Dict[int, MethodKind]:
        return {slot.island: slot.state.kind for slot in self.slots}

    def best_objective(self) -> Optional[float]:
        return None if self.best is None else self.best.objective

    def best_solution(self) -> Optional[EvaluatedSolution]:
        return self.best

    def finalize(self) -> None:
        for slot in self.slots:
            self._emit(
                {
                    "ev": "evals",
                    "t": self.step_no,
                    "instance": str(slot.state.instance_id),
                    "n": slot.state.evaluations,
                }
            )
        self.stats["pending_end"] = sum(len(slot.state.inbox) for slot in self.slots)
        self._cursor = len(self.events)


class _WallIsland(threading.Thread):
    def __init__(self, runtime: "WallClockRuntime", slot: _IslandSlot):
        super().__init__(daemon=True, name=f"island-{slot.island}")
        self.rt = runtime
        self.slot = slot
        self.commands: "queue.Queue" = queue.Queue()
        self.replacing = threading.Event()
        self.inbox: "queue.Queue" = queue.Queue()

    def run(self) -> None:
        rt = self.rt
        next_migration = time.monotonic() + rt.clock.migration_seconds
        while not rt.stop_flag.is_set():
            try:
                command = self.commands.get_nowait()
            except queue.Empty:
                command = None
            if command is not None:
                self._replace(*command)
            state = self.slot.state
            prev = state.best_own.objective
            method_step(state, rt.adapter, self.slot.rng)
            if state.best_own.objective < prev:
                rt.emit_improve(state)
            if time.monotonic() >= next_migration:
                self._migration_round()
                next_migration = time.monotonic() + rt.clock.migration_seconds

    def _migration_round(self) -> None:
        rt = self.rt
        state = self.slot.state
        moved = 0
        while True:
            try:
                state.inbox.append(self.inbox.get_nowait())
                moved += 1
            except queue.Empty:
                break
        if moved:
            with rt.lock:
                rt.stats["processed"] += moved
            for rec in receive_and_incorporate(state, rt.adapter):
                if rec.protocol_error:
                    with rt.lock:
                        rt.stats["protocol_errors"] += 1
                elif rec.helped:
                    rt.emit(
                        {
                            "ev": "helped",
                            "t": rt.now(),
                            "receiver": str(state.instance_id),
                            "sender": str(rec.sender),
                            "sender_kind": rec.sender_kind.value,
                        }
                    )
        sol = share_best(state)
        if sol is not None:
            rt.migrate(self.slot, sol, self)

    def _replace(self, kind: MethodKind, iteration: int, reply: "queue.Queue") -> None:
        rt = self.rt
        self.replacing.set()
        old = self.slot.state
        dropped = len(old.inbox) + self.inbox.qsize()
        while True:
            try:
                self.inbox.get_nowait()
            except queue.Empty:
                break
        with rt.lock:
            if dropped:
                rt.stats["destroyed"] += dropped
        if dropped:
            rt.emit({"ev": "drop", "t": rt.now(), "island": self.slot.island, "n": dropped})
        rt.emit({"ev": "evals", "t": rt.now(), "instance": str(old.instance_id), "n": old.evaluations})
        rt.emit({"ev": "kill", "t": rt.now(), "instance": str(old.instance_id), "island": self.slot.island})
        new_id = MethodInstanceId(self.slot.island, old.instance_id.epoch + 1)
        state = method_init(kind, rt.method_config, rt.adapter, self.slot.rng, new_id, self.slot.seq)
        seed_sol = rt.best_solution()
        if seed_sol is not None:
            incorporate_solution(state, rt.adapter, seed_sol)
        self.slot.state = state
        self.slot.kind = kind
        rt.emit(
            {
                "ev": "start",
                "t": rt.now(),
                "instance": str(new_id),
                "island": self.slot.island,
                "kind": kind.value,
                "iteration": iteration,
            }
        )
        rt.emit_improve(state)
        self.replacing.clear()
        reply.put(new_id)


class WallClockRuntime:
    """Thread-per-island runtime with time-based migration and planning."""

    def __init__(
        self,
        adapter: ProblemAdapter,
        assignment: List[MethodKind],
        method_config: MethodConfig,
        clock: WallClock,
        seed: int,
    ):
        self.adapter = adapter
        self.clock = clock
        self.method_config = method_config
        self.seed = seed
        self.events: List[dict] = []
        self._cursor = 0
        self.lock = threading.Lock()
        self.stop_flag = threading.Event()
        self.best: Optional[EvaluatedSolution] = None
        self._t0 = time.monotonic()
        self._iteration = 0
        self.stats = {
            "shares": 0,
            "enqueued": 0,
            "refused": 0,
            "processed": 0,
            "destroyed": 0,
            "protocol_errors": 0,
        }
        islands = len(assignment)
        self.workers: List[_WallIsland] = []
        for island, kind in enumerate(assignment):
            rng = Rng.for_island(seed, island)
            seq = sequence_counter(island, islands)
            instance = MethodInstanceId(island, 0)
            state = method_init(kind, method_config, adapter, rng, instance, seq)
            slot = _IslandSlot(island, state, rng, seq, kind)
            worker = _WallIsland(self, slot)
            self.workers.append(worker)
            self.emit(
                {
                    "ev": "start",
                    "t": self.now(),
                    "instance": str(instance),
                    "island": island,
                    "kind": kind.value,
                    "iteration": 0,
                }
            )
            self.emit_improve(state)
        for worker in self.workers:
            worker.start()

    def now(self) -> float:
        return round(time.monotonic() - self._t0, 6)

    def emit(self, ev: dict) -> None:
        with self.lock:
            self.events.append(ev)

    def emit_improve(self, state: MethodState) -> None:
        sol = state.best_own
        with self.lock:
            self.events.append(
                {"ev": "improve", "t": self.now(), "instance": str(state.instance_id), "obj": sol.objective}
            )
            if self.best is None or sol.objective < self.best.objective:
                self.best = sol

    def migrate(self, sender_slot: _IslandSlot, sol: EvaluatedSolution, sender_worker) -> None:
        state = sender_slot.state
        self.emit(
            {
                "ev": "share",
                "t": self.now(),
                "instance": str(state.instance_id),
                "island": sender_slot.island,
                "kind": state.kind.value,
                "obj": sol.objective,
                "genome": genome_to_text(sol.genome),
                "seq": sol.sequence_no,
                "lineage": {str(k): v for k, v in sorted(sol.lineage.counts().items())}
                if sol.lineage is not None
                else {},
            }
        )
        migrant = Migrant(sol, state.instance_id, state.kind)
        with self.lock:
            self.stats["shares"] += 1
        for worker in self.workers:
            if worker is sender_worker:
                continue
            if worker.replacing.is_set():
                with self.lock:
                    self.stats["refused"] += 1
                continue
            worker.inbox.put(migrant)
            with self.lock:
                self.stats["enqueued"] += 1

    # -- planner-facing handle ---------------------------------------------

    def advance_iteration(self) -> List[dict]:
        time.sleep(self.clock.iteration_seconds)
        self.emit({"ev": "boundary", "t": self.now(), "iteration": self._iteration})
        self._iteration += 1
        with self.lock:
            out = self.events[self._cursor :]
            self._cursor = len(self.events)
        return out

    def replace_instance(self, island: int, kind: MethodKind, iteration: int) -> MethodInstanceId:
        worker = self.workers[island]
        reply: "queue.Queue" = queue.Queue()
        worker.commands.put((kind, iteration, reply))
        return reply.get(timeout=max(10.0, 5 * self.clock.iteration_seconds))

    def running_kinds(self) -> Dict[int, MethodKind]:
        return {w.slot.island: w.slot.kind for w in self.workers}

    def best_objective(self) -> Optional[float]:
        with self.lock:
            return None if self.best is None else self.best.objective

    def best_solution(self) -> Optional[EvaluatedSolution]:
        with self.lock:
            return self.best

    def finalize(self) -> None:
        self.stop_flag.set()
        for worker in self.workers:
            worker.join(timeout=10)
        for worker in self.workers:
            self.emit(
                {
                    "ev": "evals",
                    "t": self.now(),
                    "instance": str(worker.slot.state.instance_id),
                    "n": worker.slot.state.evaluations,
                }
            )
        self.stats["pending_end"] = sum(
            len(w.slot.state.inbox) + w.inbox.qsize() for w in self.workers
        )
        with self.lock:
            self._cursor = len(self.events)


# ---------------------------------------------------------------------------
# Experiment entry point
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    planner: str
    seed: int
    best_objective: float
    best_genome_text: str
    best_solution: EvaluatedSolution
    events: list
    trace: list
    planner_records: list
    ledger_snapshots: list
    stats: dict
    total_evaluations: int

    def events_ndjson(self) -> bytes:
        return events_to_ndjson(self.events)


def run_experiment(
    adapter: ProblemAdapter,
    planner: str,
    planner_config: PlannerConfig,
    method_config: MethodConfig,
    clock,
    seed: int,
) -> RunResult:
    """Run one seeded experiment end to end and collect its artifacts."""
    policy = get_policy(planner)
    planner_rng = Rng.for_planner(seed)
    assignment = initial_assignment(
        planner_config.catalog, planner_config.islands, planner_rng, randomize=policy.random_init
    )
    if isinstance(clock, VirtualClock):
        runtime = VirtualRuntime(adapter, assignment, method_config, clock, seed)
    elif isinstance(clock, WallClock):
        runtime = WallClockRuntime(adapter, assignment, method_config, clock, seed)
    else:
        raise ConfigError(f"unknown clock {clock!r}")
    try:
        records, trace, snapshots = planner_loop(policy, runtime, planner_config, planner_rng)
    finally:
        runtime.finalize()
    best = runtime.best_solution()
    total_evals = sum(ev["n"] for ev in runtime.events if ev["ev"] == "evals")
    return RunResult(
        planner=planner,
        seed=seed,
        best_objective=best.objective,
        best_genome_text=genome_to_text(best.genome),
        best_solution=best,
        events=runtime.events,
        trace=trace,
        planner_records=records,
        ledger_snapshots=snapshots,
        stats=dict(runtime.stats),
        total_evaluations=total_evals,
    )
