"""The seven optimization methods and their shared island-loop contract.

Every method follows the same cycle: step its own search, absorb solutions
received from other islands, and offer its best solution for migration.
Incorporation uses each method's own acceptance rule (single-solution methods
replace their incumbent only when strictly better; population methods replace
their worst member). Every migrant that strictly improves a method's best is
counted against the sender's kind, which feeds the helper statistics.

Solutions created or modified by an instance carry that instance in their
lineage; incorporated migrants keep their lineage untouched.
"""

import math
from collections import deque
from typing import List, Optional

import numpy as _np

from .core import (
    EvaluatedSolution,
    EvaluationError,
    Genome,
    Lineage,
    MethodConfig,
    MethodInstanceId,
    MethodKind,
    ParamRecord,
    ParamSpace,
    Permutation,
    PermutationSpec,
    RealVector,
    RealVectorSpec,
    Rng,
    VertexSet,
    VertexSetSpec,
    sequence_counter,
)
from .problems.base import ProblemAdapter

POPULATION_KINDS = frozenset({MethodKind.EA, MethodKind.DE})

_SPEC_GENOME = {
    PermutationSpec: Permutation,
    RealVectorSpec: RealVector,
    VertexSetSpec: VertexSet,
    ParamSpace: ParamRecord,
}


class Migrant:
    """Inbox entry: a foreign solution plus who sent it."""

    __slots__ = ("solution", "sender", "sender_kind")

    def __init__(self, solution: EvaluatedSolution, sender: MethodInstanceId, sender_kind: MethodKind):
        self.solution = solution
        self.sender = sender
        self.sender_kind = sender_kind


class HelpRecord:
    """Outcome of incorporating one migrant."""

    __slots__ = ("sender", "sender_kind", "helped", "accepted", "protocol_error")

    def __init__(self, sender, sender_kind, helped, accepted, protocol_error=False):
        self.sender = sender
        self.sender_kind = sender_kind
        self.helped = helped
        self.accepted = accepted
        self.protocol_error = protocol_error


class TabuList:
    """Bounded FIFO of genome keys with O(1) membership."""

    __slots__ = ("maxlen", "queue", "counts")

    def __init__(self, maxlen: int):
        self.maxlen = maxlen
        self.queue: deque = deque()
        self.counts: dict = {}

    def __contains__(self, key) -> bool:
        return key in self.counts

    def __len__(self) -> int:
        return len(self.queue)

    def push(self, key) -> None:
        if len(self.queue) >= self.maxlen:
            old = self.queue.popleft()
            remaining = self.counts[old] - 1
            if remaining:
                self.counts[old] = remaining
            else:
                del self.counts[old]
        self.queue.append(key)
        self.counts[key] = self.counts.get(key, 0) + 1


class MethodState:
    __slots__ = (
        "kind",
        "config",
        "instance_id",
        "incumbent",
        "population",
        "tabu",
        "temperature",
        "cursor",
        "finished",
        "best_own",
        "helper_counts",
        "inbox",
        "outbox_log",
        "last_shared_key",
        "op_state",
        "pop_cache",
        "seq",
        "evaluations",
    )

    def __init__(self, kind, config, instance_id, seq):
        self.kind = kind
        self.config = config
        self.instance_id = instance_id
        self.incumbent = None
        self.population = None
        self.tabu = None
        self.temperature = config.sa_temperature
        self.cursor = None
        self.finished = False
        self.best_own = None
        self.helper_counts = {}
        self.inbox: deque = deque()
        self.outbox_log: list = []
        self.last_shared_key = None
        self.op_state = None
        self.pop_cache = None
        self.seq = seq
        self.evaluations = 0


def _genome_key(genome: Genome):
    return genome.key()


def _evaluate(state: MethodState, adapter: ProblemAdapter, genome: Genome) -> Optional[float]:
    state.evaluations += 1
    try:
        return adapter.evaluate(genome)
    except EvaluationError:
        return None


def _fresh_solution(state: MethodState, adapter, rng, retries: int = 1000) -> EvaluatedSolution:
    for _ in range(retries):
        genome = adapter.random_solution(rng)
        obj = _evaluate(state, adapter, genome)
        if obj is not None:
            return EvaluatedSolution(
                genome, obj, Lineage(state.instance_id, None), state.instance_id, next(state.seq)
            )
    raise EvaluationError("could not evaluate any random solution")


def _derived_solution(state: MethodState, genome, obj, parent: EvaluatedSolution) -> EvaluatedSolution:
    return EvaluatedSolution(
        genome,
        obj,
        Lineage(state.instance_id, parent.lineage),
        state.instance_id,
        next(state.seq),
    )


def _note_best(state: MethodState, sol: EvaluatedSolution) -> bool:
    if state.best_own is None or sol.objective < state.best_own.objective:
        state.best_own = sol
        return True
    return False


def method_init(
    kind: MethodKind,
    config: MethodConfig,
    adapter: ProblemAdapter,
    rng: Rng,
    instance_id: MethodInstanceId,
    seq=None,
) -> MethodState:
    """Create a fresh instance: initial solutions, zeroed counters."""
    state = MethodState(kind, config, instance_id, seq if seq is not None else sequence_counter())
    state.op_state = adapter.make_op_state()
    if kind in POPULATION_KINDS:
        size = config.ea_pop if kind is MethodKind.EA else config.de_pop
        state.population = [_fresh_solution(state, adapter, rng) for _ in range(size)]
        state.best_own = min(state.population, key=lambda s: s.objective)
    else:
        state.incumbent = _fresh_solution(state, adapter, rng)
        state.best_own = state.incumbent
        if kind is MethodKind.TS:
            state.tabu = TabuList(config.ts_tabu_size)
            state.tabu.push(_genome_key(state.incumbent.genome))
        elif kind is MethodKind.BF:
            state.cursor = adapter.initial_cursor()
    return state


# ---------------------------------------------------------------------------
# Per-kind steps
# ---------------------------------------------------------------------------


def _step_rs(state, adapter, rng):
    genome = adapter.random_solution(rng)
    obj = _evaluate(state, adapter, genome)
    if obj is not None and obj < state.incumbent.objective:
        sol = EvaluatedSolution(
            genome, obj, Lineage(state.instance_id, None), state.instance_id, next(state.seq)
        )
        state.incumbent = sol
        _note_best(state, sol)


def _step_hc(state, adapter, rng):
    k = state.config.hc_neighbors
    moves = adapter.unary_moves(state.incumbent.genome, state.incumbent.objective, k, rng, state.op_state)
    state.evaluations += k
    if not moves:
        return
    cur = state.incumbent.objective
    if state.op_state is not None:
        for obj, _ in moves:
            state.op_state.observe(obj < cur)
    best_obj, realize = min(moves, key=lambda m: m[0])
    if best_obj < cur:
        sol = _derived_solution(state, realize(), best_obj, state.incumbent)
        state.incumbent = sol
        _note_best(state, sol)


def _step_sa(state, adapter, rng):
    moves = adapter.unary_moves(state.incumbent.genome, state.incumbent.objective, 1, rng, state.op_state)
    state.evaluations += 1
    if moves:
        obj, realize = moves[0]
        cur = state.incumbent.objective
        if state.op_state is not None:
            state.op_state.observe(obj < cur)
        if obj < cur or rng.py.random() < math.exp(-(obj - cur) / state.temperature):
            sol = _derived_solution(state, realize(), obj, state.incumbent)
            state.incumbent = sol
            _note_best(state, sol)
    state.temperature *= 1.0 - state.config.sa_cooling_rate


def _step_ts(state, adapter, rng):
    k = state.config.hc_neighbors
    moves = adapter.unary_moves(state.incumbent.genome, state.incumbent.objective, k, rng, state.op_state)
    state.evaluations += k
    if not moves:
        return
    cur = state.incumbent.objective
    if state.op_state is not None:
        for obj, _ in moves:
            state.op_state.observe(obj < cur)
    aspiration = state.best_own.objective
    for obj, realize in sorted(moves, key=lambda m: m[0]):
        genome = realize()
        key = _genome_key(genome)
        if key in state.tabu and obj >= aspiration:
            continue
        sol = _derived_solution(state, genome, obj, state.incumbent)
        state.incumbent = sol
        state.tabu.push(key)
        _note_best(state, sol)
        return
    # every neighbor tabu and none beats the aspiration level: stay put


def _tournament(population, rng, k: int) -> EvaluatedSolution:
    best = population[rng.py.randrange(len(population))]
    for _ in range(k - 1):
        other = population[rng.py.randrange(len(population))]
        if other.objective < best.objective:
            best = other
    return best


def _step_ea(state, adapter, rng):
    """One generation: binary-tournament parents, crossover then mutation per
    offspring at their configured rates, generational replacement keeping the
    single best of the old population."""
    cfg = state.config
    pop = state.population
    size = len(pop)
    count = size - 1
    objs = [s.objective for s in pop]
    best_i = 0
    for i in range(1, size):
        if objs[i] < objs[best_i]:
            best_i = i
    elite = pop[best_i]
    draws = (rng.np.random((count, 4)) * size).astype(_np.int64).tolist()
    rnd = rng.py.random
    offspring: List[Optional[EvaluatedSolution]] = [None] * count
    mutate_only: List[tuple] = []  # (slot, parent): mutation of a known-objective genome
    generic: List[tuple] = []  # (slot, genome, parent): needs a full evaluation
    for s_i in range(count):
        a, b, c, d = draws[s_i]
        parent = pop[a if objs[a] <= objs[b] else b]
        crossed = rnd() < cfg.ea_crossover_rate
        mutated = rnd() < cfg.ea_mutation_rate
        if crossed:
            mate = pop[c if objs[c] <= objs[d] else d]
            genome = adapter.binary(parent.genome, mate.genome, rng)
            if mutated:
                genome = adapter.mutation(genome, rng, state.op_state)
            generic.append((s_i, genome, parent))
        elif mutated:
            mutate_only.append((s_i, parent))
        else:
            offspring[s_i] = parent  # survivor copy, not a new solution
    if mutate_only:
        batch = adapter.mutation_batch(
            [p.genome for _, p in mutate_only], [p.objective for _, p in mutate_only], rng, state.op_state
        )
        if batch is None:
            for slot, parent in mutate_only:
                generic.append((slot, adapter.mutation(parent.genome, rng, state.op_state), parent))
        else:
            children, child_objs = batch
            state.evaluations += len(mutate_only)
            for (slot, parent), child, obj in zip(mutate_only, children, child_objs):
                offspring[slot] = (
                    _derived_solution(state, child, obj, parent) if obj is not None else parent
                )
    if generic:
        eval_objs = adapter.evaluate_many([g for _, g, _ in generic])
        state.evaluations += len(generic)
        for (slot, genome, parent), obj in zip(generic, eval_objs):
            offspring[slot] = _derived_solution(state, genome, obj, parent) if obj is not None else parent
    state.population = [elite] + offspring
    best = elite
    for sol in offspring:
        if sol.objective < best.objective:
            best = sol
    _note_best(state, best)


def _de_triples(n: int, rng: Rng):
    """Per member: three indices, pairwise distinct and distinct from the
    member itself. One vector draw plus scalar fix-up of the collisions."""
    idx = rng.np.integers(0, n, (n, 3))
    rows = _np.arange(n)
    bad = (
        (idx[:, 0] == idx[:, 1])
        | (idx[:, 1] == idx[:, 2])
        | (idx[:, 0] == idx[:, 2])
        | (idx == rows[:, None]).any(axis=1)
    ).nonzero()[0]
    randrange = rng.py.randrange
    for i in bad.tolist():
        picks = [i]
        while len(picks) < 4:
            j = randrange(n)
            if j not in picks:
                picks.append(j)
        idx[i] = picks[1:]
    return idx


def _step_de(state, adapter, rng):
    pop = state.population
    n = len(pop)
    triples = _de_triples(n, rng)
    state.evaluations += n
    cache = state.pop_cache
    if cache is None:
        cache = adapter.make_de_cache([s.genome for s in pop])
        state.pop_cache = cache
    if cache is not None:
        batch = adapter.de_generation(cache, triples)
        improved = (batch.objs < cache.objs).nonzero()[0]
        for i in improved.tolist():
            obj = float(batch.objs[i])
            genome = batch.genome(i)
            pop[i] = _derived_solution(state, genome, obj, pop[triples[i][0]])
            adapter.de_cache_set(cache, i, genome, obj)
        if improved.size:
            _note_best(state, min(pop, key=lambda s: s.objective))
        return
    objs, build = adapter.ternary_batch([s.genome for s in pop], triples.tolist(), rng)
    improved_any = False
    for i in range(n):
        obj = objs[i]
        if obj is not None and obj < pop[i].objective and math.isfinite(obj):
            pop[i] = _derived_solution(state, build(i), obj, pop[triples[i][0]])
            improved_any = True
    if improved_any:
        _note_best(state, min(pop, key=lambda s: s.objective))


def _step_bf(state, adapter, rng):
    if state.finished:
        return
    nxt = adapter.next_solution(state.cursor)
    if nxt is None:
        state.finished = True
        return
    genome, state.cursor = nxt
    if state.cursor is None:
        state.finished = True
    obj = _evaluate(state, adapter, genome)
    if obj is not None and obj < state.incumbent.objective:
        sol = EvaluatedSolution(
            genome, obj, Lineage(state.instance_id, None), state.instance_id, next(state.seq)
        )
        state.incumbent = sol
        _note_best(state, sol)


_STEPS = {
    MethodKind.RS: _step_rs,
    MethodKind.HC: _step_hc,
    MethodKind.SA: _step_sa,
    MethodKind.TS: _step_ts,
    MethodKind.EA: _step_ea,
    MethodKind.DE: _step_de,
    MethodKind.BF: _step_bf,
}


def method_step(state: MethodState, adapter: ProblemAdapter, rng: Rng) -> None:
    """Advance the instance by one unit of search (one generation for the
    population methods, one proposal round otherwise)."""
    _STEPS[state.kind](state, adapter, rng)


# ---------------------------------------------------------------------------
# Migration contract
# ---------------------------------------------------------------------------


def incorporate_solution(state: MethodState, adapter: ProblemAdapter, sol: EvaluatedSolution) -> bool:
    """Merge a foreign solution using the method's own acceptance rule.

    Returns True when the solution entered the method's working set. The
    solution's lineage is preserved as-is.
    """
    if state.kind in POPULATION_KINDS:
        worst_i = max(range(len(state.population)), key=lambda i: state.population[i].objective)
        if sol.objective < state.population[worst_i].objective:
            state.population[worst_i] = sol
            state.pop_cache = None  # workspace rebuilt on the next generation
            _note_best(state, sol)
            return True
        return False
    if sol.objective < state.incumbent.objective:
        state.incumbent = sol
        if state.kind is MethodKind.TS:
            state.tabu.push(_genome_key(sol.genome))
        _note_best(state, sol)
        return True
    return False


def receive_and_incorporate(state: MethodState, adapter: ProblemAdapter) -> List[HelpRecord]:
    """Drain the inbox. Migrants whose encoding does not match the adapter are
    rejected and flagged as protocol errors; each migrant that strictly
    improves this instance's best credits the sender's kind."""
    records: List[HelpRecord] = []
    expected = _SPEC_GENOME[type(adapter.genome_spec)]
    while state.inbox:
        migrant = state.inbox.popleft()
        sol = migrant.solution
        if not isinstance(sol.genome, expected):
            records.append(HelpRecord(migrant.sender, migrant.sender_kind, False, False, True))
            continue
        helped = sol.objective < state.best_own.objective
        accepted = incorporate_solution(state, adapter, sol)
        if helped:
            state.helper_counts[migrant.sender_kind] = (
                state.helper_counts.get(migrant.sender_kind, 0) + 1
            )
        records.append(HelpRecord(migrant.sender, migrant.sender_kind, helped, accepted))
    return records


def share_best(state: MethodState) -> Optional[EvaluatedSolution]:
    """Offer best_own for migration, suppressing repeats of the same genome."""
    key = _genome_key(state.best_own.genome)
    if key == state.last_shared_key:
        return None
    state.last_shared_key = key
    state.outbox_log.append(state.best_own)
    return state.best_own
