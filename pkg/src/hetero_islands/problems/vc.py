"""Minimum vertex cover: find the smallest vertex set touching every edge.

Solutions are vertex subsets that must remain valid covers; every operator
repairs its output before returning it. Repair adds vertices adjacent to
uncovered edges, greedily by uncovered degree, sampling uniformly among ties
(or taking the lowest id when called without randomness, as the systematic
enumerator does).
"""

from typing import Any, Iterable, List, Optional, Set, Tuple

from ..core import Rng, VertexSet, VertexSetSpec
from .base import ProblemAdapter


class VcInstance:
    def __init__(self, n: int, edges: Iterable[Tuple[int, int]]):
        self.n = int(n)
        seen = set()
        edge_list = []
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) outside vertex range")
            key = (min(u, v), max(u, v))
            if key in seen:
                continue
            seen.add(key)
            edge_list.append(key)
        self.edges = edge_list


def is_cover(inst: VcInstance, s: VertexSet) -> bool:
    members = s.members
    return all(u in members or v in members for u, v in inst.edges)


def cover_size(inst: VcInstance, s: VertexSet) -> float:
    if not is_cover(inst, s):
        raise ValueError("genome is not a vertex cover")
    return float(len(s.members))


def _uncovered_edges(inst: VcInstance, members: Set[int]) -> List[Tuple[int, int]]:
    return [(u, v) for u, v in inst.edges if u not in members and v not in members]


def repair(inst: VcInstance, members: Set[int], rng: Optional[Rng] = None) -> Set[int]:
    """Grow ``members`` into a cover.

    Candidates are endpoints of uncovered edges; each round adds one vertex of
    maximal uncovered degree (random among ties when ``rng`` given, else the
    lowest id).
    """
    members = set(members)
    uncovered = _uncovered_edges(inst, members)
    while uncovered:
        degree: dict = {}
        for u, v in uncovered:
            degree[u] = degree.get(u, 0) + 1
            degree[v] = degree.get(v, 0) + 1
        best = max(degree.values())
        ties = sorted(v for v, d in degree.items() if d == best)
        pick = ties[rng.py.randrange(len(ties))] if rng is not None else ties[0]
        members.add(pick)
        uncovered = [(u, v) for u, v in uncovered if u != pick and v != pick]
    return members


class VcAdapter(ProblemAdapter):
    name = "vc"

    def __init__(self, inst: VcInstance):
        self.inst = inst
        self._spec = VertexSetSpec(inst.n)

    @property
    def genome_spec(self) -> VertexSetSpec:
        return self._spec

    def evaluate(self, genome: VertexSet) -> float:
        return cover_size(self.inst, genome)

    def random_solution(self, rng: Rng) -> VertexSet:
        start = {v for v in range(self.inst.n) if rng.py.random() < 0.5}
        return VertexSet(repair(self.inst, start, rng), self.inst.n)

    def initial_cursor(self):
        return 0

    def next_solution(self, cursor):
        if cursor is None or cursor >= (1 << self.inst.n):
            return None
        members = {v for v in range(self.inst.n) if cursor & (1 << v)}
        genome = VertexSet(repair(self.inst, members), self.inst.n)
        nxt = cursor + 1
        return genome, (nxt if nxt < (1 << self.inst.n) else None)

    def _drop_and_repair(self, genome: VertexSet, rng: Rng, count: int) -> VertexSet:
        members = set(genome.members)
        pool = sorted(members)
        for _ in range(min(count, len(pool))):
            victim = pool.pop(rng.py.randrange(len(pool)))
            members.discard(victim)
        return VertexSet(repair(self.inst, members, rng), self.inst.n)

    def unary(self, genome: VertexSet, rng: Rng, op_state: Any = None) -> VertexSet:
        return self._drop_and_repair(genome, rng, 5)

    def mutation(self, genome: VertexSet, rng: Rng, op_state: Any = None) -> VertexSet:
        return self._drop_and_repair(genome, rng, 3)

    def binary(self, a: VertexSet, b: VertexSet, rng: Rng) -> VertexSet:
        """Membership-wise mix of both parents, then repair."""
        members = set()
        for v in range(self.inst.n):
            parent = a if rng.py.random() < 0.5 else b
            if v in parent.members:
                members.add(v)
        return VertexSet(repair(self.inst, members, rng), self.inst.n)

    def ternary(self, a: VertexSet, b: VertexSet, c: VertexSet, rng: Rng) -> VertexSet:
        """Intersect two parents, then add vertices from the third until the
        cover closes (falling back to repair if the third parent runs out)."""
        members = set(a.members & b.members)
        extras = sorted(c.members - members)
        rng.py.shuffle(extras)
        uncovered = _uncovered_edges(self.inst, members)
        for v in extras:
            if not uncovered:
                break
            touched = [e for e in uncovered if v in e]
            if touched:
                members.add(v)
                uncovered = [e for e in uncovered if v not in e]
        return VertexSet(repair(self.inst, members, rng), self.inst.n)
