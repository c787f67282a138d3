"""Closed-tour length minimization over a complete graph.

Solutions are permutations of the city indices; the objective is the length
of the closed tour they describe. The local move is a segment reversal
(2-opt); because a reversal only swaps two edges of the tour, neighbor
objectives are computed incrementally in O(1).
"""

from typing import Any, List, Optional, Sequence

import numpy as np

from ..core import Permutation, PermutationSpec, Rng
from .base import ProblemAdapter
from .permutations import (
    identity_permutation,
    lex_successor,
    random_permutation,
    sorted_pairs_ternary,
    sorted_pairs_ternary_rows,
)


class TspInstance:
    """Distance data for one tour problem.

    Built either from planar coordinates (exact Euclidean edge lengths) or
    from an explicit symmetric distance matrix.
    """

    def __init__(self, dist: np.ndarray, coords: Optional[np.ndarray] = None):
        dist = np.asarray(dist, dtype=np.float64)
        n = dist.shape[0]
        if n < 3:
            raise ValueError("instance needs at least 3 cities")
        if dist.shape != (n, n):
            raise ValueError("distance matrix must be square")
        if (dist < 0).any():
            raise ValueError("distances must be non-negative")
        if not np.allclose(dist, dist.T):
            raise ValueError("distances must be symmetric")
        self.dist = dist
        self.coords = coords
        self.n = n

    @classmethod
    def from_coords(cls, coords, rounded: bool = False) -> "TspInstance":
        """``rounded=True`` applies nearest-integer edge weights (the
        convention used by the standard coordinate file format)."""
        coords = np.asarray(coords, dtype=np.float64)
        diff = coords[:, None, :] - coords[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        if rounded:
            dist = np.floor(dist + 0.5)
        return cls(dist, coords)


def cycle_length(inst: TspInstance, perm: Permutation) -> float:
    p = perm.order
    d = inst.dist
    return float(d[p[:-1], p[1:]].sum() + d[p[-1], p[0]])


def two_opt(perm: Permutation, rng: Rng) -> Permutation:
    """Reverse a contiguous segment between two positions chosen uniformly."""
    n = len(perm)
    i = rng.py.randrange(n - 1)
    j = rng.py.randrange(i + 1, n)
    out = perm.order.copy()
    out[i : j + 1] = out[i : j + 1][::-1]
    return Permutation(out)


def single_point_crossover(p1: Permutation, p2: Permutation, k: int) -> Permutation:
    """Child takes the first ``k`` entries of ``p2``; the remaining values
    follow in the order they appear in ``p1``."""
    prefix = p2.order[:k]
    taken = np.zeros(len(p1), dtype=bool)
    taken[prefix] = True
    rest = p1.order[~taken[p1.order]]
    return Permutation(np.concatenate([prefix, rest]))


def _reversal_delta(rows, p, n: int, i: int, j: int) -> float:
    """Tour-length change from reversing positions i..j (inclusive).

    Only the two boundary edges change; interior edges flip direction and the
    distance matrix is symmetric. Reversals touching both endpoints (i=0 and
    j=n-1) rotate the tour and leave the length unchanged. ``rows`` is the
    distance matrix as nested lists (scalar lookups beat array indexing here).
    """
    if i == 0 and j == n - 1:
        return 0.0
    a = p[i - 1] if i > 0 else p[n - 1]
    b = p[i]
    c = p[j]
    e = p[j + 1] if j < n - 1 else p[0]
    return rows[a][c] + rows[b][e] - rows[a][b] - rows[c][e]


class TspAdapter(ProblemAdapter):
    name = "tsp"

    def __init__(self, inst: TspInstance):
        self.inst = inst
        self._spec = PermutationSpec(inst.n)
        self._dist_rows = inst.dist.tolist()
        self._dist_flat = np.ascontiguousarray(inst.dist).reshape(-1)
        self._cols = np.arange(inst.n)

    @property
    def genome_spec(self) -> PermutationSpec:
        return self._spec

    def evaluate(self, genome: Permutation) -> float:
        return cycle_length(self.inst, genome)

    def evaluate_many(self, genomes: Sequence[Permutation]) -> List[float]:
        if len(genomes) <= 2:
            return [cycle_length(self.inst, g) for g in genomes]
        m = np.stack([g.order for g in genomes])
        d = self.inst.dist
        objs = d[m[:, :-1], m[:, 1:]].sum(axis=1) + d[m[:, -1], m[:, 0]]
        return objs.tolist()

    def random_solution(self, rng: Rng) -> Permutation:
        return random_permutation(self.inst.n, rng)

    def initial_cursor(self):
        return identity_permutation(self.inst.n).order

    def next_solution(self, cursor):
        if cursor is None:
            return None
        genome = Permutation(cursor)
        return genome, lex_successor(cursor)

    def unary(self, genome: Permutation, rng: Rng, op_state: Any = None) -> Permutation:
        return two_opt(genome, rng)

    def binary(self, a: Permutation, b: Permutation, rng: Rng) -> Permutation:
        k = rng.py.randint(1, len(a) - 1)
        return single_point_crossover(a, b, k)

    def ternary(self, a: Permutation, b: Permutation, c: Permutation, rng: Rng) -> Permutation:
        return sorted_pairs_ternary(a, b, c)

    # -- fast paths ---------------------------------------------------------

    def unary_moves(self, genome, objective, k, rng, op_state=None):
        rows = self._dist_rows
        p = genome.order.tolist()
        arr = genome.order
        n = self.inst.n
        randrange = rng.py.randrange
        moves = []
        for _ in range(k):
            i = randrange(n - 1)
            j = randrange(i + 1, n)
            obj = objective + _reversal_delta(rows, p, n, i, j)
            moves.append((obj, _Reversal(arr, i, j)))
        return moves

    def ternary_batch(self, genomes, triples, rng):
        m = np.stack([g.order for g in genomes])
        idx = np.asarray(triples)
        out = sorted_pairs_ternary_rows(m[idx[:, 0]], m[idx[:, 1]], m[idx[:, 2]])
        d = self.inst.dist
        objs = d[out[:, :-1], out[:, 1:]].sum(axis=1) + d[out[:, -1], out[:, 0]]
        return objs.tolist(), lambda i: Permutation(out[i])

    def mutation_batch(self, genomes, objectives, rng, op_state=None):
        rows = self._dist_rows
        n = self.inst.n
        randrange = rng.py.randrange
        children = []
        objs = []
        for genome, objective in zip(genomes, objectives):
            i = randrange(n - 1)
            j = randrange(i + 1, n)
            p = genome.order.tolist()
            objs.append(objective + _reversal_delta(rows, p, n, i, j))
            out = genome.order.copy()
            out[i : j + 1] = out[i : j + 1][::-1]
            children.append(Permutation(out))
        return children, objs

    # -- population workspace for the difference-based method -----------------

    def make_de_cache(self, genomes):
        m = np.stack([g.order for g in genomes])
        objs = np.asarray(self.evaluate_many(genomes))
        return _TspDeCache(m, objs)

    def de_generation(self, cache, triples):
        m = cache.matrix
        n = self.inst.n
        v = m.take(triples[:, 0], 0) - m.take(triples[:, 1], 0) + m.take(triples[:, 2], 0)
        # unique keys (value, position) make the default sort match the
        # stable sorted-pairs operator exactly
        out = np.argsort(v * n + self._cols, axis=1)
        d = self._dist_flat
        objs = d.take(out[:, :-1] * n + out[:, 1:]).sum(axis=1) + d.take(out[:, -1] * n + out[:, 0])
        return _TspDeBatch(out, objs)

    def de_cache_set(self, cache, i, genome, objective):
        cache.matrix[i] = genome.order
        cache.objs[i] = objective


class _Reversal:
    """Deferred 2-opt move: materializes the reversed permutation on demand."""

    __slots__ = ("p", "i", "j")

    def __init__(self, p, i, j):
        self.p = p
        self.i = i
        self.j = j

    def __call__(self) -> Permutation:
        out = self.p.copy()
        out[self.i : self.j + 1] = out[self.i : self.j + 1][::-1]
        return Permutation(out)


class _TspDeCache:
    __slots__ = ("matrix", "objs")

    def __init__(self, matrix, objs):
        self.matrix = matrix
        self.objs = objs


class _TspDeBatch:
    __slots__ = ("out", "objs")

    def __init__(self, out, objs):
        self.out = out
        self.objs = objs

    def genome(self, i) -> Permutation:
        return Permutation(self.out[i])
