"""Packing items of fixed volumes into as few unit bins as possible.

Solutions are permutations of the item indices, decoded with the first-fit
rule: items are placed in permutation order, each into the first bin whose
residual capacity admits it. The local move is a displacement that sends a
short block of consecutive positions to the end of the permutation; the block
length adapts to recent success and never exceeds 0.5 percent of the items.
"""

import math
from typing import Any

import numpy as np

from ..core import Permutation, PermutationSpec, Rng
from .base import ProblemAdapter
from .permutations import (
    identity_permutation,
    lex_successor,
    random_permutation,
    sorted_pairs_ternary,
)


class BppInstance:
    def __init__(self, volumes, capacity: float = 1.0):
        volumes = [float(v) for v in volumes]
        for i, v in enumerate(volumes):
            if v <= 0:
                raise ValueError(f"volume {i} must be positive")
            if v > capacity:
                raise ValueError(f"volume {i} exceeds capacity")
        self.volumes = volumes
        self.capacity = float(capacity)
        self.n = len(volumes)


FIT_EPS = 1e-12  # absorbs float dust when a volume exactly matches a residual


def first_fit_decode(inst: BppInstance, perm: Permutation) -> int:
    """Number of bins used when items are placed in permutation order."""
    volumes = inst.volumes
    cap = inst.capacity
    threshold = -FIT_EPS
    residual = []
    for item in perm.order.tolist():
        v = volumes[item]
        for b, r in enumerate(residual):
            if r - v >= threshold:
                residual[b] = r - v
                break
        else:
            residual.append(cap - v)
    return len(residual)


def max_block(n: int) -> int:
    """Largest displacement block: 0.5 percent of the items, at least one."""
    return max(1, math.ceil(0.005 * n))


class AdaptiveBlock:
    """Displacement block-size controller.

    Starts at the maximum allowed size, halves after 10 consecutive
    non-improving applications (floor 1) and resets to the maximum on any
    improvement.
    """

    PATIENCE = 10

    def __init__(self, n: int):
        self.limit = max_block(n)
        self.size = self.limit
        self.misses = 0

    def observe(self, improved: bool) -> None:
        if improved:
            self.size = self.limit
            self.misses = 0
        else:
            self.misses += 1
            if self.misses >= self.PATIENCE:
                self.size = max(1, self.size // 2)
                self.misses = 0


def displacement(perm: Permutation, rng: Rng, block: int) -> Permutation:
    """Move ``k <= block`` consecutive positions to the end."""
    n = len(perm)
    k = rng.py.randint(1, max(1, min(block, n - 1)))
    start = rng.py.randrange(n - k + 1)
    order = perm.order
    out = np.concatenate([order[:start], order[start + k :], order[start : start + k]])
    return Permutation(out)


def shift_mutation(perm: Permutation, rng: Rng) -> Permutation:
    """Move one random item to the last position."""
    n = len(perm)
    pos = rng.py.randrange(n)
    order = perm.order
    out = np.concatenate([order[:pos], order[pos + 1 :], order[pos : pos + 1]])
    return Permutation(out)


def order_crossover(p1: Permutation, p2: Permutation, i: int, j: int) -> Permutation:
    """Copy positions ``i..j`` from ``p1``; fill the remaining positions
    left to right with the missing values in the order they appear in ``p2``."""
    n = len(p1)
    out = np.empty(n, dtype=np.int64)
    out[i : j + 1] = p1.order[i : j + 1]
    taken = np.zeros(n, dtype=bool)
    taken[p1.order[i : j + 1]] = True
    fill = iter(p2.order[~taken[p2.order]])
    for pos in range(n):
        if pos < i or pos > j:
            out[pos] = next(fill)
    return Permutation(out)


class BppAdapter(ProblemAdapter):
    name = "bpp"

    def __init__(self, inst: BppInstance):
        self.inst = inst
        self._spec = PermutationSpec(inst.n)

    @property
    def genome_spec(self) -> PermutationSpec:
        return self._spec

    def evaluate(self, genome: Permutation) -> float:
        return float(first_fit_decode(self.inst, genome))

    def random_solution(self, rng: Rng) -> Permutation:
        return random_permutation(self.inst.n, rng)

    def initial_cursor(self):
        return identity_permutation(self.inst.n).order

    def next_solution(self, cursor):
        if cursor is None:
            return None
        return Permutation(cursor), lex_successor(cursor)

    def make_op_state(self) -> AdaptiveBlock:
        return AdaptiveBlock(self.inst.n)

    def unary(self, genome: Permutation, rng: Rng, op_state: Any = None) -> Permutation:
        block = op_state.size if isinstance(op_state, AdaptiveBlock) else max_block(self.inst.n)
        return displacement(genome, rng, block)

    def mutation(self, genome: Permutation, rng: Rng, op_state: Any = None) -> Permutation:
        return shift_mutation(genome, rng)

    def binary(self, a: Permutation, b: Permutation, rng: Rng) -> Permutation:
        n = len(a)
        i = rng.py.randrange(n)
        j = rng.py.randrange(i, n)
        return order_crossover(a, b, i, j)

    def ternary(self, a: Permutation, b: Permutation, c: Permutation, rng: Rng) -> Permutation:
        return sorted_pairs_ternary(a, b, c)
