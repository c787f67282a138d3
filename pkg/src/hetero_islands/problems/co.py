"""Box-constrained continuous minimization on four classic test functions.

The canonical forms below follow the usual textbook definitions (no rotations
or coordinate oscillations); each has a known minimizer with value 0. A
:class:`CoFunction` optionally translates the function so its minimum sits at
``x_opt`` with value ``f_opt``, which avoids biasing searches toward the
origin.

Operators: the local move adds uniform noise in [-0.0025, 0.0025] to every
coordinate (clamped to the box), crossover takes a coordinatewise weighted
average with uniform weights, and the ternary operator is the classic
difference step a + F * (b - c). Systematic enumeration walks a grid with
step 0.005, first coordinate fastest.
"""

import math
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence

import numpy as np

from ..core import RealVector, RealVectorSpec, Rng
from .base import ProblemAdapter

NOISE = 0.0025
GRID_STEP = 0.005
DEFAULT_BOUNDS = (-5.0, 5.0)


# ---------------------------------------------------------------------------
# Canonical functions. Each accepts a 1-D point or a 2-D batch of rows.
# ---------------------------------------------------------------------------


def _rows(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return z[None, :] if z.ndim == 1 else z


def _scalar_or_rows(out: np.ndarray, was_1d: bool):
    return float(out[0]) if was_1d else out


def bueche_rastrigin(z) -> Any:
    """Rastrigin with per-coordinate scaling, skewed on even coordinates
    in the positive halfspace. Minimum 0 at the origin."""
    was_1d = np.asarray(z).ndim == 1
    z = _rows(z)
    n = z.shape[1]
    expo = 0.5 * np.arange(n) / (n - 1) if n > 1 else np.zeros(1)
    s = 10.0**expo
    scale = np.broadcast_to(s, z.shape).copy()
    skew = (z > 0) & (np.arange(n) % 2 == 0)
    scale[skew] *= 10.0
    t = scale * z
    out = 10.0 * (n - np.cos(2 * np.pi * t).sum(axis=1)) + (t**2).sum(axis=1)
    return _scalar_or_rows(out, was_1d)


def rosenbrock(z) -> Any:
    """Sum of 100(z_i^2 - z_{i+1})^2 + (z_i - 1)^2. Minimum 0 at all ones."""
    was_1d = np.asarray(z).ndim == 1
    z = _rows(z)
    a = z[:, :-1]
    b = z[:, 1:]
    out = (100.0 * (a**2 - b) ** 2 + (a - 1.0) ** 2).sum(axis=1)
    return _scalar_or_rows(out, was_1d)


def different_powers(z) -> Any:
    """sqrt of the sum of |z_i|^(2 + 4 i/(n-1)). Minimum 0 at the origin."""
    was_1d = np.asarray(z).ndim == 1
    z = _rows(z)
    n = z.shape[1]
    expo = 2.0 + (4.0 * np.arange(n) / (n - 1) if n > 1 else np.zeros(1))
    out = np.sqrt((np.abs(z) ** expo).sum(axis=1))
    return _scalar_or_rows(out, was_1d)


def schaffers_f7(z) -> Any:
    """Mean of sqrt(s_i)(1 + sin^2(50 s_i^0.2)) squared, s_i from adjacent
    coordinate pairs. Minimum 0 at the origin."""
    was_1d = np.asarray(z).ndim == 1
    z = _rows(z)
    s = np.sqrt(z[:, :-1] ** 2 + z[:, 1:] ** 2)
    term = np.sqrt(s) + np.sqrt(s) * np.sin(50.0 * s**0.2) ** 2
    out = (term.mean(axis=1)) ** 2
    return _scalar_or_rows(out, was_1d)


CANONICAL = {
    "f04": bueche_rastrigin,
    "f08": rosenbrock,
    "f14": different_powers,
    "f17": schaffers_f7,
}

# Point where each canonical function attains 0.
_BASE_MIN = {"f04": 0.0, "f08": 1.0, "f14": 0.0, "f17": 0.0}


@dataclass
class CoFunction:
    """One benchmark function with an optional affine shift.

    ``evaluate(x) = canonical(x - x_opt + base_min) + f_opt`` so that the
    minimum value ``f_opt`` is attained exactly at ``x_opt``.

    Batches go through the vectorized canonical functions; single points use
    a plain-Python evaluator (an order of magnitude less call overhead, which
    dominates the single-incumbent methods).
    """

    kind: str
    dim: int = 10
    x_opt: Optional[np.ndarray] = None
    f_opt: float = 0.0
    bounds_lo: float = DEFAULT_BOUNDS[0]
    bounds_hi: float = DEFAULT_BOUNDS[1]

    def __post_init__(self):
        if self.kind not in CANONICAL:
            raise ValueError(f"unknown function {self.kind!r}; choose from {sorted(CANONICAL)}")
        if self.dim < 2:
            raise ValueError("dimension must be >= 2")
        if self.x_opt is None:
            self.x_opt = np.zeros(self.dim)
        self.x_opt = np.asarray(self.x_opt, dtype=np.float64)
        if self.x_opt.shape != (self.dim,):
            raise ValueError("x_opt dimension mismatch")
        self._fn = CANONICAL[self.kind]
        self._offset = self.x_opt - _BASE_MIN[self.kind]
        self._offset_list = self._offset.tolist()
        n = self.dim
        self._scale = (10.0 ** (0.5 * np.arange(n) / (n - 1))).tolist()
        self._expo = (2.0 + 4.0 * np.arange(n) / (n - 1)).tolist()

    def __call__(self, x) -> Any:
        return self._fn(np.asarray(x, dtype=np.float64) - self._offset) + self.f_opt

    def value_of(self, values: Sequence[float]) -> float:
        """Objective of one point given as a plain sequence."""
        off = self._offset_list
        z = [values[i] - off[i] for i in range(self.dim)]
        kind = self.kind
        if kind == "f04":
            total_cos = 0.0
            total_sq = 0.0
            scale = self._scale
            for i, zi in enumerate(z):
                s = scale[i]
                if zi > 0 and i % 2 == 0:
                    s *= 10.0
                t = s * zi
                total_cos += math.cos(2 * math.pi * t)
                total_sq += t * t
            return 10.0 * (self.dim - total_cos) + total_sq + self.f_opt
        if kind == "f08":
            total = 0.0
            for i in range(self.dim - 1):
                a = z[i]
                d = a * a - z[i + 1]
                e = a - 1.0
                total += 100.0 * d * d + e * e
            return total + self.f_opt
        if kind == "f14":
            expo = self._expo
            total = 0.0
            for i, zi in enumerate(z):
                total += abs(zi) ** expo[i]
            return math.sqrt(total) + self.f_opt
        # f17
        total = 0.0
        for i in range(self.dim - 1):
            s = math.sqrt(z[i] * z[i] + z[i + 1] * z[i + 1])
            r = math.sqrt(s)
            sin_term = math.sin(50.0 * s**0.2)
            total += r + r * sin_term * sin_term
        mean = total / (self.dim - 1)
        return mean * mean + self.f_opt


class CoAdapter(ProblemAdapter):
    name = "co"

    def __init__(self, fn: CoFunction, de_weight: float = 1.0):
        self.fn = fn
        self.lo = fn.bounds_lo
        self.hi = fn.bounds_hi
        self.de_weight = de_weight
        self._spec = RealVectorSpec(tuple((self.lo, self.hi) for _ in range(fn.dim)))
        self._bounds_arr = np.asarray(self._spec.bounds)

    @property
    def genome_spec(self) -> RealVectorSpec:
        return self._spec

    def _wrap(self, values: np.ndarray) -> RealVector:
        return RealVector(values, self._bounds_arr)

    def evaluate(self, genome: RealVector) -> float:
        return self.fn.value_of(genome.values.tolist())

    def evaluate_many(self, genomes: Sequence[RealVector]) -> List[float]:
        if len(genomes) <= 3:
            value_of = self.fn.value_of
            return [value_of(g.values.tolist()) for g in genomes]
        return self.fn(np.stack([g.values for g in genomes])).tolist()

    def random_solution(self, rng: Rng) -> RealVector:
        return self._wrap(rng.np.uniform(self.lo, self.hi, self.fn.dim))

    def initial_cursor(self):
        return (0,) * self.fn.dim

    def next_solution(self, cursor):
        if cursor is None:
            return None
        steps_per_dim = int(math.floor((self.hi - self.lo) / GRID_STEP))
        lo, hi = self.lo, self.hi
        genome = self._wrap([min(lo + c * GRID_STEP, hi) for c in cursor])
        nxt = list(cursor)
        for d in range(len(nxt)):
            nxt[d] += 1
            if nxt[d] <= steps_per_dim:
                return genome, tuple(nxt)
            nxt[d] = 0
        return genome, None

    def unary(self, genome: RealVector, rng: Rng, op_state: Any = None) -> RealVector:
        uniform = rng.py.uniform
        lo, hi = self.lo, self.hi
        return self._wrap(
            [min(max(v + uniform(-NOISE, NOISE), lo), hi) for v in genome.values.tolist()]
        )

    def binary(self, a: RealVector, b: RealVector, rng: Rng) -> RealVector:
        w = rng.np.uniform(0.0, 1.0, self.fn.dim)
        return self._wrap(w * a.values + (1.0 - w) * b.values)

    def ternary(self, a: RealVector, b: RealVector, c: RealVector, rng: Rng) -> RealVector:
        trial = a.values + self.de_weight * (b.values - c.values)
        return self._wrap(np.clip(trial, self.lo, self.hi))

    # -- fast paths ---------------------------------------------------------

    def unary_moves(self, genome, objective, k, rng, op_state=None):
        if k == 1:
            uniform = rng.py.uniform
            lo, hi = self.lo, self.hi
            out = [min(max(v + uniform(-NOISE, NOISE), lo), hi) for v in genome.values.tolist()]
            return [(self.fn.value_of(out), _ListWrap(self, out))]
        noise = rng.np.uniform(-NOISE, NOISE, (k, self.fn.dim))
        batch = np.clip(genome.values + noise, self.lo, self.hi)
        objs = self.fn(batch)
        return [(float(objs[i]), _RowWrap(self, batch, i)) for i in range(k)]

    def mutation_batch(self, genomes, objectives, rng, op_state=None):
        k = len(genomes)
        m = np.empty((k, self.fn.dim))
        for i, g in enumerate(genomes):
            m[i] = g.values
        noise = rng.np.uniform(-NOISE, NOISE, m.shape)
        children = np.minimum(np.maximum(m + noise, self.lo), self.hi)
        objs = self.fn(children)
        return [self._wrap(children[i]) for i in range(k)], objs.tolist()

    def ternary_batch(self, genomes, triples, rng):
        m = np.stack([g.values for g in genomes])
        idx = np.asarray(triples)
        trials = np.clip(
            m[idx[:, 0]] + self.de_weight * (m[idx[:, 1]] - m[idx[:, 2]]), self.lo, self.hi
        )
        objs = self.fn(trials)
        return objs.tolist(), lambda i: self._wrap(trials[i])

    # -- population workspace for the difference-based method -----------------

    def make_de_cache(self, genomes):
        m = np.stack([g.values for g in genomes])
        return _CoDeCache(m, self.fn(m))

    def de_generation(self, cache, triples):
        m = cache.matrix
        trials = np.clip(
            m.take(triples[:, 0], 0)
            + self.de_weight * (m.take(triples[:, 1], 0) - m.take(triples[:, 2], 0)),
            self.lo,
            self.hi,
        )
        return _CoDeBatch(self, trials, self.fn(trials))

    def de_cache_set(self, cache, i, genome, objective):
        cache.matrix[i] = genome.values
        cache.objs[i] = objective


class _RowWrap:
    __slots__ = ("adapter", "batch", "i")

    def __init__(self, adapter, batch, i):
        self.adapter = adapter
        self.batch = batch
        self.i = i

    def __call__(self) -> RealVector:
        return self.adapter._wrap(self.batch[self.i])


class _ListWrap:
    __slots__ = ("adapter", "values")

    def __init__(self, adapter, values):
        self.adapter = adapter
        self.values = values

    def __call__(self) -> RealVector:
        return self.adapter._wrap(self.values)


class _CoDeCache:
    __slots__ = ("matrix", "objs")

    def __init__(self, matrix, objs):
        self.matrix = matrix
        self.objs = objs


class _CoDeBatch:
    __slots__ = ("adapter", "trials", "objs")

    def __init__(self, adapter, trials, objs):
        self.adapter = adapter
        self.trials = trials
        self.objs = objs

    def genome(self, i) -> RealVector:
        return self.adapter._wrap(self.trials[i])
