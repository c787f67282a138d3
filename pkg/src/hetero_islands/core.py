"""Shared domain types: genomes, evaluated solutions, method/planner configuration.

Genomes are immutable value objects. Four encodings are supported:

* ``Permutation`` over ``0..n-1`` (tours, packing orders),
* ``RealVector`` inside per-dimension box bounds,
* ``VertexSet`` over a fixed vertex universe,
* ``ParamRecord`` of named integer / real / boolean entries.

Every genome kind has a canonical text form (used by logs and the external
evaluator protocol) and a validator that checks the encoding invariants
against a :class:`GenomeSpec`.
"""

import itertools
import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np


class ConfigError(ValueError):
    """Raised for invalid configuration values."""


class EvaluationError(RuntimeError):
    """Raised when an objective evaluation fails (external evaluator only)."""


# ---------------------------------------------------------------------------
# RNG bundle
# ---------------------------------------------------------------------------


class Rng:
    """Per-worker random source: a scalar stream plus a vector stream.

    ``py`` (``random.Random``) drives control-flow decisions; ``np``
    (``numpy.random.Generator``) produces vector noise.  Both are derived
    deterministically from one seed string so runs are reproducible.
    """

    __slots__ = ("py", "np")

    def __init__(self, seed: Union[str, int]):
        self.py = random.Random(str(seed))
        self.np = np.random.default_rng(self.py.getrandbits(64))

    @classmethod
    def for_island(cls, seed: int, island: int) -> "Rng":
        return cls(f"{seed}/island/{island}")

    @classmethod
    def for_planner(cls, seed: int) -> "Rng":
        return cls(f"{seed}/planner")


# ---------------------------------------------------------------------------
# Genomes
# ---------------------------------------------------------------------------


def _fmt_real(v: float) -> str:
    # 17 significant digits: text -> float round-trips exactly.
    return format(float(v), ".17g")


class Permutation:
    __slots__ = ("order",)

    def __init__(self, order):
        arr = np.asarray(order, dtype=np.int64)
        arr.setflags(write=False)
        self.order = arr

    def __len__(self) -> int:
        return self.order.shape[0]

    def key(self) -> bytes:
        return self.order.tobytes()

    def __eq__(self, other) -> bool:
        return isinstance(other, Permutation) and self.order.tobytes() == other.order.tobytes()

    def __hash__(self) -> int:
        return hash((Permutation, self.order.tobytes()))

    def __repr__(self) -> str:
        return f"Permutation({self.order.tolist()})"


class RealVector:
    __slots__ = ("values", "bounds")

    def __init__(self, values, bounds):
        arr = np.asarray(values, dtype=np.float64)
        arr.setflags(write=False)
        self.values = arr
        self.bounds = bounds if isinstance(bounds, np.ndarray) else np.asarray(bounds, dtype=np.float64)

    def __len__(self) -> int:
        return self.values.shape[0]

    def key(self) -> bytes:
        return self.values.tobytes()

    def __eq__(self, other) -> bool:
        return isinstance(other, RealVector) and self.values.tobytes() == other.values.tobytes()

    def __hash__(self) -> int:
        return hash((RealVector, self.values.tobytes()))

    def __repr__(self) -> str:
        return f"RealVector({self.values.tolist()})"


class VertexSet:
    __slots__ = ("members", "n")

    def __init__(self, members: Iterable[int], n: int):
        self.members = frozenset(int(v) for v in members)
        self.n = int(n)

    def __len__(self) -> int:
        return len(self.members)

    def key(self):
        return (self.n, tuple(sorted(self.members)))

    def __eq__(self, other) -> bool:
        return isinstance(other, VertexSet) and self.n == other.n and self.members == other.members

    def __hash__(self) -> int:
        return hash((VertexSet, self.n, self.members))

    def __repr__(self) -> str:
        return f"VertexSet({sorted(self.members)}, n={self.n})"


class ParamRecord:
    """Named parameter assignment. Values keep their Python types
    (bool entries are ``bool``, integer entries ``int``, real entries ``float``)."""

    __slots__ = ("names", "values")

    def __init__(self, names: Sequence[str], values: Sequence):
        self.names = tuple(names)
        self.values = tuple(values)
        if len(self.names) != len(self.values):
            raise ValueError("names/values length mismatch")

    def key(self):
        return (self.names, self.values)

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ParamRecord)
            and self.names == other.names
            and self.values == other.values
        )

    def __hash__(self) -> int:
        return hash((ParamRecord, self.names, self.values))

    def __repr__(self) -> str:
        return "ParamRecord(%s)" % ", ".join(f"{k}={v}" for k, v in zip(self.names, self.values))


Genome = Union[Permutation, RealVector, VertexSet, ParamRecord]


# ---------------------------------------------------------------------------
# Genome specs (what an encoding must look like for a given problem)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PermutationSpec:
    size: int


@dataclass(frozen=True)
class RealVectorSpec:
    bounds: tuple  # ((lo, hi), ...) per dimension

    @property
    def dim(self) -> int:
        return len(self.bounds)


@dataclass(frozen=True)
class VertexSetSpec:
    size: int


@dataclass(frozen=True)
class ParamEntry:
    name: str
    kind: str  # "int" | "real" | "bool"
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in ("int", "real", "bool"):
            raise ConfigError(f"unknown parameter kind {self.kind!r}")
        if self.kind != "bool" and self.lo > self.hi:
            raise ConfigError(f"empty range for {self.name}: [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class ParamSpace:
    entries: tuple  # tuple[ParamEntry, ...]

    @property
    def names(self) -> tuple:
        return tuple(e.name for e in self.entries)

    def entry(self, name: str) -> ParamEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


GenomeSpec = Union[PermutationSpec, RealVectorSpec, VertexSetSpec, ParamSpace]


def validate_genome(genome: Genome, spec: GenomeSpec) -> Optional[str]:
    """Check ``genome`` against ``spec``.

    Returns ``None`` when all invariants hold, otherwise a description of the
    first violation (with its location).
    """
    if isinstance(spec, PermutationSpec):
        if not isinstance(genome, Permutation):
            return f"expected Permutation, got {type(genome).__name__}"
        order = genome.order
        n = spec.size
        if order.shape[0] != n:
            return f"length {order.shape[0]} != {n}"
        seen = np.zeros(n, dtype=bool)
        for pos, v in enumerate(order.tolist()):
            if v < 0 or v >= n:
                return f"index {v} out of range at position {pos}"
            if seen[v]:
                return f"index {v} duplicated"
            seen[v] = True
        return None

    if isinstance(spec, RealVectorSpec):
        if not isinstance(genome, RealVector):
            return f"expected RealVector, got {type(genome).__name__}"
        vals = genome.values
        if vals.shape[0] != spec.dim:
            return f"dimension {vals.shape[0]} != {spec.dim}"
        for i, v in enumerate(vals.tolist()):
            lo, hi = spec.bounds[i]
            if not math.isfinite(v):
                return f"dimension {i} not finite"
            if v < lo or v > hi:
                return f"dimension {i} out of bounds"
        return None

    if isinstance(spec, VertexSetSpec):
        if not isinstance(genome, VertexSet):
            return f"expected VertexSet, got {type(genome).__name__}"
        if genome.n != spec.size:
            return f"universe {genome.n} != {spec.size}"
        for v in genome.members:
            if v < 0 or v >= spec.size:
                return f"vertex {v} outside universe 0..{spec.size - 1}"
        return None

    if isinstance(spec, ParamSpace):
        if not isinstance(genome, ParamRecord):
            return f"expected ParamRecord, got {type(genome).__name__}"
        if genome.names != spec.names:
            return f"entry names {genome.names} != {spec.names}"
        for name, value, entry in zip(genome.names, genome.values, spec.entries):
            if entry.kind == "bool":
                if not isinstance(value, bool):
                    return f"{name} must be boolean"
            elif entry.kind == "int":
                if isinstance(value, bool) or not isinstance(value, int):
                    return f"{name} must be integral"
                if value < entry.lo or value > entry.hi:
                    return f"{name}={value} outside [{entry.lo}, {entry.hi}]"
            else:
                if not isinstance(value, (int, float)) or isinstance(value, bool):
                    return f"{name} must be real"
                if not math.isfinite(float(value)):
                    return f"{name} not finite"
                if value < entry.lo or value > entry.hi:
                    return f"{name}={value} outside [{entry.lo}, {entry.hi}]"
        return None

    raise TypeError(f"unknown genome spec {type(spec).__name__}")


# ---------------------------------------------------------------------------
# Canonical text serialization
# ---------------------------------------------------------------------------


def genome_to_text(genome: Genome) -> str:
    """Canonical whitespace-separated text form of a genome."""
    if isinstance(genome, Permutation):
        return " ".join(str(int(v)) for v in genome.order)
    if isinstance(genome, RealVector):
        return " ".join(_fmt_real(v) for v in genome.values)
    if isinstance(genome, VertexSet):
        return " ".join(str(v) for v in sorted(genome.members))
    if isinstance(genome, ParamRecord):
        parts = []
        for name, value in zip(genome.names, genome.values):
            if isinstance(value, bool):
                parts.append(f"{name}={int(value)}")
            elif isinstance(value, int):
                parts.append(f"{name}={value}")
            else:
                parts.append(f"{name}={_fmt_real(value)}")
        return " ".join(parts)
    raise TypeError(f"not a genome: {type(genome).__name__}")


def genome_from_text(text: str, spec: GenomeSpec) -> Genome:
    """Parse the canonical text form back into a genome for ``spec``."""
    if isinstance(spec, PermutationSpec):
        return Permutation([int(tok) for tok in text.split()])
    if isinstance(spec, RealVectorSpec):
        return RealVector([float(tok) for tok in text.split()], spec.bounds)
    if isinstance(spec, VertexSetSpec):
        return VertexSet((int(tok) for tok in text.split()), spec.size)
    if isinstance(spec, ParamSpace):
        given = {}
        for tok in text.split():
            name, _, raw = tok.partition("=")
            given[name] = raw
        values = []
        for entry in spec.entries:
            if entry.name not in given:
                raise ValueError(f"missing entry {entry.name}")
            raw = given[entry.name]
            if entry.kind == "bool":
                values.append(raw in ("1", "true", "True"))
            elif entry.kind == "int":
                values.append(int(raw))
            else:
                values.append(float(raw))
        return ParamRecord(spec.names, values)
    raise TypeError(f"unknown genome spec {type(spec).__name__}")


# ---------------------------------------------------------------------------
# Method / instance identities
# ---------------------------------------------------------------------------


class MethodKind(str, Enum):
    RS = "RS"  # random search
    HC = "HC"  # hill climbing
    SA = "SA"  # simulated annealing
    TS = "TS"  # tabu search
    EA = "EA"  # evolutionary algorithm
    DE = "DE"  # differential evolution
    BF = "BF"  # brute force (systematic enumeration)

    def __str__(self) -> str:  # keep log output compact
        return self.value


DEFAULT_CATALOG = (
    MethodKind.RS,
    MethodKind.HC,
    MethodKind.SA,
    MethodKind.TS,
    MethodKind.EA,
    MethodKind.DE,
    MethodKind.BF,
)

# Kinds that roam the search space broadly vs. kinds that refine locally.
# Used by the explore/exploit planner; overridable in PlannerConfig.
DEFAULT_EXPLORATION_KINDS = frozenset({MethodKind.RS, MethodKind.BF})


@dataclass(frozen=True, order=True)
class MethodInstanceId:
    """Identity of one running optimizer: island plus restart epoch."""

    island: int
    epoch: int

    def __str__(self) -> str:
        return f"{self.island}.{self.epoch}"

    @classmethod
    def parse(cls, text: str) -> "MethodInstanceId":
        island, _, epoch = text.partition(".")
        return cls(int(island), int(epoch))


# ---------------------------------------------------------------------------
# Lineage and evaluated solutions
# ---------------------------------------------------------------------------


class Lineage:
    """Immutable append-only history of the instances that shaped a solution.

    Stored as a shared-structure chain so appending is O(1) even though
    histories grow for the whole run.
    """

    __slots__ = ("instance", "prev", "length")

    def __init__(self, instance: MethodInstanceId, prev: Optional["Lineage"]):
        self.instance = instance
        self.prev = prev
        self.length = 1 + (prev.length if prev is not None else 0)

    @staticmethod
    def append(prev: Optional["Lineage"], instance: MethodInstanceId) -> "Lineage":
        return Lineage(instance, prev)

    def ids(self) -> list:
        """Materialize oldest-first."""
        out = []
        node = self
        while node is not None:
            out.append(node.instance)
            node = node.prev
        out.reverse()
        return out

    def counts(self) -> dict:
        """Occurrences per instance id."""
        out: dict = {}
        node = self
        while node is not None:
            out[node.instance] = out.get(node.instance, 0) + 1
            node = node.prev
        return out


class EvaluatedSolution:
    __slots__ = ("genome", "objective", "lineage", "origin_instance", "sequence_no")

    def __init__(self, genome, objective, lineage, origin_instance, sequence_no):
        if not math.isfinite(objective):
            raise ValueError(f"objective must be finite, got {objective!r}")
        self.genome = genome
        self.objective = float(objective)
        self.lineage = lineage
        self.origin_instance = origin_instance
        self.sequence_no = sequence_no

    def lineage_ids(self) -> list:
        return self.lineage.ids() if self.lineage is not None else []

    def __repr__(self) -> str:
        return f"EvaluatedSolution(obj={self.objective}, origin={self.origin_instance}, seq={self.sequence_no})"


def append_lineage(solution: EvaluatedSolution, instance: MethodInstanceId) -> EvaluatedSolution:
    """Return a copy of ``solution`` with ``instance`` appended to its history."""
    return EvaluatedSolution(
        solution.genome,
        solution.objective,
        Lineage.append(solution.lineage, instance),
        solution.origin_instance,
        solution.sequence_no,
    )


def sequence_counter(island: int = 0, islands: int = 1) -> Iterator[int]:
    """Creation counter for solutions, strided so islands never collide."""
    return itertools.count(island, max(1, islands))


# ---------------------------------------------------------------------------
# Configuration records
# ---------------------------------------------------------------------------


@dataclass
class MethodConfig:
    hc_neighbors: int = 10
    ea_pop: int = 10
    ea_mutation_rate: float = 0.9
    ea_crossover_rate: float = 0.1
    ea_tournament: int = 2
    ts_tabu_size: int = 50
    sa_temperature: float = 10_000.0
    sa_cooling_rate: float = 0.002
    de_pop: int = 50
    de_f: float = 1.0

    def __post_init__(self):
        if min(self.hc_neighbors, self.ea_pop, self.ts_tabu_size, self.de_pop, self.ea_tournament) < 1:
            raise ConfigError("method counts must be >= 1")
        for rate in (self.ea_mutation_rate, self.ea_crossover_rate):
            if not 0.0 <= rate <= 1.0:
                raise ConfigError("rates must lie in [0, 1]")
        if self.sa_temperature <= 0:
            raise ConfigError("temperature must be positive")
        if not 0.0 < self.sa_cooling_rate < 1.0:
            raise ConfigError("cooling rate must lie in (0, 1)")


@dataclass
class PlannerConfig:
    iterations: int = 50
    islands: int = 16
    runs: int = 9
    n_init: int = 5
    n_protect: int = 3
    n_patience: int = 3
    m_min: int = 3
    top_n: int = 10
    catalog: tuple = DEFAULT_CATALOG
    exploration_kinds: frozenset = DEFAULT_EXPLORATION_KINDS

    def __post_init__(self):
        if self.islands < 1:
            raise ConfigError("islands must be >= 1")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not self.catalog:
            raise ConfigError("catalog must not be empty")
        if self.m_min > len(self.catalog):
            raise ConfigError("m_min cannot exceed catalog size")
        if self.top_n < 1:
            raise ConfigError("top_n must be >= 1")
