"""Common adapter surface shared by all problem families.

An adapter owns one problem instance and exposes:

* ``evaluate`` / ``evaluate_many`` -- the (minimized) objective,
* ``random_solution`` -- uniform sampling of the encoding,
* ``initial_cursor`` / ``next_solution`` -- systematic enumeration,
* ``unary`` / ``mutation`` / ``binary`` / ``ternary`` -- variation operators,
* ``unary_moves`` / ``ternary_batch`` -- batched fast paths used by the hot
  method loops. The defaults delegate to the scalar operators; adapters with
  cheap incremental or vectorized evaluation override them.

Adapters are immutable after construction; operators are pure given an Rng,
so islands may call them concurrently.
"""

from typing import Any, Callable, List, Optional, Sequence, Tuple

from ..core import EvaluationError, Genome, GenomeSpec, Rng, validate_genome


class ProblemAdapter:
    name: str = "abstract"
    deterministic: bool = True

    @property
    def genome_spec(self) -> GenomeSpec:
        raise NotImplementedError

    # -- objective ---------------------------------------------------------

    def evaluate(self, genome: Genome) -> float:
        raise NotImplementedError

    def evaluate_many(self, genomes: Sequence[Genome]) -> List[Optional[float]]:
        """Objective per genome; ``None`` marks a failed evaluation."""
        out: List[Optional[float]] = []
        for g in genomes:
            try:
                out.append(self.evaluate(g))
            except EvaluationError:
                out.append(None)
        return out

    # -- solution generation -------------------------------------------------

    def random_solution(self, rng: Rng) -> Genome:
        raise NotImplementedError

    def initial_cursor(self) -> Any:
        raise NotImplementedError

    def next_solution(self, cursor: Any) -> Optional[Tuple[Genome, Any]]:
        """Return ``(genome, next_cursor)`` or ``None`` once exhausted."""
        raise NotImplementedError

    # -- variation operators -------------------------------------------------

    def unary(self, genome: Genome, rng: Rng, op_state: Any = None) -> Genome:
        raise NotImplementedError

    def mutation(self, genome: Genome, rng: Rng, op_state: Any = None) -> Genome:
        """Mutation used by the evolutionary method; defaults to ``unary``."""
        return self.unary(genome, rng, op_state)

    def binary(self, a: Genome, b: Genome, rng: Rng) -> Genome:
        raise NotImplementedError

    def ternary(self, a: Genome, b: Genome, c: Genome, rng: Rng) -> Genome:
        raise NotImplementedError

    def make_op_state(self) -> Any:
        """Per-instance mutable operator state (adaptive step sizes etc.)."""
        return None

    # -- batched fast paths ----------------------------------------------------

    def unary_moves(
        self,
        genome: Genome,
        objective: float,
        k: int,
        rng: Rng,
        op_state: Any = None,
    ) -> List[Tuple[float, Callable[[], Genome]]]:
        """Propose ``k`` unary neighbors as ``(objective, realize)`` pairs.

        ``realize()`` materializes the neighbor genome; callers only realize
        the candidates they keep.
        """
        moves = []
        for _ in range(k):
            child = self.unary(genome, rng, op_state)
            try:
                obj = self.evaluate(child)
            except EvaluationError:
                continue
            moves.append((obj, _constant(child)))
        return moves

    def ternary_batch(
        self,
        genomes: Sequence[Genome],
        triples: Sequence[Tuple[int, int, int]],
        rng: Rng,
    ) -> Tuple[List[float], Callable[[int], Genome]]:
        """Apply the ternary operator to each index triple over ``genomes``.

        Returns the trial objectives plus a factory that materializes trial
        ``i`` on demand.
        """
        trials = [self.ternary(genomes[a], genomes[b], genomes[c], rng) for a, b, c in triples]
        return self.evaluate_many(trials), trials.__getitem__

    def make_de_cache(self, genomes: Sequence[Genome]):
        """Persistent population workspace for the difference-based method.

        ``None`` (the default) means no fast path; the method falls back to
        ``ternary_batch`` over the genome list each generation.
        """
        return None

    def mutation_batch(self, genomes: Sequence[Genome], objectives, rng: Rng, op_state=None):
        """Mutate several genomes of known objective at once, returning
        ``(children, child_objectives)``; ``None`` means no batched path."""
        return None

    def de_generation(self, cache, triples):
        raise NotImplementedError

    def de_cache_set(self, cache, i: int, genome: Genome, objective: float) -> None:
        raise NotImplementedError

    # -- checks ------------------------------------------------------------

    def check(self, genome: Genome) -> None:
        violation = validate_genome(genome, self.genome_spec)
        if violation is not None:
            raise ValueError(f"{self.name}: invalid genome: {violation}")


def _constant(value):
    return lambda: value
