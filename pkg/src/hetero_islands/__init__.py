"""Heterogeneous island-model optimization with online method replacement."""

from .core import (
    ConfigError,
    DEFAULT_CATALOG,
    EvaluatedSolution,
    EvaluationError,
    Genome,
    MethodConfig,
    MethodInstanceId,
    MethodKind,
    ParamRecord,
    Permutation,
    PlannerConfig,
    RealVector,
    Rng,
    VertexSet,
    append_lineage,
    genome_from_text,
    genome_to_text,
    validate_genome,
)
from .planners import POLICIES, PlanDecision, FeatureLedger, get_policy, plan_step
from .runtime import RunResult, VirtualClock, WallClock, run_experiment

__version__ = "0.1.0"
