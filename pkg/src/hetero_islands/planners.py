"""Feature bookkeeping over migration traffic and the replacement policies.

Each planning iteration the active policy picks one running method instance
to kill and one method kind to start in its place (``PlanDecision``). The
decision is driven by per-instance statistics accumulated from the shared
solutions observed since the previous iteration (windowed) or since the run
started (cumulative):

* ``qi``      times a share improved the global best,
* ``af``      mean objective of outgoing shares,
* ``qm``      distinct genomes shared (genome-value equality),
* ``qual``    shares that entered the global top-N archive,
* ``helper``  times a share improved another instance's own best,
* ``bc``      occurrences in the lineage of the current global best.

Shared precedence rule: while some catalog kind has never run, the policy
kills its least useful instance (by its own kill criterion; windowed ``qi``
for the criterion-free policies) and starts such a kind. Policies that
declare protection never kill an instance younger than ``n_protect``
iterations. Ties break toward the lower feature value, then the lower island
index; kind-level ties follow catalog order.
"""

import hashlib
import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .core import (
    ConfigError,
    MethodInstanceId,
    MethodKind,
    PlannerConfig,
    Rng,
)


# ---------------------------------------------------------------------------
# Ledger
# ---------------------------------------------------------------------------


class InstanceStats:
    __slots__ = (
        "instance",
        "kind",
        "island",
        "start_iteration",
        "alive",
        "qi_w",
        "qi_c",
        "af_sum_w",
        "af_count_w",
        "af_sum_c",
        "af_count_c",
        "qm_w",
        "qm_c",
        "qual_w",
        "qual_c",
        "helper_w",
        "helper_c",
        "bc",
        "qi_history",
        "shared_keys",
    )

    def __init__(self, instance, kind, island, start_iteration, patience):
        self.instance = instance
        self.kind = kind
        self.island = island
        self.start_iteration = start_iteration
        self.alive = True
        self.qi_w = self.qi_c = 0
        self.af_sum_w = self.af_count_w = 0.0
        self.af_sum_c = self.af_count_c = 0.0
        self.qm_w = self.qm_c = 0
        self.qual_w = self.qual_c = 0
        self.helper_w = self.helper_c = 0
        self.bc = 0
        self.qi_history: deque = deque(maxlen=max(1, patience))
        self.shared_keys: set = set()


@dataclass(frozen=True)
class InstanceSnapshot:
    instance: MethodInstanceId
    kind: MethodKind
    island: int
    start_iteration: int
    alive: bool
    age: int
    qi_w: int
    qi_c: int
    af_w: Optional[float]
    af_c: Optional[float]
    af_count_w: float
    af_count_c: float
    qm_w: int
    qm_c: int
    qual_w: int
    qual_c: int
    helper_w: int
    helper_c: int
    bc: int
    qi_recent: tuple  # window values for the last n_patience iterations, newest first


@dataclass
class LedgerSnapshot:
    iteration: int
    config: PlannerConfig
    rows: list
    global_best: Optional[float]
    kinds_ever: frozenset
    last_alive: dict  # kind -> last iteration with a live instance

    def alive_rows(self) -> list:
        return [r for r in self.rows if r.alive]

    def running_kinds(self) -> set:
        return {r.kind for r in self.rows if r.alive}

    def kind_sum(self, feature: str, kinds=None) -> Dict[MethodKind, float]:
        out: Dict[MethodKind, float] = {}
        for r in self.rows:
            if kinds is not None and r.kind not in kinds:
                continue
            out[r.kind] = out.get(r.kind, 0) + getattr(r, feature)
        return out

    def digest(self) -> str:
        payload = []
        for r in sorted(self.rows, key=lambda r: (r.island, r.instance.epoch)):
            payload.append(
                [
                    str(r.instance),
                    r.kind.value,
                    r.alive,
                    r.age,
                    r.qi_w,
                    r.qi_c,
                    None if r.af_w is None else format(r.af_w, ".17g"),
                    None if r.af_c is None else format(r.af_c, ".17g"),
                    r.qm_w,
                    r.qm_c,
                    r.qual_w,
                    r.qual_c,
                    r.helper_w,
                    r.helper_c,
                    r.bc,
                ]
            )
        blob = json.dumps(
            [self.iteration, None if self.global_best is None else format(self.global_best, ".17g"), payload],
            separators=(",", ":"),
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


class FeatureLedger:
    """Single-consumer accumulator over the run's event stream."""

    def __init__(self, config: PlannerConfig):
        self.config = config
        self.instances: Dict[str, InstanceStats] = {}
        self.global_best: Optional[float] = None
        self.archive: List[Tuple[float, str]] = []  # (objective, genome text) ascending
        self.kinds_ever: set = set()
        self.last_alive: Dict[MethodKind, int] = {}

    # -- event ingestion ---------------------------------------------------

    def ingest(self, events: Sequence[dict]) -> None:
        for ev in events:
            tag = ev["ev"]
            if tag == "share":
                self.observe_share(ev)
            elif tag == "helped":
                stats = self.instances.get(ev["sender"])
                if stats is not None:
                    stats.helper_w += 1
                    stats.helper_c += 1
            elif tag == "start":
                self.register(
                    MethodInstanceId.parse(ev["instance"]),
                    MethodKind(ev["kind"]),
                    ev["island"],
                    ev["iteration"],
                )
            elif tag == "kill":
                stats = self.instances.get(ev["instance"])
                if stats is not None:
                    stats.alive = False

    def register(self, instance: MethodInstanceId, kind: MethodKind, island: int, iteration: int) -> None:
        self.instances[str(instance)] = InstanceStats(
            instance, kind, island, iteration, self.config.n_patience
        )
        self.kinds_ever.add(kind)

    def observe_share(self, ev: dict) -> None:
        stats = self.instances.get(ev["instance"])
        if stats is None:
            return
        obj = ev["obj"]
        genome_text = ev["genome"]
        stats.af_sum_w += obj
        stats.af_count_w += 1
        stats.af_sum_c += obj
        stats.af_count_c += 1
        if genome_text not in stats.shared_keys:
            stats.shared_keys.add(genome_text)
            stats.qm_w += 1
            stats.qm_c += 1
        if self._archive_insert(obj, genome_text):
            stats.qual_w += 1
            stats.qual_c += 1
        if self.global_best is None or obj < self.global_best:
            stats.qi_w += 1
            stats.qi_c += 1
            self.global_best = obj
            self._recompute_bc(ev.get("lineage", {}))

    def _archive_insert(self, obj: float, genome_text: str) -> bool:
        top_n = self.config.top_n
        if any(text == genome_text for _, text in self.archive):
            return False
        lo, hi = 0, len(self.archive)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.archive[mid][0] <= obj:
                lo = mid + 1
            else:
                hi = mid
        if lo >= top_n:
            return False
        self.archive.insert(lo, (obj, genome_text))
        if len(self.archive) > top_n:
            self.archive.pop()
        return True

    def _recompute_bc(self, lineage_counts: Dict[str, int]) -> None:
        for stats in self.instances.values():
            stats.bc = 0
        for key, count in lineage_counts.items():
            stats = self.instances.get(key)
            if stats is not None:
                stats.bc = count

    # -- iteration boundary ----------------------------------------------------

    def end_iteration(self, t: int) -> None:
        """Close iteration ``t``: archive window values and reset windows."""
        for stats in self.instances.values():
            if stats.alive:
                stats.qi_history.appendleft(stats.qi_w)
                self.last_alive[stats.kind] = t
            stats.qi_w = 0
            stats.af_sum_w = 0.0
            stats.af_count_w = 0.0
            stats.qm_w = 0
            stats.qual_w = 0
            stats.helper_w = 0

    # -- snapshots -----------------------------------------------------------

    def snapshot(self, t: int) -> LedgerSnapshot:
        rows = []
        for stats in self.instances.values():
            rows.append(
                InstanceSnapshot(
                    instance=stats.instance,
                    kind=stats.kind,
                    island=stats.island,
                    start_iteration=stats.start_iteration,
                    alive=stats.alive,
                    age=t - stats.start_iteration + 1,
                    qi_w=stats.qi_w,
                    qi_c=stats.qi_c,
                    af_w=(stats.af_sum_w / stats.af_count_w) if stats.af_count_w else None,
                    af_c=(stats.af_sum_c / stats.af_count_c) if stats.af_count_c else None,
                    af_count_w=stats.af_count_w,
                    af_count_c=stats.af_count_c,
                    qm_w=stats.qm_w,
                    qm_c=stats.qm_c,
                    qual_w=stats.qual_w,
                    qual_c=stats.qual_c,
                    helper_w=stats.helper_w,
                    helper_c=stats.helper_c,
                    bc=stats.bc,
                    qi_recent=(stats.qi_w,) + tuple(stats.qi_history),
                )
            )
        rows.sort(key=lambda r: (r.island, r.instance.epoch))
        return LedgerSnapshot(
            iteration=t,
            config=self.config,
            rows=rows,
            global_best=self.global_best,
            kinds_ever=frozenset(self.kinds_ever),
            last_alive=dict(self.last_alive),
        )


# ---------------------------------------------------------------------------
# Decisions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlanDecision:
    kill: Optional[MethodInstanceId] = None
    start: Optional[MethodKind] = None
    reason: str = ""

    def __post_init__(self):
        if (self.kill is None) != (self.start is None):
            raise ValueError("kill and start must both be present or both absent")

    @property
    def is_noop(self) -> bool:
        return self.kill is None


def initial_assignment(catalog: Sequence[MethodKind], islands: int, rng: Rng, randomize: bool = False):
    """Method kind per island: round-robin over catalog order, or uniform
    random draws for the random policy."""
    if islands < 1:
        raise ConfigError("islands must be >= 1")
    if not catalog:
        raise ConfigError("catalog must not be empty")
    if randomize:
        return [catalog[rng.py.randrange(len(catalog))] for _ in range(islands)]
    return [catalog[i % len(catalog)] for i in range(islands)]


def _catalog_order(snap: LedgerSnapshot) -> dict:
    return {kind: i for i, kind in enumerate(snap.config.catalog)}


def _pick_min_kind(values: Dict[MethodKind, float], order: dict, kinds) -> Optional[MethodKind]:
    best = None
    for kind in kinds:
        v = values.get(kind, 0)
        if best is None or (v, order[kind]) < best[0]:
            best = ((v, order[kind]), kind)
    return best[1] if best else None


def _pick_max_kind(values: Dict[MethodKind, float], order: dict, kinds) -> Optional[MethodKind]:
    best = None
    for kind in kinds:
        v = values.get(kind, 0)
        if best is None or (-v, order[kind]) < best[0]:
            best = ((-v, order[kind]), kind)
    return best[1] if best else None


def _min_row(rows, feature: str):
    return min(rows, key=lambda r: (getattr(r, feature), r.island), default=None)


class Policy:
    """One replacement rule. Subclasses override :meth:`decide` and, when
    they kill by a feature, :meth:`kill_candidate`."""

    name = "abstract"
    protects = False
    random_init = False

    def eligible(self, snap: LedgerSnapshot):
        rows = snap.alive_rows()
        if self.protects:
            rows = [r for r in rows if r.age >= snap.config.n_protect]
        return rows

    def kill_candidate(self, snap: LedgerSnapshot, rng: Rng):
        """Least useful instance under this policy; windowed qi by default."""
        return _min_row(self.eligible(snap), "qi_w")

    def precedence_kill(self, snap: LedgerSnapshot, rng: Rng):
        """Kill choice while never-run kinds take precedence; policies without
        a feature criterion fall back to the lowest windowed qi."""
        return self.kill_candidate(snap, rng)

    def decide(self, snap: LedgerSnapshot, t: int, T: int, rng: Rng) -> PlanDecision:
        raise NotImplementedError


class StaticPolicy(Policy):
    """Never replaces anything; the portfolio stays as initialized."""

    name = "static"

    def decide(self, snap, t, T, rng):
        return PlanDecision(reason="static")


class RandomPolicy(Policy):
    """Kill a uniformly random instance, start a uniformly random kind."""

    name = "random"
    random_init = True

    def kill_candidate(self, snap, rng):
        rows = self.eligible(snap)
        return rows[rng.py.randrange(len(rows))] if rows else None

    def precedence_kill(self, snap, rng):
        return _min_row(self.eligible(snap), "qi_w")

    def decide(self, snap, t, T, rng):
        row = self.kill_candidate(snap, rng)
        if row is None:
            return PlanDecision(reason="no-candidate")
        start = snap.config.catalog[rng.py.randrange(len(snap.config.catalog))]
        return PlanDecision(row.instance, start, "random")


class RandomDiversePolicy(RandomPolicy):
    """Random replacement that keeps at least ``m_min`` distinct kinds alive.

    When the random choice would drop diversity below the floor, the started
    kind is redirected to the least recently run kind that is not currently
    running. The kill side falls back to the lowest windowed qi during the
    never-run precedence phase (see :func:`plan_step`).
    """

    name = "random-diverse"
    random_init = False

    def _least_recently_run(self, snap, exclude_running=True):
        order = _catalog_order(snap)
        running = snap.running_kinds()
        candidates = [k for k in snap.config.catalog if not (exclude_running and k in running)]
        if not candidates:
            return None
        return min(candidates, key=lambda k: (snap.last_alive.get(k, -1), order[k]))

    def decide(self, snap, t, T, rng):
        floor = min(snap.config.m_min, len(snap.config.catalog))
        rows = self.eligible(snap)
        if not rows:
            return PlanDecision(reason="no-candidate")
        running = snap.running_kinds()
        if len(running) < floor:
            row = rows[rng.py.randrange(len(rows))]
            start = self._least_recently_run(snap) or row.kind
            return PlanDecision(row.instance, start, "restore-diversity")
        row = rows[rng.py.randrange(len(rows))]
        start = snap.config.catalog[rng.py.randrange(len(snap.config.catalog))]
        survivors = {r.kind for r in snap.alive_rows() if r.instance != row.instance}
        survivors.add(start)
        if len(survivors) < floor:
            start = self._least_recently_run(snap) or start
        return PlanDecision(row.instance, start, "random")


class ExploreExploitPolicy(Policy):
    """Shift capacity from exploring kinds to exploiting kinds over time.

    While the remaining-time fraction 1 - t/T is smaller than the fraction of
    running exploration instances, the exploration instance with the least
    windowed qi is replaced by the exploitation kind with the best cumulative
    average share fitness.
    """

    name = "explore-exploit"
    protects = True

    def kill_candidate(self, snap, rng):
        rows = [r for r in self.eligible(snap) if r.kind in snap.config.exploration_kinds]
        return _min_row(rows, "qi_w")

    def precedence_kill(self, snap, rng):
        # prefer the usual criterion; with no exploring instance alive, fall
        # back to the overall least improving one
        return self.kill_candidate(snap, rng) or _min_row(self.eligible(snap), "qi_w")

    def decide(self, snap, t, T, rng):
        alive = snap.alive_rows()
        if not alive:
            return PlanDecision(reason="no-candidate")
        exploration = snap.config.exploration_kinds
        e = sum(1 for r in alive if r.kind in exploration)
        a = len(alive)
        if 1.0 - t / T >= e / a:
            return PlanDecision(reason="exploration-share-ok")
        row = self.kill_candidate(snap, rng)
        if row is None:
            return PlanDecision(reason="all-protected")
        order = _catalog_order(snap)
        exploit = [k for k in snap.config.catalog if k not in exploration]
        if not exploit:
            return PlanDecision(reason="no-exploitation-kinds")
        af = {k: snap_kind_af(snap, k, cumulative=True) for k in exploit}
        start = min(exploit, key=lambda k: (af[k] if af[k] is not None else math.inf, order[k]))
        return PlanDecision(row.instance, start, "exploit-takeover")


class HelperPolicy(Policy):
    """Replace the kind that helped other methods least with the kind that
    helped most; idle for the first ``n_init`` iterations."""

    name = "helper"

    def kill_candidate(self, snap, rng):
        rows = self.eligible(snap)
        if not rows:
            return None
        order = _catalog_order(snap)
        sums = snap.kind_sum("helper_w")
        kind = _pick_min_kind(sums, order, {r.kind for r in rows})
        return _min_row([r for r in rows if r.kind == kind], "helper_w")

    def decide(self, snap, t, T, rng):
        if t < snap.config.n_init:
            return PlanDecision(reason="warmup")
        row = self.kill_candidate(snap, rng)
        if row is None:
            return PlanDecision(reason="no-candidate")
        start = _pick_max_kind(snap.kind_sum("helper_w"), _catalog_order(snap), snap.config.catalog)
        return PlanDecision(row.instance, start, "helper")


class AvgFitnessPolicy(Policy):
    """Kill the instance whose outgoing shares averaged worst this window;
    duplicate the kind that averaged best. Instances that shared nothing
    count as worst."""

    name = "avg-fitness"
    protects = True

    def kill_candidate(self, snap, rng):
        rows = self.eligible(snap)
        if not rows:
            return None
        return max(rows, key=lambda r: (r.af_w if r.af_w is not None else math.inf, -r.island))

    def decide(self, snap, t, T, rng):
        row = self.kill_candidate(snap, rng)
        if row is None:
            return PlanDecision(reason="all-protected")
        order = _catalog_order(snap)
        af = {k: snap_kind_af(snap, k, cumulative=False) for k in snap.config.catalog}
        start = min(
            snap.config.catalog,
            key=lambda k: (af[k] if af[k] is not None else math.inf, order[k]),
        )
        return PlanDecision(row.instance, start, "avg-fitness")


class ImprovementsPolicy(Policy):
    """Replace the least improving instance with the most improving kind
    (windowed quantity of improvement)."""

    name = "improvements"
    protects = True

    def decide(self, snap, t, T, rng):
        row = self.kill_candidate(snap, rng)
        if row is None:
            return PlanDecision(reason="all-protected")
        start = _pick_max_kind(snap.kind_sum("qi_w"), _catalog_order(snap), snap.config.catalog)
        return PlanDecision(row.instance, start, "improvements")


class DistinctSharesPolicy(Policy):
    """Replace the instance that shared the fewest distinct genomes with the
    kind that shared the most."""

    name = "distinct-shares"
    protects = True

    def kill_candidate(self, snap, rng):
        return _min_row(self.eligible(snap), "qm_w")

    def decide(self, snap, t, T, rng):
        row = self.kill_candidate(snap, rng)
        if row is None:
            return PlanDecision(reason="all-protected")
        start = _pick_max_kind(snap.kind_sum("qm_w"), _catalog_order(snap), snap.config.catalog)
        return PlanDecision(row.instance, start, "distinct-shares")


class TopSharesPolicy(Policy):
    """Replace the instance contributing least to the global top-N archive
    with the kind contributing most."""

    name = "top-shares"

    def kill_candidate(self, snap, rng):
        return _min_row(self.eligible(snap), "qual_w")

    def decide(self, snap, t, T, rng):
        row = self.kill_candidate(snap, rng)
        if row is None:
            return PlanDecision(reason="no-candidate")
        start = _pick_max_kind(snap.kind_sum("qual_w"), _catalog_order(snap), snap.config.catalog)
        return PlanDecision(row.instance, start, "top-shares")


class LineagePolicy(Policy):
    """Use the history of the global best solution: the kind most common in
    its lineage replaces the kind least common; idle for ``n_init``."""

    name = "lineage"

    def kill_candidate(self, snap, rng):
        rows = self.eligible(snap)
        if not rows:
            return None
        order = _catalog_order(snap)
        sums = snap.kind_sum("bc")
        kind = _pick_min_kind(sums, order, {r.kind for r in rows})
        return _min_row([r for r in rows if r.kind == kind], "bc")

    def decide(self, snap, t, T, rng):
        if t < snap.config.n_init:
            return PlanDecision(reason="warmup")
        if snap.global_best is None:
            return PlanDecision(reason="no-best-yet")
        row = self.kill_candidate(snap, rng)
        if row is None:
            return PlanDecision(reason="no-candidate")
        start = _pick_max_kind(snap.kind_sum("bc"), _catalog_order(snap), snap.config.catalog)
        return PlanDecision(row.instance, start, "lineage")


class LazyImprovementsPolicy(Policy):
    """Replace only instances that made no improvement at all during the last
    ``n_patience`` iterations; start the kind with the most windowed qi."""

    name = "lazy-improvements"
    protects = True

    def kill_candidate(self, snap, rng):
        patience = snap.config.n_patience
        rows = [
            r
            for r in self.eligible(snap)
            if r.age >= patience
            and len(r.qi_recent) >= patience
            and sum(r.qi_recent[:patience]) == 0
        ]
        return _min_row(rows, "qi_w")

    def decide(self, snap, t, T, rng):
        row = self.kill_candidate(snap, rng)
        if row is None:
            return PlanDecision(reason="all-improving")
        start = _pick_max_kind(snap.kind_sum("qi_w"), _catalog_order(snap), snap.config.catalog)
        return PlanDecision(row.instance, start, "lazy-improvements")


# Kind-level average share fitness needs sums and counts; the snapshot keeps
# per-instance means, so recombine via counts embedded in the rows.
def snap_kind_af(snap: LedgerSnapshot, kind: MethodKind, cumulative: bool) -> Optional[float]:
    total = 0.0
    count = 0.0
    for r in snap.rows:
        if r.kind != kind:
            continue
        mean = r.af_c if cumulative else r.af_w
        n = r.af_count_c if cumulative else r.af_count_w
        if mean is not None and n:
            total += mean * n
            count += n
    return total / count if count else None


POLICIES = {
    policy.name: policy
    for policy in (
        StaticPolicy(),
        RandomPolicy(),
        RandomDiversePolicy(),
        ExploreExploitPolicy(),
        HelperPolicy(),
        AvgFitnessPolicy(),
        ImprovementsPolicy(),
        DistinctSharesPolicy(),
        TopSharesPolicy(),
        LineagePolicy(),
        LazyImprovementsPolicy(),
    )
}


def get_policy(name: str) -> Policy:
    try:
        return POLICIES[name]
    except KeyError:
        raise ConfigError(f"unknown planner {name!r}; choose from {sorted(POLICIES)}")


def plan_step(policy: Policy, snap: LedgerSnapshot, t: int, T: int, rng: Rng) -> PlanDecision:
    """One planning decision: the never-run precedence rule first, then the
    policy's own rule."""
    never_run = [k for k in snap.config.catalog if k not in snap.kinds_ever]
    if never_run:
        row = policy.precedence_kill(snap, rng)
        if row is None:
            return PlanDecision(reason="all-protected")
        if isinstance(policy, (RandomPolicy, RandomDiversePolicy)):
            start = never_run[rng.py.randrange(len(never_run))]
        else:
            start = never_run[0]
        return PlanDecision(row.instance, start, "never-run")
    return policy.decide(snap, t, T, rng)


# ---------------------------------------------------------------------------
# Planner loop
# ---------------------------------------------------------------------------


@dataclass
class PlannerRecord:
    iteration: int
    digest: str
    kill: Optional[str]
    start: Optional[str]
    reason: str
    ack: Optional[str]

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "digest": self.digest,
            "kill": self.kill,
            "start": self.start,
            "reason": self.reason,
            "ack": self.ack,
        }


def planner_loop(policy: Policy, runtime, config: PlannerConfig, rng: Rng):
    """Drive ``runtime`` for ``config.iterations`` planning iterations.

    Each iteration: advance to the boundary, fold the fresh events into the
    ledger, compute the decision, apply it (the runtime acknowledges with the
    new instance id), and reset the feature windows.

    Returns ``(records, trace, ledger_snapshots)``; the runtime object holds
    the event log and final best solution.
    """
    ledger = FeatureLedger(config)
    records: List[PlannerRecord] = []
    trace: List[dict] = []
    snapshots: List[LedgerSnapshot] = []
    T = config.iterations
    for t in range(T):
        events = runtime.advance_iteration()
        ledger.ingest(events)
        snap = ledger.snapshot(t)
        snapshots.append(snap)
        decision = plan_step(policy, snap, t, T, rng)
        ack = None
        if not decision.is_noop:
            island = decision.kill.island
            new_id = runtime.replace_instance(island, decision.start, iteration=t + 1)
            ack = str(new_id)
        kind_counts: Dict[str, int] = {}
        for island, kind in sorted(runtime.running_kinds().items()):
            kind_counts[kind.value] = kind_counts.get(kind.value, 0) + 1
        trace.append(
            {
                "iteration": t,
                "best": runtime.best_objective(),
                "kinds": kind_counts,
            }
        )
        records.append(
            PlannerRecord(
                iteration=t,
                digest=snap.digest(),
                kill=None if decision.kill is None else str(decision.kill),
                start=None if decision.start is None else decision.start.value,
                reason=decision.reason,
                ack=ack,
            )
        )
        ledger.end_iteration(t)
    return records, trace, snapshots
