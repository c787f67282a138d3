import pytest

from hetero_islands.core import (
    ConfigError,
    DEFAULT_CATALOG,
    MethodInstanceId,
    MethodKind,
    PlannerConfig,
    Rng,
)
from hetero_islands.planners import (
    FeatureLedger,
    PlanDecision,
    POLICIES,
    get_policy,
    initial_assignment,
    plan_step,
)

K = MethodKind


def start_ev(island, epoch, kind, iteration=0):
    return {
        "ev": "start",
        "t": 0,
        "instance": f"{island}.{epoch}",
        "island": island,
        "kind": kind.value,
        "iteration": iteration,
    }


def share_ev(island, epoch, kind, obj, genome="g", lineage=None):
    ev = {
        "ev": "share",
        "t": 0,
        "instance": f"{island}.{epoch}",
        "island": island,
        "kind": kind.value,
        "obj": obj,
        "genome": genome,
        "seq": 0,
    }
    if lineage is not None:
        ev["lineage"] = lineage
    return ev


def helped_ev(sender_island, sender_epoch, kind, receiver="0.0"):
    return {
        "ev": "helped",
        "t": 0,
        "receiver": receiver,
        "sender": f"{sender_island}.{sender_epoch}",
        "sender_kind": kind.value,
    }


def fresh_ledger(kinds, config=None):
    """One instance per island, kinds in island order; the catalog defaults to
    exactly the started kinds so the never-run precedence stays out of the way."""
    if config is None:
        catalog = tuple(dict.fromkeys(kinds))
        config = PlannerConfig(islands=len(kinds), catalog=catalog, m_min=min(3, len(catalog)))
    ledger = FeatureLedger(config)
    ledger.ingest([start_ev(i, 0, kind) for i, kind in enumerate(kinds)])
    return ledger


def age_everyone(ledger, iterations):
    for t in range(iterations):
        ledger.end_iteration(t)


class TestObserveShare:
    def test_first_share_sets_everything(self):
        ledger = fresh_ledger([K.HC])
        ledger.ingest([share_ev(0, 0, K.HC, 5.0, "a", lineage={"0.0": 1})])
        snap = ledger.snapshot(0)
        row = snap.rows[0]
        assert row.qi_w == 1 and row.qi_c == 1
        assert snap.global_best == 5.0
        assert ledger.archive == [(5.0, "a")]
        assert row.bc == 1

    def test_equal_share_does_not_count_as_improvement(self):
        ledger = fresh_ledger([K.HC])
        ledger.ingest([share_ev(0, 0, K.HC, 5.0, "a"), share_ev(0, 0, K.HC, 5.0, "b")])
        row = ledger.snapshot(0).rows[0]
        assert row.qi_w == 1  # only the first share improved
        assert row.qm_w == 2  # but both genomes were distinct

    def test_duplicate_genome_not_counted_as_material(self):
        ledger = fresh_ledger([K.HC])
        ledger.ingest([share_ev(0, 0, K.HC, 5.0, "a"), share_ev(0, 0, K.HC, 4.0, "a")])
        row = ledger.snapshot(0).rows[0]
        assert row.qm_w == 1
        assert row.qi_w == 2

    def test_average_fitness_accumulates(self):
        ledger = fresh_ledger([K.HC])
        ledger.ingest([share_ev(0, 0, K.HC, 4.0, "a"), share_ev(0, 0, K.HC, 8.0, "b")])
        row = ledger.snapshot(0).rows[0]
        assert row.af_w == pytest.approx(6.0)
        assert row.af_count_w == 2

    def test_helper_events_tally_to_sender(self):
        ledger = fresh_ledger([K.HC, K.EA])
        ledger.ingest([helped_ev(1, 0, K.EA), helped_ev(1, 0, K.EA)])
        rows = {str(r.instance): r for r in ledger.snapshot(0).rows}
        assert rows["1.0"].helper_w == 2
        assert rows["0.0"].helper_w == 0

    def test_bc_recomputed_on_new_best(self):
        ledger = fresh_ledger([K.HC, K.EA])
        ledger.ingest([share_ev(0, 0, K.HC, 5.0, "a", lineage={"0.0": 3, "1.0": 1})])
        rows = {str(r.instance): r for r in ledger.snapshot(0).rows}
        assert rows["0.0"].bc == 3 and rows["1.0"].bc == 1
        ledger.ingest([share_ev(1, 0, K.EA, 4.0, "b", lineage={"1.0": 2})])
        rows = {str(r.instance): r for r in ledger.snapshot(0).rows}
        assert rows["0.0"].bc == 0 and rows["1.0"].bc == 2


class TestArchive:
    def test_bounded_sorted_no_duplicates(self):
        cfg = PlannerConfig(islands=1, top_n=3, catalog=(K.HC,), m_min=1)
        ledger = fresh_ledger([K.HC], cfg)
        for i, obj in enumerate([5.0, 3.0, 7.0, 3.0, 1.0, 9.0]):
            ledger.ingest([share_ev(0, 0, K.HC, obj, genome=f"g{i}")])
        assert [obj for obj, _ in ledger.archive] == [1.0, 3.0, 3.0]
        # duplicate genome ignored entirely
        ledger.ingest([share_ev(0, 0, K.HC, 0.5, genome="g4")])
        assert [obj for obj, _ in ledger.archive] == [1.0, 3.0, 3.0]

    def test_qual_counts_entries_into_archive(self):
        cfg = PlannerConfig(islands=1, top_n=2, catalog=(K.HC,), m_min=1)
        ledger = fresh_ledger([K.HC], cfg)
        ledger.ingest(
            [
                share_ev(0, 0, K.HC, 5.0, "a"),
                share_ev(0, 0, K.HC, 6.0, "b"),
                share_ev(0, 0, K.HC, 7.0, "c"),  # lands beyond top 2: no credit
            ]
        )
        row = ledger.snapshot(0).rows[0]
        assert row.qual_w == 2


class TestWindows:
    def test_reset_after_iteration(self):
        ledger = fresh_ledger([K.HC])
        ledger.ingest([share_ev(0, 0, K.HC, 5.0, "a")])
        ledger.end_iteration(0)
        row = ledger.snapshot(1).rows[0]
        assert row.qi_w == 0 and row.qm_w == 0 and row.af_w is None
        assert row.qi_c == 1 and row.qm_c == 1 and row.af_c == pytest.approx(5.0)

    def test_recent_window_history(self):
        cfg = PlannerConfig(islands=1, n_patience=3, catalog=(K.HC,), m_min=1)
        ledger = fresh_ledger([K.HC], cfg)
        ledger.ingest([share_ev(0, 0, K.HC, 5.0, "a")])
        ledger.end_iteration(0)
        ledger.end_iteration(1)
        ledger.ingest([share_ev(0, 0, K.HC, 4.0, "b")])
        row = ledger.snapshot(2).rows[0]
        assert row.qi_recent == (1, 0, 1)

    def test_kind_feature_is_sum_of_instances(self):
        ledger = fresh_ledger([K.HC, K.HC, K.EA])
        ledger.ingest(
            [
                share_ev(0, 0, K.HC, 5.0, "a"),
                share_ev(1, 0, K.HC, 4.0, "b"),
                share_ev(2, 0, K.EA, 6.0, "c"),
            ]
        )
        snap = ledger.snapshot(0)
        sums = snap.kind_sum("qi_w")
        per_instance = {str(r.instance): r.qi_w for r in snap.rows}
        assert sums[K.HC] == per_instance["0.0"] + per_instance["1.0"]
        assert sums[K.EA] == per_instance["2.0"]


class TestReplay:
    def test_identical_event_stream_reproduces_snapshots(self):
        events = [start_ev(i, 0, k) for i, k in enumerate([K.HC, K.EA, K.RS])]
        events += [
            share_ev(0, 0, K.HC, 5.0, "a", lineage={"0.0": 1}),
            share_ev(1, 0, K.EA, 4.0, "b", lineage={"1.0": 1}),
            helped_ev(1, 0, K.EA),
        ]
        digests = []
        for _ in range(2):
            ledger = FeatureLedger(PlannerConfig(islands=3, catalog=(K.HC, K.EA, K.RS)))
            ledger.ingest(events)
            digests.append(ledger.snapshot(0).digest())
        assert digests[0] == digests[1]


class TestInitialAssignment:
    def test_round_robin_counts(self):
        rng = Rng("assign")
        kinds = initial_assignment(DEFAULT_CATALOG, 16, rng)
        counts = {k: kinds.count(k) for k in DEFAULT_CATALOG}
        assert sorted(counts.values(), reverse=True) == [3, 3, 2, 2, 2, 2, 2]
        # the first two catalog kinds get the extra instances
        assert counts[DEFAULT_CATALOG[0]] == 3 and counts[DEFAULT_CATALOG[1]] == 3

    def test_one_each(self):
        rng = Rng("assign")
        kinds = initial_assignment((K.HC, K.EA, K.RS), 3, rng)
        assert sorted(k.value for k in kinds) == ["EA", "HC", "RS"]

    def test_random_reproducible(self):
        a = initial_assignment(DEFAULT_CATALOG, 16, Rng("seeded"), randomize=True)
        b = initial_assignment(DEFAULT_CATALOG, 16, Rng("seeded"), randomize=True)
        assert a == b

    def test_rejects_zero_islands(self):
        with pytest.raises(ConfigError):
            initial_assignment(DEFAULT_CATALOG, 0, Rng("x"))


class TestPlanDecision:
    def test_kill_and_start_must_pair(self):
        with pytest.raises(ValueError):
            PlanDecision(kill=MethodInstanceId(0, 0), start=None)
        with pytest.raises(ValueError):
            PlanDecision(kill=None, start=K.HC)


def aged_ledger(kinds, shares=(), helped=(), iterations=4, config=None):
    """Instances old enough to be unprotected, with activity in the current window."""
    ledger = fresh_ledger(kinds, config)
    age_everyone(ledger, iterations)
    ledger.ingest(list(shares))
    ledger.ingest(list(helped))
    return ledger


class TestPolicies:
    def test_static_never_replaces(self):
        ledger = aged_ledger([K.HC, K.RS])
        decision = plan_step(get_policy("static"), ledger.snapshot(4), 4, 50, Rng("p"))
        assert decision.is_noop

    def test_improvements_kills_least_starts_most(self):
        shares = (
            [share_ev(0, 0, K.HC, 10.0 - i, genome=f"h{i}") for i in range(4)]
            + [share_ev(2, 0, K.EA, 20.0, genome="e0"), share_ev(2, 0, K.EA, 5.0, genome="e1")]
        )
        ledger = aged_ledger([K.HC, K.RS, K.EA], shares)
        snap = ledger.snapshot(4)
        rows = {str(r.instance): r for r in snap.rows}
        assert rows["0.0"].qi_w == 4 and rows["1.0"].qi_w == 0 and rows["2.0"].qi_w == 1
        decision = plan_step(get_policy("improvements"), snap, 4, 50, Rng("p"))
        assert decision.kill == MethodInstanceId(1, 0)
        assert decision.start == K.HC

    def test_improvements_respects_protection(self):
        cfg = PlannerConfig(islands=2, n_protect=3, catalog=(K.HC, K.RS), m_min=2)
        ledger = fresh_ledger([K.HC, K.RS], cfg)
        snap = ledger.snapshot(0)  # age 1 < 3 for everyone
        decision = plan_step(get_policy("improvements"), snap, 0, 50, Rng("p"))
        assert decision.is_noop
        assert decision.reason == "all-protected"

    def test_explore_exploit_boundary_formula(self):
        cfg = PlannerConfig(
            islands=2, exploration_kinds=frozenset({K.RS, K.BF}), catalog=(K.RS, K.BF), m_min=2
        )
        ledger = aged_ledger([K.RS, K.BF], config=cfg)
        snap = ledger.snapshot(4)
        # all instances exploring: 1 - t/T = 1 >= e/a = 1, so no replacement yet
        decision = plan_step(get_policy("explore-exploit"), snap, 0, 50, Rng("p"))
        assert decision.is_noop

    def test_explore_exploit_replaces_when_time_runs_short(self):
        cfg = PlannerConfig(
            islands=3,
            exploration_kinds=frozenset({K.RS, K.BF}),
            catalog=(K.RS, K.BF, K.HC),
            m_min=3,
        )
        shares = [
            share_ev(0, 0, K.RS, 9.0, "a"),
            share_ev(2, 0, K.HC, 3.0, "b"),
            share_ev(2, 0, K.HC, 2.0, "c"),
        ]
        ledger = aged_ledger([K.RS, K.BF, K.HC], shares, config=cfg)
        snap = ledger.snapshot(4)
        # e/a = 2/3 > 1 - 40/50
        decision = plan_step(get_policy("explore-exploit"), snap, 40, 50, Rng("p"))
        assert not decision.is_noop
        assert decision.kill == MethodInstanceId(1, 0)  # exploring instance with least qi
        assert decision.start == K.HC  # best cumulative average among exploiting kinds

    def test_helper_warmup_noop(self):
        ledger = aged_ledger([K.HC, K.EA])
        decision = plan_step(get_policy("helper"), ledger.snapshot(4), 3, 50, Rng("p"))
        assert decision.is_noop and decision.reason == "warmup"

    def test_helper_kills_least_helping_kind(self):
        helped = [helped_ev(1, 0, K.EA), helped_ev(1, 0, K.EA), helped_ev(2, 0, K.RS)]
        ledger = aged_ledger([K.HC, K.EA, K.RS], helped=helped)
        decision = plan_step(get_policy("helper"), ledger.snapshot(4), 10, 50, Rng("p"))
        assert decision.kill == MethodInstanceId(0, 0)  # HC helped nobody
        assert decision.start == K.EA

    def test_avg_fitness_silent_instance_counts_as_worst(self):
        shares = [share_ev(0, 0, K.HC, 1.0, "a"), share_ev(1, 0, K.EA, 2.0, "b")]
        ledger = aged_ledger([K.HC, K.EA, K.RS], shares)
        decision = plan_step(get_policy("avg-fitness"), ledger.snapshot(4), 10, 50, Rng("p"))
        assert decision.kill == MethodInstanceId(2, 0)  # shared nothing this window
        assert decision.start == K.HC  # best windowed mean

    def test_distinct_shares_policy(self):
        shares = [
            share_ev(0, 0, K.HC, 5.0, "a"),
            share_ev(0, 0, K.HC, 4.0, "b"),
            share_ev(1, 0, K.EA, 6.0, "c"),
        ]
        ledger = aged_ledger([K.HC, K.EA], shares)
        decision = plan_step(get_policy("distinct-shares"), ledger.snapshot(4), 10, 50, Rng("p"))
        assert decision.kill == MethodInstanceId(1, 0)
        assert decision.start == K.HC

    def test_top_shares_policy(self):
        cfg = PlannerConfig(islands=2, top_n=10, catalog=(K.HC, K.EA), m_min=2)
        shares = [
            share_ev(0, 0, K.HC, 5.0, "a"),
            share_ev(0, 0, K.HC, 4.0, "b"),
            share_ev(1, 0, K.EA, 6.0, "c"),
        ]
        ledger = aged_ledger([K.HC, K.EA], shares, config=cfg)
        decision = plan_step(get_policy("top-shares"), ledger.snapshot(4), 10, 50, Rng("p"))
        assert decision.kill == MethodInstanceId(1, 0)
        assert decision.start == K.HC

    def test_lineage_policy_uses_best_history(self):
        shares = [share_ev(0, 0, K.HC, 1.0, "best", lineage={"0.0": 5, "1.0": 1})]
        ledger = aged_ledger([K.HC, K.EA], shares, iterations=6)
        decision = plan_step(get_policy("lineage"), ledger.snapshot(6), 10, 50, Rng("p"))
        assert decision.kill == MethodInstanceId(1, 0)
        assert decision.start == K.HC

    def test_lineage_warmup(self):
        ledger = aged_ledger([K.HC, K.EA])
        decision = plan_step(get_policy("lineage"), ledger.snapshot(4), 2, 50, Rng("p"))
        assert decision.is_noop

    def test_lazy_noop_when_everyone_improved_recently(self):
        cfg = PlannerConfig(islands=2, n_patience=3, catalog=(K.HC, K.EA), m_min=2)
        ledger = fresh_ledger([K.HC, K.EA], cfg)
        for t in range(6):
            ledger.ingest([share_ev(0, 0, K.HC, 100.0 - t, genome=f"h{t}")])
            ledger.ingest([share_ev(1, 0, K.EA, 99.5 - t, genome=f"e{t}")])
            ledger.end_iteration(t)
        decision = plan_step(get_policy("lazy-improvements"), ledger.snapshot(6), 6, 50, Rng("p"))
        assert decision.is_noop

    def test_lazy_kills_stalled_instance(self):
        cfg = PlannerConfig(islands=2, n_patience=3, catalog=(K.HC, K.EA), m_min=2)
        ledger = fresh_ledger([K.HC, K.EA], cfg)
        for t in range(6):
            ledger.ingest([share_ev(0, 0, K.HC, 100.0 - t, genome=f"h{t}")])
            ledger.end_iteration(t)
        ledger.ingest([share_ev(0, 0, K.HC, 50.0, genome="h6")])
        decision = plan_step(get_policy("lazy-improvements"), ledger.snapshot(6), 6, 50, Rng("p"))
        assert decision.kill == MethodInstanceId(1, 0)
        assert decision.start == K.HC

    def test_random_policy_seeded(self):
        ledger = aged_ledger([K.HC, K.EA, K.RS])
        a = plan_step(get_policy("random"), ledger.snapshot(4), 10, 50, Rng("same"))
        b = plan_step(get_policy("random"), ledger.snapshot(4), 10, 50, Rng("same"))
        assert (a.kill, a.start) == (b.kill, b.start)
        assert not a.is_noop

    def test_random_diverse_redirects_start_to_keep_floor(self):
        cfg = PlannerConfig(islands=3, m_min=3)
        ledger = aged_ledger([K.HC, K.EA, K.RS], config=cfg)
        for attempt in range(40):
            decision = plan_step(
                get_policy("random-diverse"), ledger.snapshot(4), 10, 50, Rng(f"p{attempt}")
            )
            survivors = {k for i, k in enumerate([K.HC, K.EA, K.RS]) if i != decision.kill.island}
            survivors.add(decision.start)
            assert len(survivors) >= 3

    def test_never_run_precedence(self):
        cfg = PlannerConfig(islands=2, catalog=(K.HC, K.EA, K.RS), m_min=1)
        ledger = aged_ledger([K.HC, K.EA], config=cfg)
        for name in POLICIES:
            if name == "lazy-improvements":
                continue  # nothing is stalled, but precedence still applies below
            decision = plan_step(get_policy(name), ledger.snapshot(4), 10, 50, Rng("p"))
            assert decision.start == K.RS, name
            assert decision.reason == "never-run"

    def test_unknown_policy_rejected(self):
        with pytest.raises(ConfigError):
            get_policy("nope")
