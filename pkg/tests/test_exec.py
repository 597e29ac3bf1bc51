from cohortq.core import (
    AgeRef,
    Attr,
    BirthAttr,
    Comparison,
    And,
    Literal,
    Not,
)
from cohortq.executor import (
    ChunkScan,
    get_birth_tuple,
    materialize_selection,
    merge_partials,
    run_query,
)
from cohortq.plan import (
    AgeSelectNode,
    BirthSelectNode,
    CohortAggNode,
    LogicalPlan,
    ScanNode,
)
from cohortq.query import parse, validate


def _select_plan(birth_action, *selects, cohort_by=("country",)):
    return LogicalPlan(
        ScanNode("GameActions"),
        tuple(selects),
        CohortAggNode(tuple(cohort_by), birth_action, ()),
        "day",
    )


def _query(text, schema):
    return validate(parse(text), schema)


class TestChunkScanCursor:
    def test_user_navigation_and_skip(self, chunkset1):
        scan = ChunkScan(chunkset1)
        user, first, count = scan.get_next_user()
        assert (user, first, count) == ("001", 0, 5)

        row = scan.get_next()
        assert row.value("action") == "launch"
        skipped = scan.skip_cur_user()
        assert skipped == 4
        assert scan.stats.rows_decoded < 5

        assert scan.get_next_user() == ("002", 5, 3)
        assert scan.get_next_user() == ("003", 8, 2)
        assert scan.get_next_user() is None

    def test_skip_at_user_start_skips_full_run(self, chunkset1):
        scan = ChunkScan(chunkset1)
        scan.get_next_user()
        assert scan.skip_cur_user() == 5
        assert scan.stats.rows_decoded == 0

    def test_get_next_exhausts_at_run_end(self, chunkset1):
        scan = ChunkScan(chunkset1)
        scan.get_next_user()
        scan.get_next_user()  # user 002, 3 rows
        rows = []
        while (row := scan.get_next()) is not None:
            rows.append(row.value("gold"))
        assert rows == [0, 30, 40]


class TestGetBirthTuple:
    def test_launch_birth_is_first_row(self, chunkset1):
        scan = ChunkScan(chunkset1)
        scan.get_next_user()
        row = get_birth_tuple(scan, "launch")
        assert row.index == 0 and row.value("action") == "launch"

    def test_shop_birth_is_second_row(self, chunkset1):
        scan = ChunkScan(chunkset1)
        scan.get_next_user()
        row = get_birth_tuple(scan, "shop")
        assert row.index == 1 and row.value("gold") == 50

    def test_user_without_action_gives_none(self, chunkset1):
        scan = ChunkScan(chunkset1)
        scan.get_next_user()
        scan.skip_cur_user()
        scan.get_next_user()
        scan.skip_cur_user()
        scan.get_next_user()  # user 003: launch, fight
        assert get_birth_tuple(scan, "shop") is None


class TestBirthSelect:
    def test_australia_launch_keeps_player_001(self, chunkset1, tuples1):
        plan = _select_plan(
            "launch",
            BirthSelectNode(Comparison("=", Attr("country"), Literal("Australia"))),
        )
        got = materialize_selection(chunkset1, plan)
        assert set(got) == set(tuples1[0:5])

    def test_true_predicate_keeps_all_born_users(self, chunkset1, tuples1):
        plan = _select_plan("launch", BirthSelectNode(And(())))
        got = materialize_selection(chunkset1, plan)
        assert set(got) == set(tuples1)

    def test_dwarf_birth_role(self, chunkset1, tuples1):
        plan = _select_plan(
            "launch", BirthSelectNode(Comparison("=", Attr("role"), Literal("dwarf"))))
        got = materialize_selection(chunkset1, plan)
        assert set(got) == set(tuples1[0:5])

    def test_never_born_users_dropped(self, chunkset1, tuples1):
        plan = _select_plan("shop", BirthSelectNode(And(())))
        got = materialize_selection(chunkset1, plan)
        assert set(got) == set(tuples1[0:8])  # 003 never shopped


class TestAgeSelect:
    def test_shop_outside_china(self, chunkset1, tuples1):
        pred = And((
            Comparison("=", Attr("action"), Literal("shop")),
            Comparison("!=", Attr("country"), Literal("China")),
        ))
        plan = _select_plan("shop", AgeSelectNode(pred))
        got = materialize_selection(chunkset1, plan)
        expected = {tuples1[1], tuples1[2], tuples1[3], tuples1[6], tuples1[7]}
        assert set(got) == expected

    def test_same_role_as_birth(self, chunkset1, tuples1):
        pred = Comparison("=", Attr("role"), BirthAttr("role"))
        plan = _select_plan("shop", AgeSelectNode(pred))
        got = materialize_selection(chunkset1, plan)
        assert set(got) == {tuples1[1], tuples1[2], tuples1[6], tuples1[7]}

    def test_false_predicate_keeps_only_birth_tuples(self, chunkset1, tuples1):
        plan = _select_plan("shop", AgeSelectNode(Not(And(()))))
        got = materialize_selection(chunkset1, plan)
        assert set(got) == {tuples1[1], tuples1[6]}

    def test_age_bound_filter(self, chunkset1, tuples1):
        plan = _select_plan("launch", AgeSelectNode(Comparison("<", AgeRef(), Literal(2))))
        got = materialize_selection(chunkset1, plan)
        # births t1, t6, t9 plus age-1 rows t2 and t10
        assert set(got) == {tuples1[0], tuples1[1], tuples1[5], tuples1[8], tuples1[9]}


class TestCohortAgg:
    def test_launch_cohorts_sum_gold(self, schema1, chunkset1):
        spec = _query(
            'SELECT country, COHORTSIZE, AGE, Sum(gold) FROM GameActions '
            'BIRTH FROM action = "launch" COHORT BY country', schema1)
        rows = run_query(chunkset1, spec).rows
        assert [(r.key[0], r.age, r.size, r.values[0]) for r in rows] == [
            ("Australia", 1, 1, 50),
            ("Australia", 2, 1, 100),
            ("Australia", 3, 1, 50),
            ("China", 1, 1, 0),
            ("United States", 2, 1, 30),
            ("United States", 3, 1, 40),
        ]

    def test_shop_cohorts_avg_gold(self, schema1, chunkset1):
        spec = _query(
            'SELECT country, COHORTSIZE, AGE, Avg(gold) FROM GameActions '
            'BIRTH FROM action = "shop" AGE ACTIVITIES IN action = "shop" '
            'COHORT BY country', schema1)
        rows = run_query(chunkset1, spec).rows
        assert [(r.key[0], r.age, r.size, r.values[0]) for r in rows] == [
            ("Australia", 1, 1, 100.0),
            ("Australia", 2, 1, 50.0),
            ("United States", 2, 1, 40.0),
        ]

    def test_usercount_per_bucket(self, schema1, chunkset1):
        spec = _query(
            'SELECT country, AGE, UserCount() FROM GameActions '
            'BIRTH FROM action = "launch" COHORT BY country', schema1)
        rows = run_query(chunkset1, spec).rows
        assert {(r.key[0], r.age): r.values[0] for r in rows} == {
            ("Australia", 1): 1, ("Australia", 2): 1, ("Australia", 3): 1,
            ("China", 1): 1,
            ("United States", 2): 1, ("United States", 3): 1,
        }

    def test_empty_chunkset(self, schema1):
        from cohortq.storage import build_chunkset

        spec = _query(
            'SELECT country, COHORTSIZE FROM GameActions '
            'BIRTH FROM action = "launch" COHORT BY country', schema1)
        res = run_query(build_chunkset(schema1, []), spec)
        assert res.rows == []

    def test_no_positive_ages_gives_no_rows_but_counts_cohort(self, schema1):
        from cohortq.core import ActivityTuple
        from cohortq.ingest import sort_and_partition
        from cohortq.storage import build_chunkset

        lone = [ActivityTuple("solo", 1000, "launch", ("dwarf", "Australia"), (0,))]
        cs = build_chunkset(schema1, sort_and_partition(lone, 8))
        spec = _query(
            'SELECT country, COHORTSIZE, AGE, Sum(gold) FROM GameActions '
            'BIRTH FROM action = "launch" COHORT BY country', schema1)
        res = run_query(cs, spec)
        assert res.rows == []
        assert res.cohort_sizes == {("Australia",): 1}

    def test_all_ages_positive(self, schema1, chunkset1):
        spec = _query(
            'SELECT country, AGE, Count() FROM GameActions '
            'BIRTH FROM action = "shop" COHORT BY country', schema1)
        rows = run_query(chunkset1, spec).rows
        assert all(r.age > 0 for r in rows)

    def test_dense_and_hash_paths_agree(self, schema1, chunkset1_split):
        spec = _query(
            'SELECT country, COHORTSIZE, AGE, Sum(gold), UserCount(), '
            'Min(gold), Max(gold), Avg(gold), Count() FROM GameActions '
            'BIRTH FROM action = "launch" COHORT BY country', schema1)
        dense = run_query(chunkset1_split, spec, force_hash=False)
        hashed = run_query(chunkset1_split, spec, force_hash=True)
        assert dense.rows == hashed.rows

    def test_cohort_size_unchanged_by_tighter_age_predicate(self, schema1, chunkset1):
        loose = _query(
            'SELECT country, COHORTSIZE, AGE, Count() FROM GameActions '
            'BIRTH FROM action = "launch" AGE ACTIVITIES IN gold >= 0 '
            'COHORT BY country', schema1)
        tight = _query(
            'SELECT country, COHORTSIZE, AGE, Count() FROM GameActions '
            'BIRTH FROM action = "launch" AGE ACTIVITIES IN gold >= 0 AND gold > 40 '
            'COHORT BY country', schema1)
        assert (run_query(chunkset1, loose).cohort_sizes
                == run_query(chunkset1, tight).cohort_sizes)


class TestMergePartials:
    def test_split_equals_single_chunk(self, schema1, chunkset1, chunkset1_split):
        spec = _query(
            'SELECT country, COHORTSIZE, AGE, Sum(gold), Avg(gold), UserCount() '
            'FROM GameActions BIRTH FROM action = "launch" COHORT BY country',
            schema1)
        assert run_query(chunkset1, spec).rows == run_query(chunkset1_split, spec).rows

    def test_single_state_identity(self, schema1, chunkset1):
        spec = _query(
            'SELECT country, COHORTSIZE, AGE, Sum(gold) FROM GameActions '
            'BIRTH FROM action = "launch" COHORT BY country', schema1)
        res = run_query(chunkset1, spec)
        merged = merge_partials([], spec.aggregate_items())
        assert merged.cells == {} and merged.sizes == {}
        assert len(res.rows) == 6

    def test_threads_do_not_change_results(self, schema1, chunkset1_split):
        spec = _query(
            'SELECT country, COHORTSIZE, AGE, Avg(gold), UserCount() '
            'FROM GameActions BIRTH FROM action = "launch" COHORT BY country',
            schema1)
        seq = run_query(chunkset1_split, spec, threads=1)
        par = run_query(chunkset1_split, spec, threads=4)
        assert seq.rows == par.rows


class TestScanWork:
    def test_unqualified_users_cost_only_birth_scan(self, schema1, chunkset1):
        # Birth predicate matching nobody: each user costs just the rows
        # needed to reach their birth tuple (launch is everyone's first row).
        spec = _query(
            'SELECT country, COHORTSIZE FROM GameActions '
            'BIRTH FROM action = "launch" AND country = "Narnia" '
            'COHORT BY country', schema1)
        res = run_query(chunkset1, spec)
        assert res.stats.rows_decoded == 3  # one launch row per user

    def test_qualified_users_cost_at_most_their_run(self, schema1, chunkset1):
        spec = _query(
            'SELECT country, COHORTSIZE, AGE, Sum(gold) FROM GameActions '
            'BIRTH FROM action = "launch" COHORT BY country', schema1)
        res = run_query(chunkset1, spec)
        assert res.stats.rows_decoded <= 10

    def test_pruned_chunks_never_open(self, schema1, chunkset1_split):
        spec = _query(
            'SELECT country, COHORTSIZE FROM GameActions '
            'BIRTH FROM action = "shop" COHORT BY country', schema1)
        res = run_query(chunkset1_split, spec)
        # chunk 1 (user 003) has no shop action
        assert res.stats.chunks_opened == 1
        unpruned = run_query(chunkset1_split, spec, prune=False)
        assert unpruned.stats.chunks_opened == 2
        assert res.rows == unpruned.rows
