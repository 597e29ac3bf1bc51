import io
import random
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cohortq.core import ActivityTuple, parse_timestamp
from cohortq.errors import CsvError, DataError
from cohortq.ingest import (
    DEFAULT_ACTIONS,
    GenSpec,
    generate,
    load_csv,
    scale_dataset,
    sort_and_partition,
    write_csv,
)

from .conftest import table1_csv_text


class TestLoadCsv:
    def test_table1(self):
        schema, tuples = load_csv(io.StringIO(table1_csv_text()))
        assert len(tuples) == 10
        assert tuples[0].user == "001"
        assert tuples[0].time == parse_timestamp("2013/05/19:1000")
        assert schema.dim_names == ("role", "country")
        assert schema.measures == ("gold",)

    def test_header_only(self):
        schema, tuples = load_csv(io.StringIO("player,time,action,role,country,gold\n"))
        assert tuples == []

    def test_duplicate_key_names_row(self):
        text = table1_csv_text().splitlines()
        dup = "\n".join([text[0], text[1], text[1]] + text[2:]) + "\n"
        with pytest.raises(CsvError) as err:
            load_csv(io.StringIO(dup))
        assert err.value.row == 2
        assert "duplicate" in str(err.value)

    def test_bad_timestamp_names_row(self):
        text = "player,time,action,gold\nalice,not_a_time,launch,3\n"
        with pytest.raises(CsvError) as err:
            load_csv(io.StringIO(text))
        assert err.value.row == 1

    def test_missing_field_rejected(self):
        text = "player,time,action,gold\nalice,100,launch,\n"
        with pytest.raises(CsvError):
            load_csv(io.StringIO(text))

    def test_schema_attr_missing_from_header(self, schema1):
        with pytest.raises(DataError):
            load_csv(io.StringIO("player,time,action\n"), schema1)

    def test_roundtrip_through_write_csv(self, schema1, tuples1):
        buf = io.StringIO()
        write_csv(schema1, tuples1, buf)
        buf.seek(0)
        schema, back = load_csv(buf, schema1)
        assert back == tuples1


class TestSortAndPartition:
    def test_shuffled_table1_restores_pk_order(self, tuples1):
        shuffled = list(tuples1)
        random.Random(3).shuffle(shuffled)
        runs = sort_and_partition(shuffled, 262_144)
        assert [t for run in runs for t in run] == tuples1

    def test_chunk_boundary_respects_users(self, tuples1):
        runs = sort_and_partition(tuples1, 8)
        assert [len(r) for r in runs] == [8, 2]
        assert {t.user for t in runs[0]} == {"001", "002"}
        assert {t.user for t in runs[1]} == {"003"}

    def test_oversized_user_stays_whole(self):
        tuples = [ActivityTuple("u", t, "go", (), ()) for t in range(10)]
        runs = sort_and_partition(tuples, 4)
        assert [len(r) for r in runs] == [10]

    def test_same_instant_actions_tie_break_lexicographic(self):
        a = ActivityTuple("u", 5, "b", (), ())
        b = ActivityTuple("u", 5, "a", (), ())
        runs = sort_and_partition([a, b], 8)
        assert [t.action for t in runs[0]] == ["a", "b"]

    @given(st.lists(
        st.tuples(st.integers(0, 5), st.integers(0, 50), st.sampled_from("abc")),
        max_size=60,
    ))
    def test_partition_preserves_multiset(self, raw):
        tuples = [ActivityTuple(f"u{u}", t, a, (), ()) for u, t, a in raw]
        runs = sort_and_partition(tuples, 7)
        assert Counter(t for run in runs for t in run) == Counter(tuples)


class TestGenerate:
    def test_deterministic_under_seed(self):
        _, first = generate(GenSpec(user_count=20, seed=9))
        _, second = generate(GenSpec(user_count=20, seed=9))
        assert first == second

    def test_user_count(self):
        _, tuples = generate(GenSpec(user_count=3))
        assert len({t.user for t in tuples}) == 3

    def test_action_vocabulary_is_sixteen(self):
        assert len(DEFAULT_ACTIONS) == 16
        _, tuples = generate(GenSpec(user_count=200, seed=1))
        assert {t.action for t in tuples} <= set(DEFAULT_ACTIONS)

    def test_first_action_is_launch(self):
        _, tuples = generate(GenSpec(user_count=50, seed=4))
        first_by_user = {}
        for t in sorted(tuples, key=ActivityTuple.sort_key):
            first_by_user.setdefault(t.user, t.action)
        assert set(first_by_user.values()) == {"launch"}

    def test_gold_only_on_shop(self):
        _, tuples = generate(GenSpec(user_count=30, seed=5))
        for t in tuples:
            gold = t.measures[1]
            assert (gold > 0) == (t.action == "shop")

    def test_pk_unique(self):
        _, tuples = generate(GenSpec(user_count=40, seed=6))
        keys = [t.sort_key() for t in tuples]
        assert len(set(keys)) == len(keys)


class TestScaleDataset:
    def test_identity_up_to_renaming(self, tuples1):
        scaled = scale_dataset(tuples1, 1)
        assert len(scaled) == len(tuples1)
        stripped = [t._replace(user=t.user.split("~")[0]) for t in scaled]
        assert Counter(stripped) == Counter(tuples1)

    def test_factor_two_on_table1(self, tuples1):
        scaled = scale_dataset(tuples1, 2)
        assert len(scaled) == 20
        assert len({t.user for t in scaled}) == 6
        per_user = {}
        for t in scaled:
            per_user.setdefault(t.user, []).append(t._replace(user=""))
        base = {}
        for t in tuples1:
            base.setdefault(t.user, []).append(t._replace(user=""))
        for user, rows in per_user.items():
            assert Counter(rows) == Counter(base[user.split("~")[0]])

    def test_bad_factor(self, tuples1):
        with pytest.raises(DataError):
            scale_dataset(tuples1, 0)

    def test_aggregates_scale_linearly(self, schema1, tuples1):
        # Sum/Count buckets and cohort sizes multiply by the factor when
        # the cohort key does not involve user ids; Avg stays put.
        from cohortq.executor import run_query
        from cohortq.query import parse, validate
        from cohortq.storage import build_chunkset

        spec = validate(parse(
            'SELECT country, COHORTSIZE, AGE, Sum(gold), Count(), Avg(gold) '
            'FROM GameActions BIRTH FROM action = "launch" COHORT BY country'),
            schema1)

        def rows_for(factor):
            tuples = scale_dataset(tuples1, factor)
            cs = build_chunkset(schema1, sort_and_partition(tuples, 16), 16)
            return run_query(cs, spec).rows

        base, tripled = rows_for(1), rows_for(3)
        assert len(base) == len(tripled)
        for b, t in zip(base, tripled):
            assert (b.key, b.age) == (t.key, t.age)
            assert t.size == 3 * b.size
            assert t.values[0] == 3 * b.values[0]   # Sum
            assert t.values[1] == 3 * b.values[1]   # Count
            assert t.values[2] == b.values[2]       # Avg
