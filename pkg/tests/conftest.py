import pytest
from hypothesis import settings

from cohortq.core import ActivitySchema, ActivityTuple, parse_timestamp
from cohortq.ingest import sort_and_partition
from cohortq.storage import build_chunkset

settings.register_profile("suite", deadline=None, max_examples=100)
settings.load_profile("suite")

TABLE1_ROWS = [
    ("001", "2013/05/19:1000", "launch", "dwarf", "Australia", 0),
    ("001", "2013/05/20:0800", "shop", "dwarf", "Australia", 50),
    ("001", "2013/05/20:1400", "shop", "dwarf", "Australia", 100),
    ("001", "2013/05/21:1400", "shop", "assassin", "Australia", 50),
    ("001", "2013/05/22:0900", "fight", "assassin", "Australia", 0),
    ("002", "2013/05/20:0900", "launch", "wizard", "United States", 0),
    ("002", "2013/05/21:1500", "shop", "wizard", "United States", 30),
    ("002", "2013/05/22:1700", "shop", "wizard", "United States", 40),
    ("003", "2013/05/20:1000", "launch", "bandit", "China", 0),
    ("003", "2013/05/21:1000", "fight", "bandit", "China", 0),
]


def table1_schema():
    return ActivitySchema(
        user_attr="player",
        time_attr="time",
        action_attr="action",
        dimensions=(("role", "string"), ("country", "string")),
        measures=("gold",),
        table_name="GameActions",
    )


def table1_tuples():
    return [
        ActivityTuple(u, parse_timestamp(t), a, (role, country), (gold,))
        for u, t, a, role, country, gold in TABLE1_ROWS
    ]


def table1_csv_text():
    lines = ["player,time,action,role,country,gold"]
    for u, t, a, role, country, gold in TABLE1_ROWS:
        lines.append(f"{u},{t},{a},{role},{country},{gold}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def schema1():
    return table1_schema()


@pytest.fixture
def tuples1():
    return table1_tuples()


@pytest.fixture
def chunkset1(schema1, tuples1):
    return build_chunkset(schema1, sort_and_partition(tuples1, 262_144))


@pytest.fixture
def chunkset1_split(schema1, tuples1):
    """Table 1 cut at chunk size 8: chunk 0 holds t1..t8, chunk 1 t9..t10."""
    return build_chunkset(schema1, sort_and_partition(tuples1, 8), 8)
