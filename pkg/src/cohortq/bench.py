"""Benchmark harness: eight canned cohort queries plus wall-clock timing.

The queries cover the operator space incrementally: plain aggregation,
birth selection, age selection, and all three combined, in both a
retention (UserCount) and a spending (Avg) flavor. Date and age-bound
parameters are adjustable per run.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

from .errors import QueryError
from .executor import run_query
from .query import parse, validate
from .storage import ChunkSet

DEFAULT_D1 = "2013-05-21"
DEFAULT_D2 = "2013-05-27"
DEFAULT_G = 7

QUERY_NAMES = ("q1", "q2", "q3", "q4", "q5", "q6", "q7", "q8")


def query_text(name: str, *, table: str = "GameActions",
               d1: str = DEFAULT_D1, d2: str = DEFAULT_D2, g: int = DEFAULT_G) -> str:
    """Text of one benchmark query against the standard game schema."""
    retention = f'SELECT country, COHORTSIZE, AGE, UserCount() FROM {table}'
    spending = f'SELECT country, COHORTSIZE, AGE, Avg(gold) FROM {table}'
    texts = {
        "q1": f'{retention} BIRTH FROM action = "launch" COHORT BY country',
        "q2": (f'{retention} BIRTH FROM action = "launch" AND '
               f'time BETWEEN "{d1}" AND "{d2}" COHORT BY country'),
        "q3": (f'{spending} BIRTH FROM action = "shop" '
               f'AGE ACTIVITIES IN action = "shop" COHORT BY country'),
        "q4": (f'{spending} BIRTH FROM action = "shop" AND '
               f'time BETWEEN "{d1}" AND "{d2}" AND role = "dwarf" AND '
               f'country IN ["China", "Australia", "United States"] '
               f'AGE ACTIVITIES IN action = "shop" AND country = Birth(country) '
               f'COHORT BY country'),
        "q5": (f'{retention} BIRTH FROM action = "launch" AND '
               f'time BETWEEN "{d1}" AND "{d2}" COHORT BY country'),
        "q6": (f'{spending} BIRTH FROM action = "shop" AND '
               f'time BETWEEN "{d1}" AND "{d2}" '
               f'AGE ACTIVITIES IN action = "shop" COHORT BY country'),
        "q7": (f'{retention} BIRTH FROM action = "launch" '
               f'AGE ACTIVITIES IN AGE < {g} COHORT BY country'),
        "q8": (f'{spending} BIRTH FROM action = "shop" '
               f'AGE ACTIVITIES IN action = "shop" AND AGE < {g} COHORT BY country'),
    }
    try:
        return texts[name.lower()]
    except KeyError:
        raise QueryError(f"unknown benchmark query {name!r} "
                         f"(expected one of {', '.join(QUERY_NAMES)})") from None


@dataclass
class BenchResult:
    name: str
    rows: int
    mean_seconds: float
    runs: list[float]


def run_benchmark(chunkset: ChunkSet, names, *, repeat: int = 5,
                  d1: str = DEFAULT_D1, d2: str = DEFAULT_D2, g: int = DEFAULT_G,
                  threads: int = 1) -> list[BenchResult]:
    """Run each named query ``repeat`` times and report wall times."""
    results = []
    table = chunkset.schema.table_name
    for name in names:
        text = query_text(name, table=table, d1=d1, d2=d2, g=g)
        spec = validate(parse(text), chunkset.schema)
        runs: list[float] = []
        row_count = 0
        for _ in range(max(1, repeat)):
            t0 = time.perf_counter()
            result = run_query(chunkset, spec, threads=threads)
            runs.append(time.perf_counter() - t0)
            row_count = len(result.rows)
        results.append(BenchResult(name.lower(), row_count, sum(runs) / len(runs), runs))
    return results
