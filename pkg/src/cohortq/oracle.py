"""Naive in-memory reference evaluator.

Evaluates birth selection, age selection and cohort aggregation by direct
set construction over plain tuple lists, exactly as the operator
definitions read. Deliberately shares nothing with the columnar executor
beyond the core predicate evaluator and age normalization, so agreement
between the two is strong evidence the compressed pipeline is right.

Meant for correctness checking at small scale, not for performance.
"""
from __future__ import annotations

from typing import Optional, Sequence

from .core import (
    NOT_BORN,
    ActivitySchema,
    ActivityTuple,
    BirthInfo,
    Predicate,
    eval_predicate,
    normalize_age,
)
from .executor import CohortResultRow
from .query import QuerySpec, SelectItem


def _sorted(tuples: Sequence[ActivityTuple]) -> list[ActivityTuple]:
    return sorted(tuples, key=ActivityTuple.sort_key)


def oracle_birth(tuples: Sequence[ActivityTuple], user: str, birth_action: str) -> BirthInfo:
    """Birth of one user: minimum time over their birth-action tuples.

    The index is relative to the user's block in primary-key order.
    """
    ordered = _sorted(tuples)
    block = [t for t in ordered if t.user == user]
    hits = [t.time for t in block if t.action == birth_action]
    if not hits:
        return NOT_BORN
    birth_time = min(hits)
    for idx, t in enumerate(block):
        if t.time == birth_time and t.action == birth_action:
            return BirthInfo(birth_time, idx)
    raise AssertionError("birth tuple vanished between scans")


def _births(tuples: Sequence[ActivityTuple], birth_action: str) -> dict[str, ActivityTuple]:
    """Birth tuple per born user."""
    best: dict[str, ActivityTuple] = {}
    for t in _sorted(tuples):
        if t.action == birth_action and t.user not in best:
            best[t.user] = t
    return best


def birth_select(tuples: Sequence[ActivityTuple], predicate: Optional[Predicate],
                 birth_action: str, schema: ActivitySchema) -> list[ActivityTuple]:
    """All tuples of users whose birth tuple satisfies the predicate.

    Users who never performed the birth action qualify never.
    """
    births = _births(tuples, birth_action)
    keep: set[str] = set()
    for user, birth in births.items():
        if predicate is None or eval_predicate(
            predicate, lambda attr: schema.value_of(birth, attr)
        ):
            keep.add(user)
    return [t for t in _sorted(tuples) if t.user in keep]


def age_select(tuples: Sequence[ActivityTuple], predicate: Optional[Predicate],
               birth_action: str, schema: ActivitySchema,
               unit: str = "day") -> list[ActivityTuple]:
    """Birth-time rows of born users plus the later rows satisfying the
    predicate. Rows before the birth time, and users never born, drop."""
    births = _births(tuples, birth_action)
    out: list[ActivityTuple] = []
    for t in _sorted(tuples):
        birth = births.get(t.user)
        if birth is None:
            continue
        if t.time < birth.time:
            continue
        if t.time == birth.time:
            out.append(t)
            continue
        age = normalize_age(t.time - birth.time, unit)
        ok = predicate is None or eval_predicate(
            predicate,
            lambda attr: schema.value_of(t, attr),
            lambda attr: schema.value_of(birth, attr),
            age,
        )
        if ok:
            out.append(t)
    return out


def cohort_aggregate(tuples: Sequence[ActivityTuple], cohort_by: Sequence[str],
                     birth_action: str, aggregates: Sequence[SelectItem],
                     schema: ActivitySchema, unit: str = "day") -> list[CohortResultRow]:
    """Group by (birth-tuple cohort key, age) and aggregate positive-age rows.

    The cohort size counts distinct users assigned to the cohort, with no
    age filter, so a user with no positive-age rows still counts.
    """
    births = _births(tuples, birth_action)
    cohort_users: dict[tuple, set[str]] = {}
    buckets: dict[tuple, list[ActivityTuple]] = {}
    for t in _sorted(tuples):
        birth = births.get(t.user)
        if birth is None:
            continue
        key = tuple(schema.value_of(birth, attr) for attr in cohort_by)
        cohort_users.setdefault(key, set()).add(t.user)
        if t.time <= birth.time:
            continue
        age = normalize_age(t.time - birth.time, unit)
        buckets.setdefault((key, age), []).append(t)

    def compute(item: SelectItem, rows: list[ActivityTuple]):
        if item.func == "count":
            return len(rows)
        if item.func == "usercount":
            return len({t.user for t in rows})
        values = [schema.value_of(t, item.arg) for t in rows]
        if item.func == "sum":
            return sum(values)
        if item.func == "avg":
            return sum(values) / len(values)
        if item.func == "min":
            return min(values)
        return max(values)

    rows_out: list[CohortResultRow] = []
    for (key, age) in sorted(buckets.keys()):
        rows = buckets[(key, age)]
        values = tuple(compute(a, rows) for a in aggregates)
        rows_out.append(CohortResultRow(key, age, len(cohort_users[key]), values))
    return rows_out


def oracle_eval(spec: QuerySpec, schema: ActivitySchema,
                tuples: Sequence[ActivityTuple]) -> list[CohortResultRow]:
    """Evaluate a whole validated query by composing the three operators."""
    current = _sorted(tuples)
    if spec.birth_predicate is not None:
        current = birth_select(current, spec.birth_predicate, spec.birth_action, schema)
    if spec.age_predicate is not None:
        current = age_select(current, spec.age_predicate, spec.birth_action, schema,
                             spec.age_unit)
    return cohort_aggregate(current, spec.cohort_by, spec.birth_action,
                            spec.aggregate_items(), schema, spec.age_unit)
