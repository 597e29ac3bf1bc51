"""Logical plans: construction, birth-selection push-down, chunk pruning.

A plan is a linear chain Scan -> selections -> CohortAgg. Birth and age
selections over the same birth action commute, so the optimizer moves
every birth selection below every age selection; the scan layer can then
skip a disqualified user's remaining tuples outright.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

from .core import And, Attr, Between, Comparison, InList, Predicate, print_predicate
from .query import QuerySpec, SelectItem, AGG_CANON
from .storage import ChunkSet, chunk_has_action, chunk_range_overlaps


@dataclass(frozen=True)
class ScanNode:
    table: str


@dataclass(frozen=True)
class BirthSelectNode:
    predicate: Predicate


@dataclass(frozen=True)
class AgeSelectNode:
    predicate: Predicate


SelectNode = Union[BirthSelectNode, AgeSelectNode]


@dataclass(frozen=True)
class CohortAggNode:
    cohort_by: tuple[str, ...]
    birth_action: str
    aggregates: tuple[SelectItem, ...]


@dataclass(frozen=True)
class LogicalPlan:
    scan: ScanNode
    selects: tuple[SelectNode, ...]
    agg: CohortAggNode
    age_unit: str = "day"


@dataclass(frozen=True)
class ChunkPlan:
    chunk_ids: tuple[int, ...]
    plan: LogicalPlan


def build_plan(spec: QuerySpec) -> LogicalPlan:
    """Map a validated query to its operator chain.

    The whole birth predicate stays one selection: qualification is a
    single check against one birth tuple, so splitting conjuncts buys
    nothing.
    """
    selects: list[SelectNode] = []
    if spec.birth_predicate is not None:
        selects.append(BirthSelectNode(spec.birth_predicate))
    if spec.age_predicate is not None:
        selects.append(AgeSelectNode(spec.age_predicate))
    return LogicalPlan(
        scan=ScanNode(spec.table),
        selects=tuple(selects),
        agg=CohortAggNode(spec.cohort_by, spec.birth_action, spec.aggregate_items()),
        age_unit=spec.age_unit,
    )


def is_normal_form(plan: LogicalPlan) -> bool:
    seen_age = False
    for node in plan.selects:
        if isinstance(node, AgeSelectNode):
            seen_age = True
        elif seen_age:
            return False
    return True


def push_down_birth(plan: LogicalPlan) -> LogicalPlan:
    """Stable reorder putting every birth selection below every age
    selection. Sound because both operator kinds share the plan's single
    birth action."""
    births = tuple(n for n in plan.selects if isinstance(n, BirthSelectNode))
    ages = tuple(n for n in plan.selects if isinstance(n, AgeSelectNode))
    return replace(plan, selects=births + ages)


def _conjuncts(pred: Predicate) -> list[Predicate]:
    if isinstance(pred, And):
        out: list[Predicate] = []
        for p in pred.parts:
            out.extend(_conjuncts(p))
        return out
    return [pred]


def _int_range_bounds(pred: Predicate, int_columns: tuple[str, ...]):
    """(column, lo, hi) for a top-level conjunct that bounds an integer
    attribute, or None when the conjunct prunes nothing."""
    if isinstance(pred, Between) and isinstance(pred.operand, Attr):
        col = pred.operand.name
        if col in int_columns and isinstance(pred.low, int) and isinstance(pred.high, int):
            return col, pred.low, pred.high
        return None
    if isinstance(pred, InList) and isinstance(pred.operand, Attr):
        col = pred.operand.name
        if col in int_columns and all(isinstance(v, int) for v in pred.values) and pred.values:
            return col, min(pred.values), max(pred.values)
        return None
    if not isinstance(pred, Comparison):
        return None
    left, right = pred.left, pred.right
    if isinstance(right, Attr) and not isinstance(left, Attr):
        flipped = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "=", "!=": "!="}
        return _int_range_bounds(Comparison(flipped[pred.op], right, left), int_columns)
    if not isinstance(left, Attr) or left.name not in int_columns:
        return None
    from .core import Literal

    if not isinstance(right, Literal) or not isinstance(right.value, int):
        return None
    v = right.value
    lo, hi = -(1 << 62), 1 << 62
    if pred.op == "=":
        return left.name, v, v
    if pred.op == "<":
        return left.name, lo, v - 1
    if pred.op == "<=":
        return left.name, lo, v
    if pred.op == ">":
        return left.name, v + 1, hi
    if pred.op == ">=":
        return left.name, v, hi
    return None


def birth_range_constraints(plan: LogicalPlan, int_columns: tuple[str, ...]):
    """Integer-range bounds implied by top-level birth predicate conjuncts."""
    bounds: list[tuple[str, int, int]] = []
    for node in plan.selects:
        if not isinstance(node, BirthSelectNode):
            continue
        for conj in _conjuncts(node.predicate):
            b = _int_range_bounds(conj, int_columns)
            if b is not None:
                bounds.append(b)
    return bounds


def prune_chunks(plan: LogicalPlan, chunkset: ChunkSet) -> ChunkPlan:
    """Drop chunks that provably hold no birth-qualified rows.

    A chunk survives only if the birth action appears in its action
    dictionary and its value ranges overlap every integer bound the birth
    predicate imposes. A birth action missing from the global dictionary
    short-circuits to an empty plan: nobody was ever born.
    """
    schema = chunkset.schema
    gid = chunkset.gid(schema.action_attr, plan.agg.birth_action)
    if gid is None:
        return ChunkPlan((), plan)
    bounds = birth_range_constraints(plan, schema.integer_columns())
    keep: list[int] = []
    for ci, meta in enumerate(chunkset.metas):
        if not chunk_has_action(meta, schema.action_attr, gid):
            continue
        if any(not chunk_range_overlaps(meta, col, lo, hi) for col, lo, hi in bounds):
            continue
        keep.append(ci)
    return ChunkPlan(tuple(keep), plan)


def plan_text(plan: LogicalPlan) -> str:
    """Pretty-print the chain, root first, scan last."""
    lines = []
    aggs = ", ".join(
        f"{AGG_CANON[a.func]}({a.arg or ''})" for a in plan.agg.aggregates
    ) or "none"
    lines.append(
        f"CohortAgg(cohortBy=[{', '.join(plan.agg.cohort_by)}], "
        f"birthAction={plan.agg.birth_action!r}, aggregates=[{aggs}], "
        f"unit={plan.age_unit})"
    )
    depth = 1
    for node in reversed(plan.selects):
        name = "AgeSelect" if isinstance(node, AgeSelectNode) else "BirthSelect"
        lines.append("  " * depth + f"{name}({print_predicate(node.predicate)})")
        depth += 1
    lines.append("  " * depth + f"Scan({plan.scan.table})")
    return "\n".join(lines)
