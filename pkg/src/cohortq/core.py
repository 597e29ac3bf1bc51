"""Domain model shared by the columnar engine and the reference evaluator.

Holds the activity-table schema, activity tuples, birth bookkeeping, age
normalization and the predicate expression tree with its evaluator. Both
query engines build on exactly these pieces and nothing else, so agreement
between them is meaningful.
"""
from __future__ import annotations

import calendar
import datetime
from dataclasses import dataclass
from typing import Any, Callable, Iterator, NamedTuple, Optional, Union

from .errors import DataError

NEVER = -1

AGE_UNIT_SECONDS = {
    "day": 86_400,
    "week": 7 * 86_400,
    # Calendar-aware months are out of scope; a month is a fixed 30 days.
    "month": 30 * 86_400,
}

STRING = "string"
INTEGER = "integer"


@dataclass(frozen=True)
class ActivitySchema:
    """Describes one activity table.

    The user, time and action attributes are mandatory. Dimensions are
    (name, kind) pairs with kind "string" or "integer"; measures are
    integer-valued. Attribute names must be unique across all groups.
    """

    user_attr: str
    time_attr: str
    action_attr: str
    dimensions: tuple[tuple[str, str], ...] = ()
    measures: tuple[str, ...] = ()
    table_name: str = "GameActions"

    def __post_init__(self):
        names = [self.user_attr, self.time_attr, self.action_attr]
        for name, kind in self.dimensions:
            if kind not in (STRING, INTEGER):
                raise DataError(f"dimension {name!r} has unknown kind {kind!r}")
            names.append(name)
        names.extend(self.measures)
        if len(set(names)) != len(names):
            raise DataError(f"duplicate attribute names in schema: {names}")

    @property
    def dim_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.dimensions)

    @property
    def attr_names(self) -> tuple[str, ...]:
        return (self.user_attr, self.time_attr, self.action_attr) + self.dim_names + self.measures

    def has_attr(self, name: str) -> bool:
        return name in self.attr_names

    def attr_kind(self, name: str) -> str:
        """Value kind of an attribute: "string" or "integer"."""
        if name in (self.user_attr, self.action_attr):
            return STRING
        if name == self.time_attr or name in self.measures:
            return INTEGER
        for dim, kind in self.dimensions:
            if dim == name:
                return kind
        raise DataError(f"unknown attribute {name!r}")

    def string_columns(self) -> tuple[str, ...]:
        """Dictionary-encoded columns, in canonical storage order."""
        return (self.user_attr, self.action_attr) + tuple(
            name for name, kind in self.dimensions if kind == STRING
        )

    def integer_columns(self) -> tuple[str, ...]:
        """Delta-encoded columns, in canonical storage order."""
        return (self.time_attr,) + tuple(
            name for name, kind in self.dimensions if kind == INTEGER
        ) + self.measures

    def value_of(self, tup: "ActivityTuple", name: str) -> Any:
        if name == self.user_attr:
            return tup.user
        if name == self.time_attr:
            return tup.time
        if name == self.action_attr:
            return tup.action
        for i, (dim, _) in enumerate(self.dimensions):
            if dim == name:
                return tup.dims[i]
        for i, meas in enumerate(self.measures):
            if meas == name:
                return tup.measures[i]
        raise DataError(f"unknown attribute {name!r}")


class ActivityTuple(NamedTuple):
    user: str
    time: int
    action: str
    dims: tuple
    measures: tuple

    def sort_key(self):
        return (self.user, self.time, self.action)


class BirthInfo(NamedTuple):
    """Birth time of one user and the position of the birth tuple.

    ``birth_index`` is relative to the start of the user's tuple block.
    ``birth_time`` is NEVER (and the index None) for users who never
    performed the birth action.
    """

    birth_time: int
    birth_index: Optional[int]

    @property
    def born(self) -> bool:
        return self.birth_time != NEVER


NOT_BORN = BirthInfo(NEVER, None)


def normalize_age(delta_seconds: int, unit: str = "day") -> int:
    """Number of whole time units elapsed, rounding partial units up.

    Zero exactly when the delta is zero, so the birth instant itself is
    age 0 and anything strictly later lands in a positive age bucket.
    """
    if delta_seconds < 0:
        raise ValueError(f"age delta must be non-negative, got {delta_seconds}")
    unit_seconds = AGE_UNIT_SECONDS[unit]
    return -(-delta_seconds // unit_seconds)


_TS_COMPACT = "%Y/%m/%d:%H%M"


def parse_timestamp(text: str) -> int:
    """Parse a timestamp literal to integer epoch seconds (UTC).

    Accepts ``YYYY/MM/DD:HHMM``, ISO-8601 date/datetimes, and plain
    integer epoch seconds.
    """
    text = text.strip()
    if text and (text.lstrip("-").isdigit()):
        return int(text)
    try:
        dt = datetime.datetime.strptime(text, _TS_COMPACT)
        return calendar.timegm(dt.timetuple())
    except ValueError:
        pass
    try:
        dt = datetime.datetime.fromisoformat(text.replace("/", "-"))
    except ValueError:
        raise DataError(f"unparseable timestamp {text!r}") from None
    if dt.tzinfo is not None:
        return int(dt.timestamp())
    return calendar.timegm(dt.timetuple())


def is_date_only(text: str) -> bool:
    """True for literals like 2013-05-21 or 2013/05/21 with no time part."""
    try:
        datetime.date.fromisoformat(text.replace("/", "-"))
        return True
    except ValueError:
        return False


# --------------------------------------------------------------------------
# Predicate expression tree
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Attr:
    name: str


@dataclass(frozen=True)
class BirthAttr:
    """A Birth(attr) reference, resolved against the user's birth tuple."""

    name: str


@dataclass(frozen=True)
class AgeRef:
    """The AGE pseudo-attribute of the current tuple."""


@dataclass(frozen=True)
class Literal:
    value: Union[str, int]


Operand = Union[Attr, BirthAttr, AgeRef, Literal]


@dataclass(frozen=True)
class Comparison:
    op: str  # one of = != < <= > >=
    left: Operand
    right: Operand


@dataclass(frozen=True)
class InList:
    operand: Operand
    values: tuple


@dataclass(frozen=True)
class Between:
    operand: Operand
    low: Union[str, int]
    high: Union[str, int]


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


@dataclass(frozen=True)
class Not:
    part: "Predicate"


Predicate = Union[Comparison, InList, Between, And, Or, Not]

TRUE = And(())

_CMP: dict[str, Callable[[Any, Any], bool]] = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def eval_predicate(
    pred: Predicate,
    resolve: Callable[[str], Any],
    birth_resolve: Optional[Callable[[str], Any]] = None,
    age: Optional[int] = None,
) -> bool:
    """Evaluate a predicate over one tuple.

    ``resolve`` maps attribute names to the tuple's values. Birth(attr)
    references go through ``birth_resolve`` and AGE through ``age``;
    validated predicates only use what the call site provides.
    """

    def value(op: Operand) -> Any:
        if isinstance(op, Attr):
            return resolve(op.name)
        if isinstance(op, BirthAttr):
            if birth_resolve is None:
                raise DataError("Birth() reference with no birth tuple in scope")
            return birth_resolve(op.name)
        if isinstance(op, AgeRef):
            if age is None:
                raise DataError("AGE reference with no age in scope")
            return age
        return op.value

    if isinstance(pred, Comparison):
        return _CMP[pred.op](value(pred.left), value(pred.right))
    if isinstance(pred, InList):
        return value(pred.operand) in pred.values
    if isinstance(pred, Between):
        return pred.low <= value(pred.operand) <= pred.high
    if isinstance(pred, And):
        return all(eval_predicate(p, resolve, birth_resolve, age) for p in pred.parts)
    if isinstance(pred, Or):
        return any(eval_predicate(p, resolve, birth_resolve, age) for p in pred.parts)
    if isinstance(pred, Not):
        return not eval_predicate(pred.part, resolve, birth_resolve, age)
    raise DataError(f"unknown predicate node {pred!r}")


def iter_operands(pred: Predicate) -> Iterator[Operand]:
    if isinstance(pred, Comparison):
        yield pred.left
        yield pred.right
    elif isinstance(pred, (InList, Between)):
        yield pred.operand
    elif isinstance(pred, (And, Or)):
        for p in pred.parts:
            yield from iter_operands(p)
    elif isinstance(pred, Not):
        yield from iter_operands(pred.part)


def referenced_attrs(pred: Predicate) -> set[str]:
    """Names referenced directly (not through Birth)."""
    return {op.name for op in iter_operands(pred) if isinstance(op, Attr)}


def referenced_birth_attrs(pred: Predicate) -> set[str]:
    return {op.name for op in iter_operands(pred) if isinstance(op, BirthAttr)}


def references_age(pred: Predicate) -> bool:
    return any(isinstance(op, AgeRef) for op in iter_operands(pred))


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def print_operand(op: Operand) -> str:
    if isinstance(op, Attr):
        return op.name
    if isinstance(op, BirthAttr):
        return f"Birth({op.name})"
    if isinstance(op, AgeRef):
        return "AGE"
    if isinstance(op.value, str):
        return _quote(op.value)
    return str(op.value)


def _print_literal(value: Union[str, int]) -> str:
    return _quote(value) if isinstance(value, str) else str(value)


def print_predicate(pred: Predicate, _parent_prec: int = 0) -> str:
    """Canonical text form; parses back to an equal tree."""
    if isinstance(pred, Comparison):
        return f"{print_operand(pred.left)} {pred.op} {print_operand(pred.right)}"
    if isinstance(pred, InList):
        items = ", ".join(_print_literal(v) for v in pred.values)
        return f"{print_operand(pred.operand)} IN [{items}]"
    if isinstance(pred, Between):
        return (
            f"{print_operand(pred.operand)} BETWEEN "
            f"{_print_literal(pred.low)} AND {_print_literal(pred.high)}"
        )
    if isinstance(pred, Not):
        return f"NOT ({print_predicate(pred.part)})"
    if isinstance(pred, And):
        if not pred.parts:
            return "TRUE"
        rendered = [
            f"({print_predicate(p)})" if isinstance(p, Or) else print_predicate(p)
            for p in pred.parts
        ]
        return " AND ".join(rendered)
    if isinstance(pred, Or):
        return " OR ".join(print_predicate(p) for p in pred.parts)
    raise DataError(f"unknown predicate node {pred!r}")
