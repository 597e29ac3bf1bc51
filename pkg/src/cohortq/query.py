"""Cohort query language: lexer, recursive-descent parser, validator.

The language is a SELECT statement with a mandatory birth clause, an
optional age-activity clause (in either order) and a mandatory COHORT BY
list. Plain relational clauses (WHERE, GROUP BY, JOIN) are rejected.

Keywords are case-insensitive, identifiers case-sensitive. String
literals are double-quoted; quoted date literals compared against the
time attribute are coerced to epoch seconds during validation.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Optional, Union

from .core import (
    INTEGER,
    STRING,
    ActivitySchema,
    AgeRef,
    And,
    Attr,
    Between,
    BirthAttr,
    Comparison,
    InList,
    Literal,
    Not,
    Operand,
    Or,
    Predicate,
    is_date_only,
    parse_timestamp,
    print_operand,
    print_predicate,
)
from .errors import DataError, QuerySyntaxError, QueryValidationError

AGGREGATES = ("sum", "avg", "count", "min", "max", "usercount")
AGG_CANON = {"sum": "Sum", "avg": "Avg", "count": "Count",
             "min": "Min", "max": "Max", "usercount": "UserCount"}

KEYWORDS = {
    "select", "from", "birth", "age", "activities", "in", "cohort", "by",
    "and", "or", "not", "between", "as", "cohortsize",
}
REJECTED_KEYWORDS = {"where", "group", "join", "having"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|!=|=|<|>)
  | (?P<punct>[(),\[\]])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | ident | string | number | op | punct | eof
    value: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup == "ws":
            pos = m.end()
            continue
        value = m.group()
        kind = m.lastgroup
        if kind == "ident":
            lowered = value.lower()
            if lowered in KEYWORDS or lowered in REJECTED_KEYWORDS:
                kind = "keyword"
                value = lowered
        elif kind == "string":
            body = value[1:-1]
            value = body.replace('\\"', '"').replace("\\\\", "\\")
        tokens.append(Token(kind, value, pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


@dataclass(frozen=True)
class SelectItem:
    kind: str  # attr | cohortsize | age | aggregate
    name: Optional[str] = None       # attr name
    func: Optional[str] = None       # lowercase aggregate name
    arg: Optional[str] = None        # aggregate argument attribute
    alias: Optional[str] = None

    def output_name(self) -> str:
        if self.alias:
            return self.alias
        if self.kind == "attr":
            return self.name
        if self.kind == "cohortsize":
            return "cohortsize"
        if self.kind == "age":
            return "age"
        return f"{self.func}({self.arg or ''})"


@dataclass(frozen=True)
class QuerySpec:
    select: tuple[SelectItem, ...]
    table: str
    birth_action: str
    birth_attr_name: str
    birth_predicate: Optional[Predicate]
    age_predicate: Optional[Predicate]
    cohort_by: tuple[str, ...]
    age_unit: str = "day"

    def aggregate_items(self) -> tuple[SelectItem, ...]:
        return tuple(it for it in self.select if it.kind == "aggregate")


def _make_and(parts: list[Predicate]) -> Predicate:
    flat: list[Predicate] = []
    for p in parts:
        flat.extend(p.parts) if isinstance(p, And) else flat.append(p)
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def _make_or(parts: list[Predicate]) -> Predicate:
    flat: list[Predicate] = []
    for p in parts:
        flat.extend(p.parts) if isinstance(p, Or) else flat.append(p)
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str) -> QuerySyntaxError:
        return QuerySyntaxError(message, self.peek().pos)

    def at_keyword(self, *names: str) -> bool:
        tok = self.peek()
        return tok.kind == "keyword" and tok.value in names

    def expect_keyword(self, name: str) -> Token:
        if not self.at_keyword(name):
            raise self.error(f"expected {name.upper()}, found {self.peek().value!r}")
        return self.advance()

    def expect(self, kind: str, value: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value if value is not None else kind
            raise self.error(f"expected {want!r}, found {tok.value!r}")
        return self.advance()

    def _reject_relational(self):
        tok = self.peek()
        if tok.kind == "keyword" and tok.value in REJECTED_KEYWORDS:
            raise QuerySyntaxError(
                f"relational operator {tok.value.upper()!r} is not allowed in a cohort query",
                tok.pos,
            )

    # ---- grammar ----

    def parse_query(self) -> QuerySpec:
        self.expect_keyword("select")
        select = [self.parse_select_item()]
        while self.peek().kind == "punct" and self.peek().value == ",":
            self.advance()
            select.append(self.parse_select_item())
        self.expect_keyword("from")
        table = self.expect("ident").value

        birth: Optional[tuple[str, str, Optional[Predicate]]] = None
        age_pred: Optional[Predicate] = None
        while True:
            self._reject_relational()
            if self.at_keyword("birth"):
                if birth is not None:
                    raise self.error("duplicate BIRTH FROM clause")
                birth = self.parse_birth_clause()
            elif self.at_keyword("age"):
                if age_pred is not None:
                    raise self.error("duplicate AGE ACTIVITIES IN clause")
                age_pred = self.parse_age_clause()
            else:
                break

        self._reject_relational()
        self.expect_keyword("cohort")
        self.expect_keyword("by")
        cohort_by = [self.expect("ident").value]
        while self.peek().kind == "punct" and self.peek().value == ",":
            self.advance()
            cohort_by.append(self.expect("ident").value)

        self._reject_relational()
        if self.peek().kind != "eof":
            raise self.error(f"unexpected trailing input {self.peek().value!r}")
        if birth is None:
            raise QuerySyntaxError("missing birth action: a BIRTH FROM clause is required")
        attr_name, action, birth_pred = birth
        return QuerySpec(
            select=tuple(select),
            table=table,
            birth_action=action,
            birth_attr_name=attr_name,
            birth_predicate=birth_pred,
            age_predicate=age_pred,
            cohort_by=tuple(cohort_by),
        )

    def parse_select_item(self) -> SelectItem:
        tok = self.peek()
        if self.at_keyword("cohortsize"):
            self.advance()
            return SelectItem("cohortsize", alias=self._maybe_alias())
        if self.at_keyword("age"):
            self.advance()
            return SelectItem("age", alias=self._maybe_alias())
        if tok.kind != "ident":
            raise self.error(f"expected a select item, found {tok.value!r}")
        name = self.advance().value
        if self.peek().kind == "punct" and self.peek().value == "(":
            func = name.lower()
            if func not in AGGREGATES:
                raise QuerySyntaxError(f"unknown aggregate function {name!r}", tok.pos)
            self.advance()
            arg = None
            if self.peek().kind == "ident":
                arg = self.advance().value
            self.expect("punct", ")")
            return SelectItem("aggregate", func=func, arg=arg, alias=self._maybe_alias())
        return SelectItem("attr", name=name, alias=self._maybe_alias())

    def _maybe_alias(self) -> Optional[str]:
        if self.at_keyword("as"):
            self.advance()
            return self.expect("ident").value
        return None

    def parse_birth_clause(self) -> tuple[str, str, Optional[Predicate]]:
        self.expect_keyword("birth")
        self.expect_keyword("from")
        attr = self.expect("ident").value
        self.expect("op", "=")
        action_tok = self.peek()
        if action_tok.kind != "string":
            raise self.error("birth action must be a quoted string")
        action = self.advance().value
        pred = None
        if self.at_keyword("and"):
            self.advance()
            pred = self.parse_predicate()
        return attr, action, pred

    def parse_age_clause(self) -> Predicate:
        self.expect_keyword("age")
        self.expect_keyword("activities")
        self.expect_keyword("in")
        return self.parse_predicate()

    def parse_predicate(self) -> Predicate:
        parts = [self.parse_and()]
        while self.at_keyword("or"):
            self.advance()
            parts.append(self.parse_and())
        return _make_or(parts)

    def parse_and(self) -> Predicate:
        parts = [self.parse_not()]
        while self.at_keyword("and"):
            self.advance()
            parts.append(self.parse_not())
        return _make_and(parts)

    def parse_not(self) -> Predicate:
        if self.at_keyword("not"):
            self.advance()
            return Not(self.parse_not())
        return self.parse_primary()

    def parse_primary(self) -> Predicate:
        if self.peek().kind == "punct" and self.peek().value == "(":
            self.advance()
            inner = self.parse_predicate()
            self.expect("punct", ")")
            return inner
        operand = self.parse_operand()
        tok = self.peek()
        if tok.kind == "op":
            op = self.advance().value
            return Comparison(op, operand, self.parse_operand())
        if self.at_keyword("between"):
            self.advance()
            low = self.parse_literal()
            self.expect_keyword("and")
            high = self.parse_literal()
            return Between(operand, low, high)
        if self.at_keyword("in"):
            self.advance()
            self.expect("punct", "[")
            values = [self.parse_literal()]
            while self.peek().kind == "punct" and self.peek().value == ",":
                self.advance()
                values.append(self.parse_literal())
            self.expect("punct", "]")
            return InList(operand, tuple(values))
        raise self.error(f"expected a comparison, found {tok.value!r}")

    def parse_operand(self) -> Operand:
        tok = self.peek()
        if self.at_keyword("age"):
            self.advance()
            return AgeRef()
        if self.at_keyword("birth"):
            self.advance()
            self.expect("punct", "(")
            name = self.expect("ident").value
            self.expect("punct", ")")
            return BirthAttr(name)
        if tok.kind == "ident":
            return Attr(self.advance().value)
        if tok.kind == "string":
            return Literal(self.advance().value)
        if tok.kind == "number":
            return Literal(int(self.advance().value))
        raise self.error(f"expected an attribute or literal, found {tok.value!r}")

    def parse_literal(self) -> Union[str, int]:
        tok = self.peek()
        if tok.kind == "string":
            return self.advance().value
        if tok.kind == "number":
            return int(self.advance().value)
        raise self.error(f"expected a literal, found {tok.value!r}")


def parse(text: str) -> QuerySpec:
    """Parse cohort query text into an unvalidated QuerySpec."""
    return _Parser(tokenize(text)).parse_query()


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------

def _operand_kind(op: Operand, schema: ActivitySchema) -> str:
    if isinstance(op, (Attr, BirthAttr)):
        if not schema.has_attr(op.name):
            raise QueryValidationError(f"unknown attribute {op.name!r}")
        return schema.attr_kind(op.name)
    if isinstance(op, AgeRef):
        return INTEGER
    return STRING if isinstance(op.value, str) else INTEGER


def _is_time_ref(op: Operand, schema: ActivitySchema) -> bool:
    return isinstance(op, (Attr, BirthAttr)) and op.name == schema.time_attr


def _coerce_time_literal(value, *, end_of_day: bool = False) -> int:
    if isinstance(value, int):
        return value
    try:
        epoch = parse_timestamp(value)
    except DataError:
        raise QueryValidationError(f"expected a timestamp literal, got {value!r}") from None
    if end_of_day and is_date_only(value):
        epoch += 86_399
    return epoch


def _check_operand_pair(left: Operand, right: Operand, schema: ActivitySchema):
    """Type-check a comparison, coercing date literals against the time attr."""
    for a, b in ((left, right), (right, left)):
        if _is_time_ref(a, schema) and isinstance(b, Literal) and isinstance(b.value, str):
            coerced = Literal(_coerce_time_literal(b.value))
            return (coerced, right) if b is left else (left, coerced)
    lk = _operand_kind(left, schema)
    rk = _operand_kind(right, schema)
    if lk != rk:
        raise QueryValidationError(
            f"type mismatch: {print_operand(left)} is {lk} but {print_operand(right)} is {rk}"
        )
    return left, right


def _validate_predicate(pred: Predicate, schema: ActivitySchema, *,
                        allow_birth_refs: bool, context: str) -> Predicate:
    if isinstance(pred, Comparison):
        left, right = pred.left, pred.right
        for op in (left, right):
            if isinstance(op, BirthAttr) and not allow_birth_refs:
                raise QueryValidationError(f"Birth() is not allowed in a {context} predicate")
            if isinstance(op, AgeRef) and not allow_birth_refs:
                raise QueryValidationError(f"AGE is not allowed in a {context} predicate")
        left, right = _check_operand_pair(left, right, schema)
        return Comparison(pred.op, left, right)
    if isinstance(pred, InList):
        op = pred.operand
        if isinstance(op, (BirthAttr, AgeRef)) and not allow_birth_refs:
            raise QueryValidationError(f"Birth()/AGE is not allowed in a {context} predicate")
        kind = _operand_kind(op, schema)
        values = pred.values
        if _is_time_ref(op, schema):
            values = tuple(_coerce_time_literal(v) for v in values)
        else:
            for v in values:
                vk = STRING if isinstance(v, str) else INTEGER
                if vk != kind:
                    raise QueryValidationError(
                        f"type mismatch in IN list for {print_operand(op)}: {v!r}")
        return InList(op, values)
    if isinstance(pred, Between):
        op = pred.operand
        if isinstance(op, (BirthAttr, AgeRef)) and not allow_birth_refs:
            raise QueryValidationError(f"Birth()/AGE is not allowed in a {context} predicate")
        kind = _operand_kind(op, schema)
        low, high = pred.low, pred.high
        if _is_time_ref(op, schema):
            low = _coerce_time_literal(low)
            high = _coerce_time_literal(high, end_of_day=True)
        else:
            for v in (low, high):
                vk = STRING if isinstance(v, str) else INTEGER
                if vk != kind:
                    raise QueryValidationError(
                        f"type mismatch in BETWEEN for {print_operand(op)}: {v!r}")
        return Between(op, low, high)
    if isinstance(pred, And):
        return And(tuple(
            _validate_predicate(p, schema, allow_birth_refs=allow_birth_refs, context=context)
            for p in pred.parts))
    if isinstance(pred, Or):
        return Or(tuple(
            _validate_predicate(p, schema, allow_birth_refs=allow_birth_refs, context=context)
            for p in pred.parts))
    if isinstance(pred, Not):
        return Not(_validate_predicate(pred.part, schema,
                                       allow_birth_refs=allow_birth_refs, context=context))
    raise QueryValidationError(f"unknown predicate node {pred!r}")


def validate(spec: QuerySpec, schema: ActivitySchema) -> QuerySpec:
    """Check a parsed query against a schema; returns the checked spec.

    Date literals compared to the time attribute come back coerced to
    epoch seconds.
    """
    if spec.table != schema.table_name:
        raise QueryValidationError(
            f"unknown table {spec.table!r} (store holds {schema.table_name!r})")
    if spec.birth_attr_name != schema.action_attr:
        raise QueryValidationError(
            f"BIRTH FROM must filter the action attribute "
            f"{schema.action_attr!r}, not {spec.birth_attr_name!r}")
    if spec.age_unit not in ("day", "week", "month"):
        raise QueryValidationError(f"unknown age unit {spec.age_unit!r}")

    for attr in spec.cohort_by:
        if not schema.has_attr(attr):
            raise QueryValidationError(f"unknown attribute {attr!r} in COHORT BY")
        if attr in (schema.user_attr, schema.action_attr):
            raise QueryValidationError(
                f"COHORT BY may not use the user or action attribute ({attr!r})")

    for item in spec.select:
        if item.kind == "attr":
            if not schema.has_attr(item.name):
                raise QueryValidationError(f"unknown attribute {item.name!r} in SELECT")
            if item.name not in spec.cohort_by:
                raise QueryValidationError(
                    f"selected attribute {item.name!r} must appear in COHORT BY")
        elif item.kind == "aggregate":
            if item.func in ("count", "usercount"):
                if item.arg is not None:
                    raise QueryValidationError(
                        f"{AGG_CANON[item.func]}() takes no argument")
            else:
                if item.arg is None:
                    raise QueryValidationError(
                        f"{AGG_CANON[item.func]} needs a measure argument")
                if item.arg not in schema.measures:
                    raise QueryValidationError(
                        f"{AGG_CANON[item.func]} argument {item.arg!r} is not a measure")

    birth_pred = spec.birth_predicate
    if birth_pred is not None:
        birth_pred = _validate_predicate(birth_pred, schema,
                                         allow_birth_refs=False, context="birth")
    age_pred = spec.age_predicate
    if age_pred is not None:
        age_pred = _validate_predicate(age_pred, schema,
                                       allow_birth_refs=True, context="age")

    return replace(spec, birth_predicate=birth_pred, age_predicate=age_pred)


# --------------------------------------------------------------------------
# Printer
# --------------------------------------------------------------------------

def print_select_item(item: SelectItem) -> str:
    if item.kind == "attr":
        base = item.name
    elif item.kind == "cohortsize":
        base = "COHORTSIZE"
    elif item.kind == "age":
        base = "AGE"
    else:
        base = f"{AGG_CANON[item.func]}({item.arg or ''})"
    return f"{base} AS {item.alias}" if item.alias else base


def print_query(spec: QuerySpec) -> str:
    """Canonical query text; parsing it back yields an equal spec."""
    parts = [
        "SELECT " + ", ".join(print_select_item(it) for it in spec.select),
        f"FROM {spec.table}",
        f'BIRTH FROM {spec.birth_attr_name} = "{spec.birth_action}"',
    ]
    if spec.birth_predicate is not None:
        parts[-1] += " AND " + print_predicate(spec.birth_predicate)
    if spec.age_predicate is not None:
        parts.append("AGE ACTIVITIES IN " + print_predicate(spec.age_predicate))
    parts.append("COHORT BY " + ", ".join(spec.cohort_by))
    return " ".join(parts)
