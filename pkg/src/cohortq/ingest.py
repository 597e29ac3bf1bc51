"""CSV loading, primary-key sorting, user-aligned partitioning, and the
synthetic activity generator used by the benchmarks."""
from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, TextIO, Union

from .core import INTEGER, STRING, ActivitySchema, ActivityTuple, parse_timestamp
from .errors import CsvError, DataError


def _parse_int(text: str) -> int:
    return int(text.strip())


def infer_schema(header: Sequence[str], rows: Sequence[Sequence[str]],
                 table_name: str = "GameActions") -> ActivitySchema:
    """Guess a schema from CSV content.

    The first three columns are user, time and action. Every remaining
    column whose values all parse as integers becomes a measure; the rest
    become string dimensions. Integer dimensions need an explicit schema.
    """
    if len(header) < 3:
        raise DataError("CSV needs at least user, time and action columns")
    dims: list[tuple[str, str]] = []
    measures: list[str] = []
    for idx in range(3, len(header)):
        all_int = True
        for row in rows:
            try:
                _parse_int(row[idx])
            except (ValueError, IndexError):
                all_int = False
                break
        if all_int and rows:
            measures.append(header[idx])
        else:
            dims.append((header[idx], STRING))
    return ActivitySchema(
        user_attr=header[0],
        time_attr=header[1],
        action_attr=header[2],
        dimensions=tuple(dims),
        measures=tuple(measures),
        table_name=table_name,
    )


def load_csv(
    source: Union[str, TextIO],
    schema: Optional[ActivitySchema] = None,
    *,
    delimiter: str = ",",
    table_name: str = "GameActions",
) -> tuple[ActivitySchema, list[ActivityTuple]]:
    """Load an activity table from CSV.

    The header row maps columns to schema attributes by name (all schema
    attributes must be present). Without a schema one is inferred. Errors
    carry the 1-based data row number; duplicate (user, time, action)
    keys are rejected.
    """
    if isinstance(source, str):
        with open(source, "r", newline="") as fh:
            return load_csv(fh, schema, delimiter=delimiter, table_name=table_name)

    reader = csv.reader(source, delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("CSV file is empty (missing header)") from None
    header = [h.strip() for h in header]
    raw_rows = list(reader)

    if schema is None:
        schema = infer_schema(header, raw_rows, table_name=table_name)

    positions: dict[str, int] = {}
    for attr in schema.attr_names:
        if attr not in header:
            raise DataError(f"CSV header is missing schema attribute {attr!r}")
        positions[attr] = header.index(attr)

    tuples: list[ActivityTuple] = []
    seen: set[tuple] = set()
    for rowno, row in enumerate(raw_rows, start=1):
        if len(row) != len(header):
            raise CsvError(rowno, f"expected {len(header)} fields, got {len(row)}")
        if any(cell.strip() == "" for cell in row):
            raise CsvError(rowno, "missing field value")

        def cell(attr: str) -> str:
            return row[positions[attr]].strip()

        try:
            time = parse_timestamp(cell(schema.time_attr))
        except DataError as e:
            raise CsvError(rowno, str(e)) from None
        dims = []
        for name, kind in schema.dimensions:
            raw = cell(name)
            if kind == INTEGER:
                try:
                    dims.append(_parse_int(raw))
                except ValueError:
                    raise CsvError(rowno, f"bad integer for {name!r}: {raw!r}") from None
            else:
                dims.append(raw)
        measures = []
        for name in schema.measures:
            raw = cell(name)
            try:
                measures.append(_parse_int(raw))
            except ValueError:
                raise CsvError(rowno, f"bad integer for {name!r}: {raw!r}") from None

        t = ActivityTuple(cell(schema.user_attr), time, cell(schema.action_attr),
                          tuple(dims), tuple(measures))
        key = t.sort_key()
        if key in seen:
            raise CsvError(rowno, f"duplicate (user, time, action) key {key}")
        seen.add(key)
        tuples.append(t)
    return schema, tuples


def write_csv(schema: ActivitySchema, tuples: Iterable[ActivityTuple], dest: TextIO) -> int:
    """Emit tuples as CSV in canonical column order. Times are epoch seconds."""
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(list(schema.attr_names))
    n = 0
    for t in tuples:
        writer.writerow([t.user, t.time, t.action, *t.dims, *t.measures])
        n += 1
    return n


def sort_and_partition(
    tuples: Sequence[ActivityTuple], chunk_size_tuples: int
) -> list[list[ActivityTuple]]:
    """Sort by (user, time, action) and cut into user-aligned runs.

    A user goes entirely into the chunk where their first tuple lands, so
    a chunk may exceed the target size rather than split a user.
    """
    if chunk_size_tuples < 1:
        raise DataError(f"chunk size must be >= 1, got {chunk_size_tuples}")
    ordered = sorted(tuples, key=ActivityTuple.sort_key)
    runs: list[list[ActivityTuple]] = []
    current: list[ActivityTuple] = []
    i, n = 0, len(ordered)
    while i < n:
        j = i + 1
        while j < n and ordered[j].user == ordered[i].user:
            j += 1
        current.extend(ordered[i:j])
        if len(current) >= chunk_size_tuples:
            runs.append(current)
            current = []
        i = j
    if current:
        runs.append(current)
    return runs


DEFAULT_ACTIONS = (
    "launch", "shop", "achievement", "fight",
    "quest01", "quest02", "quest03", "quest04", "quest05", "quest06",
    "quest07", "quest08", "quest09", "quest10", "quest11", "quest12",
)

DEFAULT_COUNTRIES = (
    "Australia", "Brazil", "China", "France",
    "Germany", "India", "Japan", "United States",
)

DEFAULT_CITIES = (
    "Sydney", "Rio", "Beijing", "Paris", "Berlin", "Mumbai",
    "Tokyo", "Chicago", "Melbourne", "Shanghai", "Lyon", "Delhi",
)

DEFAULT_ROLES = ("dwarf", "wizard", "bandit", "assassin", "knight")


@dataclass
class GenSpec:
    """Parameters for the deterministic synthetic activity generator."""

    user_count: int = 1000
    min_actions: int = 5
    max_actions: int = 60
    actions: tuple[str, ...] = DEFAULT_ACTIONS
    start: int = parse_timestamp("2013/05/19:0000")
    days: int = 38
    countries: tuple[str, ...] = DEFAULT_COUNTRIES
    country_weights: Optional[tuple[float, ...]] = None
    cities: tuple[str, ...] = DEFAULT_CITIES
    roles: tuple[str, ...] = DEFAULT_ROLES
    gold_range: tuple[int, int] = (10, 500)
    session_range: tuple[int, int] = (1, 3600)
    seed: int = 42
    scale: int = 1
    table_name: str = "GameActions"

    def schema(self) -> ActivitySchema:
        return ActivitySchema(
            user_attr="player",
            time_attr="time",
            action_attr="action",
            dimensions=(("country", STRING), ("city", STRING), ("role", STRING)),
            measures=("session_length", "gold"),
            table_name=self.table_name,
        )


def generate(spec: GenSpec) -> tuple[ActivitySchema, list[ActivityTuple]]:
    """Generate a synthetic activity table.

    Deterministic for a fixed seed. Every user's first event is "launch"
    and birth times spread roughly uniformly over the date range. Gold is
    only spent on "shop" actions.
    """
    rng = random.Random(spec.seed)
    span = spec.days * 86_400
    tuples: list[ActivityTuple] = []
    for u in range(spec.user_count):
        user = f"u{u:06d}"
        country = (
            rng.choices(spec.countries, weights=spec.country_weights)[0]
            if spec.country_weights else rng.choice(spec.countries)
        )
        city = rng.choice(spec.cities)
        n = max(1, rng.randint(spec.min_actions, spec.max_actions))
        # Birth instants spread uniformly over the date range; everything
        # else a user does comes after their first appearance.
        born = rng.randrange(max(1, span - 2 * spec.max_actions))
        times = [born] + sorted(rng.sample(range(born + 1, span), n - 1))
        for k, offset in enumerate(times):
            action = "launch" if k == 0 else rng.choice(spec.actions)
            gold = rng.randint(*spec.gold_range) if action == "shop" else 0
            session = rng.randint(*spec.session_range)
            tuples.append(ActivityTuple(
                user=user,
                time=spec.start + offset,
                action=action,
                dims=(country, city, rng.choice(spec.roles)),
                measures=(session, gold),
            ))
    if spec.scale > 1:
        tuples = scale_dataset(tuples, spec.scale)
    return spec.schema(), tuples


def scale_dataset(tuples: Sequence[ActivityTuple], factor: int) -> list[ActivityTuple]:
    """Replicate every user's tuples ``factor`` times under fresh user ids.

    Per-user tuple multisets are preserved exactly; only the user id
    changes, so the user count multiplies by ``factor``.
    """
    if factor < 1:
        raise DataError(f"scale factor must be >= 1, got {factor}")
    out: list[ActivityTuple] = []
    for t in tuples:
        for k in range(factor):
            out.append(t._replace(user=f"{t.user}~{k}"))
    return out
