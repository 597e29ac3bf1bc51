"""Physical operators over compressed chunks.

Execution is user-block at a time, mirroring the storage layout: the user
column's run-length triples delimit blocks, and a disqualified user costs
only the rows scanned to reach their birth tuple. Blocks flow through the
selection chain lazily; rows of a dropped block are never decoded.

Aggregation keeps one state per chunk (dense arrays when the cohort key
is a single dictionary-encoded attribute, a hash map otherwise). Chunk
states merge associatively, so chunks can execute on any number of
threads. Distinct-user counting is done per chunk and summed, which is
exact because a user's rows never span chunks.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Optional

import numpy as np

from .core import (
    AGE_UNIT_SECONDS,
    ActivitySchema,
    ActivityTuple,
    eval_predicate,
)
from .errors import DataError
from .plan import (
    AgeSelectNode,
    BirthSelectNode,
    ChunkPlan,
    LogicalPlan,
    build_plan,
    prune_chunks,
    push_down_birth,
)
from .query import QuerySpec, SelectItem
from .storage import Chunk, ChunkSet

DENSE_CELL_LIMIT = 1 << 22


@dataclass
class ScanStats:
    """Execution counters, exposed for tests and the benchmark harness."""

    rows_decoded: int = 0
    chunks_opened: int = 0

    def add(self, other: "ScanStats") -> None:
        self.rows_decoded += other.rows_decoded
        self.chunks_opened += other.chunks_opened


class CohortResultRow(NamedTuple):
    key: tuple
    age: int
    size: int
    values: tuple


class QueryResult(NamedTuple):
    rows: list[CohortResultRow]
    cohort_sizes: dict
    stats: ScanStats
    plan: LogicalPlan
    chunk_plan: ChunkPlan


class _ChunkContext:
    """Decode helpers shared by every operator running over one chunk."""

    def __init__(self, chunkset: ChunkSet, chunk: Chunk, birth_action: str,
                 unit: str, stats: ScanStats):
        self.chunkset = chunkset
        self.chunk = chunk
        self.schema: ActivitySchema = chunkset.schema
        self.unit_seconds = AGE_UNIT_SECONDS[unit]
        self.stats = stats
        gid = chunkset.gid(self.schema.action_attr, birth_action)
        seg = chunk.strings[self.schema.action_attr]
        self.birth_code: Optional[int] = None if gid is None else seg.code_for_gid(gid)

    def decode_user(self, gid: int) -> str:
        return self.chunkset.decode_gid(self.schema.user_attr, gid)


class UserBlock:
    """One user's contiguous rows inside a chunk.

    Tracks a high-water mark of rows examined so the decoded-row counter
    never double-counts, finds the birth tuple with an early-exit scan,
    and decodes whole-block column slices only once the block is known to
    matter.
    """

    __slots__ = ("ctx", "uid_gid", "f", "n", "_next_uncounted", "_birth",
                 "_birth_time", "_slices", "_birth_cache", "_filters")

    _UNSET = object()

    def __init__(self, ctx: _ChunkContext, uid_gid: int, first: int, count: int):
        self.ctx = ctx
        self.uid_gid = uid_gid
        self.f = first
        self.n = count
        self._next_uncounted = first
        self._birth = UserBlock._UNSET
        self._birth_time: Optional[int] = None
        self._slices: dict = {}
        self._birth_cache: dict = {}
        self._filters: list[Callable[[int], bool]] = []

    # -- counting ----------------------------------------------------------

    def _note_scanned(self, i: int) -> None:
        if i >= self._next_uncounted:
            self.ctx.stats.rows_decoded += i + 1 - self._next_uncounted
            self._next_uncounted = i + 1

    # -- birth -------------------------------------------------------------

    def birth_index(self) -> Optional[int]:
        """Absolute row index of this user's birth tuple, or None.

        Scans the action column forward from the user's first row and
        stops at the first hit, so an unqualified user costs exactly the
        rows up to their birth tuple (the whole run if they never
        performed the birth action).
        """
        if self._birth is UserBlock._UNSET:
            code = self.ctx.birth_code
            if code is None:
                # chunk dictionary already proves the action absent; no
                # rows were read to learn it
                self._birth = None
            else:
                seg = self.ctx.chunk.strings[self.ctx.schema.action_attr]
                hit = seg.codes.find_first(code, self.f, self.f + self.n)
                if hit < 0:
                    self._note_scanned(self.f + self.n - 1)
                    self._birth = None
                else:
                    self._note_scanned(hit)
                    self._birth = hit
        return self._birth

    def birth_time(self) -> int:
        if self._birth_time is None:
            b = self.birth_index()
            assert b is not None, "birth_time on a user with no birth tuple"
            self._birth_time = self.ctx.chunk.ints[self.ctx.schema.time_attr].value_at(b)
        return self._birth_time

    def birth_value(self, attr: str):
        """Attribute of the birth tuple, via point reads (no block decode)."""
        if attr not in self._birth_cache:
            b = self.birth_index()
            self._birth_cache[attr] = self.point_value(attr, b)
        return self._birth_cache[attr]

    # -- row access ---------------------------------------------------------

    def point_value(self, attr: str, i: int):
        """Random-access decode of one value; used before qualification."""
        ctx = self.ctx
        if attr == ctx.schema.user_attr:
            return ctx.decode_user(self.uid_gid)
        seg = ctx.chunk.strings.get(attr)
        if seg is not None:
            return ctx.chunkset.decode_gid(attr, seg.gid_at(i))
        return ctx.chunk.ints[attr].value_at(i)

    def column_slice(self, attr: str):
        """Whole-block decoded values for one column, cached."""
        got = self._slices.get(attr)
        if got is None:
            ctx = self.ctx
            if attr == ctx.schema.user_attr:
                got = np.full(self.n, ctx.decode_user(self.uid_gid), dtype=object)
            else:
                seg = ctx.chunk.strings.get(attr)
                if seg is not None:
                    gids = seg.gids_slice(self.f, self.n)
                    got = ctx.chunkset.dict_array(attr)[gids]
                else:
                    got = ctx.chunk.ints[attr].values_slice(self.f, self.n)
            self._slices[attr] = got
        return got

    def row_resolver(self, i: int) -> Callable[[str], object]:
        rel = i - self.f

        def resolve(attr: str):
            v = self.column_slice(attr)[rel]
            return int(v) if isinstance(v, np.integer) else v

        return resolve

    def add_filter(self, accept: Callable[[int], bool]) -> None:
        self._filters.append(accept)

    def rows(self) -> Iterator[int]:
        """Surviving row indices, in order, counting what gets examined."""
        for i in range(self.f, self.f + self.n):
            self._note_scanned(i)
            if all(accept(i) for accept in self._filters):
                yield i

    def age_of(self, t: int) -> int:
        delta = t - self.birth_time()
        return -(-delta // self.ctx.unit_seconds)


class TableScanOp:
    def __init__(self, ctx: _ChunkContext):
        self.ctx = ctx

    def blocks(self) -> Iterator[UserBlock]:
        for run in self.ctx.chunk.user_runs:
            yield UserBlock(self.ctx, run.uid, run.first, run.count)


class BirthSelectOp:
    """Streams only the blocks whose birth tuple satisfies the predicate.

    Users with no birth tuple are dropped; a disqualified user's rows are
    simply never consumed, which is what "skip the current user" means
    over random-access storage.
    """

    def __init__(self, ctx: _ChunkContext, child, predicate):
        self.ctx = ctx
        self.child = child
        self.predicate = predicate

    def blocks(self) -> Iterator[UserBlock]:
        pred = self.predicate
        for blk in self.child.blocks():
            b = blk.birth_index()
            if b is None:
                continue
            if eval_predicate(pred, lambda attr: blk.point_value(attr, b)):
                yield blk


class AgeSelectOp:
    """Keeps birth-time rows unconditionally and later rows only when the
    predicate holds; rows before the birth time are dropped. Users with no
    birth tuple are dropped entirely."""

    def __init__(self, ctx: _ChunkContext, child, predicate):
        self.ctx = ctx
        self.child = child
        self.predicate = predicate

    def blocks(self) -> Iterator[UserBlock]:
        for blk in self.child.blocks():
            if blk.birth_index() is None:
                continue
            blk.add_filter(self._make_accept(blk))
            yield blk

    def _make_accept(self, blk: UserBlock) -> Callable[[int], bool]:
        time_attr = self.ctx.schema.time_attr
        pred = self.predicate
        bt = blk.birth_time()

        def accept(i: int) -> bool:
            t = int(blk.column_slice(time_attr)[i - blk.f])
            if t < bt:
                return False
            if t == bt:
                return True
            return eval_predicate(pred, blk.row_resolver(i), blk.birth_value, blk.age_of(t))

        return accept


def build_operator_chain(ctx: _ChunkContext, plan: LogicalPlan):
    source = TableScanOp(ctx)
    for node in plan.selects:
        if isinstance(node, BirthSelectNode):
            source = BirthSelectOp(ctx, source, node.predicate)
        elif isinstance(node, AgeSelectNode):
            source = AgeSelectOp(ctx, source, node.predicate)
        else:
            raise DataError(f"unknown plan node {node!r}")
    return source


# --------------------------------------------------------------------------
# Aggregation
# --------------------------------------------------------------------------

def _new_cell(aggs: tuple[SelectItem, ...]) -> list:
    cell = []
    for a in aggs:
        if a.func == "avg":
            cell.append([0, 0])
        elif a.func in ("min", "max"):
            cell.append(None)
        else:
            cell.append(0)
    return cell


@dataclass
class ChunkAggState:
    """Per-chunk aggregation output: cohort sizes and per-(cohort, age)
    accumulator cells, keyed by decoded cohort values."""

    sizes: dict = field(default_factory=dict)
    cells: dict = field(default_factory=dict)


class CohortAggOp:
    def __init__(self, ctx: _ChunkContext, cohort_by: tuple[str, ...],
                 aggregates: tuple[SelectItem, ...], force_hash: bool = False):
        self.ctx = ctx
        self.cohort_by = cohort_by
        self.aggregates = aggregates
        self.force_hash = force_hash

    def run(self, child) -> ChunkAggState:
        if not self.force_hash and self._dense_layout() is not None:
            return self._run_dense(child)
        return self._run_hash(child)

    # -- dense path ----------------------------------------------------------

    def _dense_layout(self):
        """(attr, n_codes, age_cap) when a dense table applies, else None."""
        if len(self.cohort_by) != 1:
            return None
        attr = self.cohort_by[0]
        seg = self.ctx.chunk.strings.get(attr)
        if seg is None or attr == self.ctx.schema.user_attr:
            return None
        tmin, tmax = (self.ctx.chunk.ints[self.ctx.schema.time_attr].vmin,
                      self.ctx.chunk.ints[self.ctx.schema.time_attr].vmax)
        age_cap = -(-(tmax - tmin) // self.ctx.unit_seconds)
        n_codes = max(1, len(seg.chunk_dict))
        if n_codes * (age_cap + 1) > DENSE_CELL_LIMIT:
            return None
        return attr, n_codes, age_cap

    def _run_dense(self, child) -> ChunkAggState:
        attr, n_codes, age_cap = self._dense_layout()
        ctx = self.ctx
        schema = ctx.schema
        aggs = self.aggregates
        shape = (n_codes, age_cap + 1)
        hits = np.zeros(shape, dtype=np.int64)
        sizes = np.zeros(n_codes, dtype=np.int64)
        tables = []
        for a in aggs:
            if a.func == "avg":
                tables.append((np.zeros(shape, dtype=np.int64), np.zeros(shape, dtype=np.int64)))
            elif a.func == "min":
                tables.append(np.full(shape, np.iinfo(np.int64).max, dtype=np.int64))
            elif a.func == "max":
                tables.append(np.full(shape, np.iinfo(np.int64).min, dtype=np.int64))
            else:
                tables.append(np.zeros(shape, dtype=np.int64))

        key_seg = ctx.chunk.strings[attr]
        unit = ctx.unit_seconds
        for blk in child.blocks():
            b = blk.birth_index()
            if b is None:
                continue
            code = key_seg.codes.get(b)
            sizes[code] += 1
            bt = blk.birth_time()
            times = None
            last_uc_age = -1
            for i in blk.rows():
                if times is None:
                    times = blk.column_slice(schema.time_attr)
                t = int(times[i - blk.f])
                if t <= bt:
                    continue
                g = -(-(t - bt) // unit)
                hits[code, g] += 1
                for a, table in zip(aggs, tables):
                    if a.func == "count":
                        table[code, g] += 1
                    elif a.func == "usercount":
                        if g != last_uc_age:
                            table[code, g] += 1
                    else:
                        v = int(blk.column_slice(a.arg)[i - blk.f])
                        if a.func == "sum":
                            table[code, g] += v
                        elif a.func == "avg":
                            table[0][code, g] += v
                            table[1][code, g] += 1
                        elif a.func == "min":
                            table[code, g] = min(table[code, g], v)
                        else:
                            table[code, g] = max(table[code, g], v)
                last_uc_age = g

        state = ChunkAggState()
        decode = ctx.chunkset.dict_array(attr)[key_seg.chunk_dict]
        for code in np.nonzero(sizes)[0]:
            state.sizes[(decode[code],)] = int(sizes[code])
        for code, g in zip(*np.nonzero(hits)):
            key = (decode[code],)
            cell = _new_cell(aggs)
            for k, a in enumerate(aggs):
                if a.func == "avg":
                    cell[k] = [int(tables[k][0][code, g]), int(tables[k][1][code, g])]
                elif a.func in ("min", "max"):
                    cell[k] = int(tables[k][code, g])
                else:
                    cell[k] = int(tables[k][code, g])
            state.cells[(key, int(g))] = cell
        return state

    # -- hash path ------------------------------------------------------------

    def _run_hash(self, child) -> ChunkAggState:
        ctx = self.ctx
        schema = ctx.schema
        aggs = self.aggregates
        state = ChunkAggState()
        unit = ctx.unit_seconds
        for blk in child.blocks():
            b = blk.birth_index()
            if b is None:
                continue
            key = tuple(blk.birth_value(attr) for attr in self.cohort_by)
            state.sizes[key] = state.sizes.get(key, 0) + 1
            bt = blk.birth_time()
            times = None
            last_uc_age = -1
            for i in blk.rows():
                if times is None:
                    times = blk.column_slice(schema.time_attr)
                t = int(times[i - blk.f])
                if t <= bt:
                    continue
                g = -(-(t - bt) // unit)
                cell = state.cells.get((key, g))
                if cell is None:
                    cell = _new_cell(aggs)
                    state.cells[(key, g)] = cell
                for k, a in enumerate(aggs):
                    if a.func == "count":
                        cell[k] += 1
                    elif a.func == "usercount":
                        if g != last_uc_age:
                            cell[k] += 1
                    else:
                        v = int(blk.column_slice(a.arg)[i - blk.f])
                        if a.func == "sum":
                            cell[k] += v
                        elif a.func == "avg":
                            cell[k][0] += v
                            cell[k][1] += 1
                        elif a.func == "min":
                            cell[k] = v if cell[k] is None else min(cell[k], v)
                        else:
                            cell[k] = v if cell[k] is None else max(cell[k], v)
                last_uc_age = g
        return state


def merge_partials(states: list[ChunkAggState],
                   aggregates: tuple[SelectItem, ...]) -> ChunkAggState:
    """Order-insensitive merge of per-chunk states."""
    merged = ChunkAggState()
    for st in states:
        for key, s in st.sizes.items():
            merged.sizes[key] = merged.sizes.get(key, 0) + s
        for cell_key, cell in st.cells.items():
            into = merged.cells.get(cell_key)
            if into is None:
                merged.cells[cell_key] = [list(v) if isinstance(v, list) else v for v in cell]
                continue
            for k, a in enumerate(aggregates):
                if a.func == "avg":
                    into[k][0] += cell[k][0]
                    into[k][1] += cell[k][1]
                elif a.func == "min":
                    into[k] = min(into[k], cell[k])
                elif a.func == "max":
                    into[k] = max(into[k], cell[k])
                else:
                    into[k] += cell[k]
    return merged


def finalize_rows(merged: ChunkAggState,
                  aggregates: tuple[SelectItem, ...]) -> list[CohortResultRow]:
    """Emit result rows sorted by (cohort key, age). Ages are always > 0."""
    rows: list[CohortResultRow] = []
    for (key, age) in sorted(merged.cells.keys()):
        cell = merged.cells[(key, age)]
        values = []
        for k, a in enumerate(aggregates):
            if a.func == "avg":
                s, c = cell[k]
                values.append(s / c)
            else:
                values.append(cell[k])
        rows.append(CohortResultRow(key, age, merged.sizes[key], tuple(values)))
    return rows


# --------------------------------------------------------------------------
# Driver
# --------------------------------------------------------------------------

def _run_chunk(chunkset: ChunkSet, plan: LogicalPlan, ci: int,
               force_hash: bool) -> tuple[ChunkAggState, ScanStats]:
    stats = ScanStats()
    chunk = chunkset.chunk(ci)
    stats.chunks_opened += 1
    ctx = _ChunkContext(chunkset, chunk, plan.agg.birth_action, plan.age_unit, stats)
    chain = build_operator_chain(ctx, plan)
    agg = CohortAggOp(ctx, plan.agg.cohort_by, plan.agg.aggregates, force_hash=force_hash)
    return agg.run(chain), stats


def execute_plan(chunkset: ChunkSet, plan: LogicalPlan,
                 chunk_ids: Optional[tuple[int, ...]] = None, *,
                 threads: int = 1, force_hash: bool = False) -> QueryResult:
    if chunk_ids is None:
        chunk_ids = tuple(range(chunkset.chunk_count))
    stats = ScanStats()
    states: list[ChunkAggState] = []
    if threads > 1 and len(chunk_ids) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda ci: _run_chunk(chunkset, plan, ci, force_hash), chunk_ids))
        for st, delta in results:
            states.append(st)
            stats.add(delta)
    else:
        for ci in chunk_ids:
            st, delta = _run_chunk(chunkset, plan, ci, force_hash)
            states.append(st)
            stats.add(delta)
    merged = merge_partials(states, plan.agg.aggregates)
    rows = finalize_rows(merged, plan.agg.aggregates)
    return QueryResult(rows, merged.sizes, stats, plan,
                       ChunkPlan(tuple(chunk_ids), plan))


def run_query(chunkset: ChunkSet, spec: QuerySpec, *, threads: int = 1,
              optimize: bool = True, prune: bool = True,
              force_hash: bool = False) -> QueryResult:
    """Plan, optimize, prune and execute a validated query."""
    plan = build_plan(spec)
    if optimize:
        plan = push_down_birth(plan)
    if prune:
        cp = prune_chunks(plan, chunkset)
        chunk_ids = cp.chunk_ids
    else:
        chunk_ids = tuple(range(chunkset.chunk_count))
    return execute_plan(chunkset, plan, chunk_ids, threads=threads, force_hash=force_hash)


def materialize_selection(chunkset: ChunkSet, plan: LogicalPlan,
                          chunk_ids: Optional[tuple[int, ...]] = None) -> list[ActivityTuple]:
    """Run only the selection chain and decode every surviving row.

    Used to observe birth/age selection results directly, without the
    aggregation on top.
    """
    if chunk_ids is None:
        chunk_ids = tuple(range(chunkset.chunk_count))
    schema = chunkset.schema
    out: list[ActivityTuple] = []
    for ci in chunk_ids:
        stats = ScanStats()
        chunk = chunkset.chunk(ci)
        ctx = _ChunkContext(chunkset, chunk, plan.agg.birth_action, plan.age_unit, stats)
        chain = build_operator_chain(ctx, plan)
        for blk in chain.blocks():
            for i in blk.rows():
                resolve = blk.row_resolver(i)
                out.append(ActivityTuple(
                    user=resolve(schema.user_attr),
                    time=resolve(schema.time_attr),
                    action=resolve(schema.action_attr),
                    dims=tuple(resolve(name) for name, _ in schema.dimensions),
                    measures=tuple(resolve(name) for name in schema.measures),
                ))
    return out


# --------------------------------------------------------------------------
# Cursor surface over one chunk
# --------------------------------------------------------------------------

class RowView:
    """Lazy view of one row; decodes a value per attribute on demand."""

    __slots__ = ("_scan", "index")

    def __init__(self, scan: "ChunkScan", index: int):
        self._scan = scan
        self.index = index

    def value(self, attr: str):
        return self._scan._value(attr, self.index)


class ChunkScan:
    """Row cursor over one chunk with user-block navigation.

    ``get_next`` steps one row; ``get_next_user`` jumps to the next
    user's run and repositions every column there; ``skip_cur_user``
    advances past the current user's remaining rows without decoding
    them. The decoded-row counter only moves for rows actually read.
    """

    def __init__(self, chunkset: ChunkSet, chunk_index: int = 0,
                 stats: Optional[ScanStats] = None):
        self.chunkset = chunkset
        self.chunk = chunkset.chunk(chunk_index)
        self.schema = chunkset.schema
        self.stats = stats if stats is not None else ScanStats()
        self.stats.chunks_opened += 1
        self._run_idx = -1
        self._pos = 0
        self._run_end = 0
        self._next_uncounted = 0

    def _value(self, attr: str, i: int):
        if attr == self.schema.user_attr:
            run = self.chunk.user_runs[self._run_idx]
            if run.first <= i < run.first + run.count:
                return self.chunkset.decode_gid(self.schema.user_attr, run.uid)
            for run in self.chunk.user_runs:
                if run.first <= i < run.first + run.count:
                    return self.chunkset.decode_gid(self.schema.user_attr, run.uid)
            raise IndexError(f"row {i} outside every user run")
        seg = self.chunk.strings.get(attr)
        if seg is not None:
            return self.chunkset.decode_gid(attr, seg.gid_at(i))
        return self.chunk.ints[attr].value_at(i)

    def get_next_user(self):
        """(user, first, count) of the next run, or None when exhausted."""
        self._run_idx += 1
        if self._run_idx >= len(self.chunk.user_runs):
            return None
        run = self.chunk.user_runs[self._run_idx]
        self._pos = run.first
        self._run_end = run.first + run.count
        return (self.chunkset.decode_gid(self.schema.user_attr, run.uid),
                run.first, run.count)

    def get_next(self) -> Optional[RowView]:
        """Next row of the current user, or None at the end of the run."""
        if self._run_idx < 0 or self._pos >= self._run_end:
            return None
        i = self._pos
        self._pos += 1
        if i >= self._next_uncounted:
            self.stats.rows_decoded += i + 1 - self._next_uncounted
            self._next_uncounted = i + 1
        return RowView(self, i)

    def skip_cur_user(self) -> int:
        """Advance past the current user's remaining rows; returns how many."""
        remaining = self._run_end - self._pos
        self._pos = self._run_end
        return remaining


def get_birth_tuple(scan: ChunkScan, birth_action: str) -> Optional[RowView]:
    """First row of the current user whose action is the birth action.

    The cursor must sit at the user's first row. Returns None when the
    user never performs the action within their run.
    """
    action_attr = scan.schema.action_attr
    row = scan.get_next()
    while row is not None and row.value(action_attr) != birth_action:
        row = scan.get_next()
    return row
