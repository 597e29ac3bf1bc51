"""Command-line interface: ingest, gen, query, bench.

Exit codes: 0 success, 1 data or I/O problems, 2 usage or query errors.
"""
from __future__ import annotations

import argparse
import csv as _csv
import io
import json
import os
import sys
import time
from dataclasses import replace
from typing import Optional

from . import bench as bench_mod
from .core import ActivitySchema
from .errors import CohortError, DataError, QueryError
from .executor import QueryResult, run_query
from .ingest import GenSpec, generate, load_csv, sort_and_partition, write_csv
from .oracle import oracle_eval
from .plan import plan_text
from .query import QuerySpec, parse, validate
from .storage import build_chunkset, open_chunkset, write_chunkset

ENGINES = ("columnar", "oracle")


def _load_schema_file(path: str) -> ActivitySchema:
    with open(path) as fh:
        raw = json.load(fh)
    return ActivitySchema(
        user_attr=raw["user"],
        time_attr=raw["time"],
        action_attr=raw["action"],
        dimensions=tuple((d["name"], d.get("kind", "string")) for d in raw.get("dimensions", [])),
        measures=tuple(raw.get("measures", [])),
        table_name=raw.get("table", "GameActions"),
    )


def _resolve_threads(value: Optional[int]) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("COHORTQ_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DataError(f"COHORTQ_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


# --------------------------------------------------------------------------
# Result projection and formatting
# --------------------------------------------------------------------------

def project_rows(spec: QuerySpec, rows) -> tuple[list[str], list[list]]:
    """Shape engine rows according to the SELECT list."""
    headers = [item.output_name() for item in spec.select]
    agg_positions: dict[int, int] = {}
    seen_aggs = 0
    for idx, item in enumerate(spec.select):
        if item.kind == "aggregate":
            agg_positions[idx] = seen_aggs
            seen_aggs += 1
    out: list[list] = []
    for row in rows:
        cells = []
        for idx, item in enumerate(spec.select):
            if item.kind == "attr":
                cells.append(row.key[spec.cohort_by.index(item.name)])
            elif item.kind == "cohortsize":
                cells.append(row.size)
            elif item.kind == "age":
                cells.append(row.age)
            else:
                cells.append(row.values[agg_positions[idx]])
        out.append(cells)
    return headers, out


def _cell_text(value) -> str:
    return str(value)


def format_result(spec: QuerySpec, rows, fmt: str) -> str:
    headers, table = project_rows(spec, rows)
    if fmt == "csv":
        buf = io.StringIO()
        writer = _csv.writer(buf, lineterminator="\n")
        writer.writerow(headers)
        for cells in table:
            writer.writerow([_cell_text(c) for c in cells])
        return buf.getvalue()
    widths = [len(h) for h in headers]
    rendered = [[_cell_text(c) for c in cells] for cells in table]
    for cells in rendered:
        for k, cell in enumerate(cells):
            widths[k] = max(widths[k], len(cell))
    lines = ["  ".join(h.ljust(widths[k]) for k, h in enumerate(headers))]
    lines.append("  ".join("-" * w for w in widths))
    for cells in rendered:
        lines.append("  ".join(cell.ljust(widths[k]) for k, cell in enumerate(cells)))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    t0 = time.perf_counter()
    schema = _load_schema_file(args.schema) if args.schema else None
    schema, tuples = load_csv(args.input, schema, table_name=args.table)
    runs = sort_and_partition(tuples, args.chunk_size)
    chunkset = build_chunkset(schema, runs, args.chunk_size)
    info = write_chunkset(chunkset, args.output)
    elapsed = time.perf_counter() - t0
    print(f"tuples: {info['rows']}")
    print(f"chunks: {info['chunks']}")
    print(f"compressed bytes: {info['chunk_bytes'] + info['manifest_bytes']}")
    print(f"elapsed seconds: {elapsed:.3f}")
    return 0


def cmd_gen(args) -> int:
    spec = GenSpec(
        user_count=args.users,
        seed=args.seed,
        scale=args.scale,
        min_actions=args.min_actions,
        max_actions=args.max_actions,
        days=args.days,
        table_name=args.table,
    )
    schema, tuples = generate(spec)
    if args.output == "-":
        write_csv(schema, tuples, sys.stdout)
    else:
        with open(args.output, "w", newline="") as fh:
            n = write_csv(schema, tuples, fh)
        print(f"wrote {n} tuples to {args.output}")
    return 0


def _read_query_text(args) -> str:
    if args.query is not None:
        return args.query
    if args.query_file is not None:
        if args.query_file == "-":
            return sys.stdin.read()
        with open(args.query_file) as fh:
            return fh.read()
    raise QueryError("no query given: use --query or --query-file")


def cmd_query(args) -> int:
    with open_chunkset(args.db) as chunkset:
        text = _read_query_text(args)
        spec = validate(parse(text), chunkset.schema)
        if args.age_unit:
            spec = replace(spec, age_unit=args.age_unit)
        if args.engine == "oracle":
            rows = oracle_eval(spec, chunkset.schema, chunkset.decode_to_tuples())
            if args.explain:
                print("oracle evaluation (no plan)")
                return 0
        else:
            threads = _resolve_threads(args.threads)
            result: QueryResult = run_query(chunkset, spec, threads=threads)
            if args.explain:
                print(plan_text(result.plan))
                return 0
            rows = result.rows
        sys.stdout.write(format_result(spec, rows, args.format))
    return 0


def cmd_bench(args) -> int:
    names = [n.strip() for n in args.queries.split(",") if n.strip()]
    if names == ["all"]:
        names = list(bench_mod.QUERY_NAMES)
    with open_chunkset(args.db) as chunkset:
        threads = _resolve_threads(args.threads)
        results = bench_mod.run_benchmark(
            chunkset, names, repeat=args.repeat,
            d1=args.d1, d2=args.d2, g=args.g, threads=threads,
        )
    writer = _csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["query", "rows", "mean_seconds"]
                    + [f"run_{i + 1}" for i in range(args.repeat)])
    for r in results:
        writer.writerow([r.name, r.rows, f"{r.mean_seconds:.6f}"]
                        + [f"{t:.6f}" for t in r.runs])
    return 0


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohortq",
        description="Embedded columnar engine for cohort queries over activity logs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a CSV activity table into a chunk store")
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--output", required=True, help="store directory to create")
    p.add_argument("--chunk-size", type=int, default=262_144,
                   help="target tuples per chunk (users are never split)")
    p.add_argument("--schema", help="JSON schema file; inferred from CSV when omitted")
    p.add_argument("--table", default="GameActions", help="table name to record")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("gen", help="generate a synthetic activity CSV")
    p.add_argument("--users", type=int, default=1000)
    p.add_argument("--scale", type=int, default=1,
                   help="replicate every user this many times under fresh ids")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--min-actions", type=int, default=5)
    p.add_argument("--max-actions", type=int, default=60)
    p.add_argument("--days", type=int, default=38)
    p.add_argument("--table", default="GameActions")
    p.add_argument("--output", required=True, help="CSV path, or - for stdout")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("query", help="run a cohort query against a store")
    p.add_argument("--db", required=True, help="store directory")
    p.add_argument("--query", help="query text")
    p.add_argument("--query-file", help="file holding the query, or - for stdin")
    p.add_argument("--engine", choices=ENGINES, default="columnar")
    p.add_argument("--format", choices=("csv", "table"), default="csv")
    p.add_argument("--age-unit", choices=("day", "week", "month"), default=None)
    p.add_argument("--explain", action="store_true", help="print the optimized plan")
    p.add_argument("--threads", type=int, default=None,
                   help="chunk-parallel workers (default: COHORTQ_THREADS or all cores)")
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("bench", help="time the canned benchmark queries")
    p.add_argument("--db", required=True)
    p.add_argument("--queries", default="all", help="comma list like q1,q3 or 'all'")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--d1", default=bench_mod.DEFAULT_D1)
    p.add_argument("--d2", default=bench_mod.DEFAULT_D2)
    p.add_argument("--g", type=int, default=bench_mod.DEFAULT_G)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except QueryError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (DataError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except CohortError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
