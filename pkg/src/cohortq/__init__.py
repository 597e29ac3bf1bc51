"""Embedded columnar query engine for cohort analysis over activity logs.

The public surface is small: build or open a chunk store, parse and
validate a cohort query, and run it on either the columnar engine or the
naive reference evaluator.
"""

from .core import ActivitySchema, ActivityTuple, BirthInfo, NEVER, normalize_age
from .errors import (
    CohortError,
    DataError,
    QueryError,
    QuerySyntaxError,
    QueryValidationError,
    StorageFormatError,
)
from .executor import CohortResultRow, QueryResult, ScanStats, run_query
from .ingest import GenSpec, generate, load_csv, scale_dataset, sort_and_partition
from .oracle import oracle_eval
from .query import QuerySpec, parse, print_query, validate
from .storage import ChunkSet, build_chunkset, open_chunkset, write_chunkset

__version__ = "0.1.0"

__all__ = [
    "ActivitySchema",
    "ActivityTuple",
    "BirthInfo",
    "ChunkSet",
    "CohortError",
    "CohortResultRow",
    "DataError",
    "GenSpec",
    "NEVER",
    "QueryError",
    "QueryResult",
    "QuerySpec",
    "QuerySyntaxError",
    "QueryValidationError",
    "ScanStats",
    "StorageFormatError",
    "build_chunkset",
    "generate",
    "load_csv",
    "normalize_age",
    "open_chunkset",
    "oracle_eval",
    "parse",
    "print_query",
    "run_query",
    "scale_dataset",
    "sort_and_partition",
    "validate",
    "write_chunkset",
]
