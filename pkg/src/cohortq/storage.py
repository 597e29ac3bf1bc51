"""Compressed, chunked, user-aligned columnar store.

An activity table is persisted sorted by its (user, time, action) primary
key and horizontally partitioned into chunks that never split a user.
Within a chunk every column is stored compressed:

* user column: run-length triples (user global-id, first row, run length),
* string columns: a per-chunk dictionary of the global-ids present plus a
  bit-packed code per row,
* integer columns: per-chunk min/max plus bit-packed deltas from the min.

All packed arrays support O(1) random reads without block decompression.
Chunk dictionaries and integer ranges also live in the manifest, so chunk
pruning never touches chunk data.

On disk a store is a directory with ``manifest.bin`` and ``chunks.bin``;
all multi-byte integers are little-endian, both files carry a magic tag,
a format version and CRC32 checksums.
"""
from __future__ import annotations

import io
import struct
import threading
import zlib
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .core import ActivitySchema, ActivityTuple
from .errors import (
    ChecksumError,
    DataError,
    FormatVersionError,
    StorageFormatError,
    TruncatedFileError,
)

MANIFEST_MAGIC = b"CQMF"
CHUNKS_MAGIC = b"CQCD"
FORMAT_VERSION = 1

DEFAULT_CHUNK_SIZE = 262_144


def min_bit_width(max_value: int) -> int:
    """Bits needed for ``max_value``; never below 1 so addressing stays uniform."""
    if max_value < 0:
        raise DataError(f"packed values must be non-negative, got {max_value}")
    return max(1, int(max_value).bit_length())


class PackedArray:
    """Fixed-width bit-packed integer array over 64-bit words."""

    __slots__ = ("words", "bit_width", "length")

    def __init__(self, words: np.ndarray, bit_width: int, length: int):
        self.words = words
        self.bit_width = bit_width
        self.length = length

    @classmethod
    def pack(cls, values) -> "PackedArray":
        arr = np.asarray(values, dtype=np.int64)
        if arr.size and int(arr.min()) < 0:
            raise DataError("packed values must be non-negative")
        width = min_bit_width(int(arr.max()) if arr.size else 0)
        return cls(kernels.pack(arr, width), width, int(arr.size))

    def get(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(f"index {i} out of range for length {self.length}")
        return int(kernels.unpack_at(self.words, self.bit_width, i))

    def slice(self, start: int, count: int) -> np.ndarray:
        if start < 0 or start + count > self.length:
            raise IndexError(f"slice [{start}, {start + count}) out of range")
        return kernels.unpack_range(self.words, self.bit_width, start, count)

    def find_first(self, target: int, start: int, stop: int) -> int:
        """First index in [start, stop) holding ``target``, else -1. Stops
        scanning at the hit."""
        stop = min(stop, self.length)
        if start >= stop or target < 0:
            return -1
        if min_bit_width(target) > self.bit_width:
            return -1
        return int(kernels.find_first(self.words, self.bit_width, start, stop, target))

    def to_list(self) -> list[int]:
        return self.slice(0, self.length).tolist()


# --------------------------------------------------------------------------
# Codecs
# --------------------------------------------------------------------------

def build_global_dict(values: Iterable[str]) -> tuple[list[str], dict[str, int]]:
    """Sorted unique values and the value -> global-id mapping."""
    ordered = sorted(set(values))
    return ordered, {v: i for i, v in enumerate(ordered)}


class RleTriple(tuple):
    """(user global-id, first row position, run length)."""

    __slots__ = ()

    def __new__(cls, uid: int, first: int, count: int):
        return super().__new__(cls, (uid, first, count))

    @property
    def uid(self):
        return self[0]

    @property
    def first(self):
        return self[1]

    @property
    def count(self):
        return self[2]


def encode_user_runs(user_gids: Sequence[int]) -> list[RleTriple]:
    """Run-length encode the user column of one chunk.

    Requires each user's rows to be contiguous; a user id reappearing
    after a different one means the sort step was skipped or broken.
    """
    runs: list[RleTriple] = []
    seen: set[int] = set()
    i, n = 0, len(user_gids)
    while i < n:
        uid = user_gids[i]
        if uid in seen:
            raise DataError(f"user id {uid} appears in non-contiguous runs")
        seen.add(uid)
        j = i + 1
        while j < n and user_gids[j] == uid:
            j += 1
        runs.append(RleTriple(int(uid), i, j - i))
        i = j
    return runs


def decode_user_runs(runs: Sequence[RleTriple]) -> list[int]:
    out: list[int] = []
    for r in runs:
        out.extend([r.uid] * r.count)
    return out


@dataclass
class StringSegment:
    """Two-level dictionary codes for one string column in one chunk."""

    chunk_dict: np.ndarray  # sorted global-ids present in this chunk
    codes: PackedArray      # per-row positions into chunk_dict

    def gid_at(self, i: int) -> int:
        return int(self.chunk_dict[self.codes.get(i)])

    def gids_slice(self, start: int, count: int) -> np.ndarray:
        return self.chunk_dict[self.codes.slice(start, count)]

    def code_for_gid(self, gid: int) -> Optional[int]:
        pos = int(np.searchsorted(self.chunk_dict, gid))
        if pos < len(self.chunk_dict) and int(self.chunk_dict[pos]) == gid:
            return pos
        return None

    @property
    def row_count(self) -> int:
        return self.codes.length


def encode_string_segment(gids_per_row: Sequence[int]) -> StringSegment:
    arr = np.asarray(gids_per_row, dtype=np.int64)
    chunk_dict = np.unique(arr) if arr.size else np.empty(0, dtype=np.int64)
    codes = np.searchsorted(chunk_dict, arr)
    return StringSegment(chunk_dict, PackedArray.pack(codes))


@dataclass
class IntSegment:
    """Delta-from-chunk-min codes for one integer column in one chunk."""

    vmin: int
    vmax: int
    deltas: PackedArray

    def value_at(self, i: int) -> int:
        return self.vmin + self.deltas.get(i)

    def values_slice(self, start: int, count: int) -> np.ndarray:
        return self.deltas.slice(start, count) + self.vmin

    @property
    def row_count(self) -> int:
        return self.deltas.length


def encode_int_segment(values: Sequence[int]) -> IntSegment:
    arr = np.asarray(values, dtype=np.int64)
    if arr.size == 0:
        return IntSegment(0, 0, PackedArray.pack(arr))
    vmin, vmax = int(arr.min()), int(arr.max())
    return IntSegment(vmin, vmax, PackedArray.pack(arr - vmin))


@dataclass
class Chunk:
    row_count: int
    user_runs: list[RleTriple]
    strings: dict[str, StringSegment]
    ints: dict[str, IntSegment]


@dataclass
class ChunkMeta:
    """Manifest-side view of one chunk: everything pruning needs."""

    row_count: int
    user_count: int
    string_dicts: dict[str, np.ndarray]
    int_ranges: dict[str, tuple[int, int]]


def chunk_has_action(meta: ChunkMeta, action_attr: str, gid: int) -> bool:
    """Binary-search the chunk's action dictionary for a global-id."""
    cd = meta.string_dicts[action_attr]
    pos = int(np.searchsorted(cd, gid))
    return pos < len(cd) and int(cd[pos]) == gid


def chunk_range_overlaps(meta: ChunkMeta, column: str, lo: int, hi: int) -> bool:
    """Closed-interval overlap of the chunk's value range with [lo, hi]."""
    cmin, cmax = meta.int_ranges[column]
    return cmin <= hi and lo <= cmax


# --------------------------------------------------------------------------
# Chunk sets
# --------------------------------------------------------------------------

class ChunkSet:
    """An immutable encoded table: manifest metadata plus chunk access.

    Chunks are either held in memory (freshly built) or decoded lazily
    from ``chunks.bin`` (opened store). Concurrent readers are safe.
    """

    def __init__(
        self,
        schema: ActivitySchema,
        chunk_size: int,
        string_dicts: dict[str, list[str]],
        int_ranges: dict[str, tuple[int, int]],
        metas: list[ChunkMeta],
        chunks: Optional[list[Chunk]] = None,
        reader: Optional["_ChunkReader"] = None,
    ):
        self.schema = schema
        self.chunk_size = chunk_size
        self.string_dicts = string_dicts
        self.int_ranges = int_ranges
        self.metas = metas
        self._chunks = chunks
        self._reader = reader
        self._lookups = {col: {v: i for i, v in enumerate(d)} for col, d in string_dicts.items()}
        self._dict_arrays = {col: np.array(d, dtype=object) for col, d in string_dicts.items()}

    @property
    def chunk_count(self) -> int:
        return len(self.metas)

    @property
    def row_count(self) -> int:
        return sum(m.row_count for m in self.metas)

    def gid(self, column: str, value: str) -> Optional[int]:
        return self._lookups[column].get(value)

    def decode_gid(self, column: str, gid: int) -> str:
        return self.string_dicts[column][gid]

    def dict_array(self, column: str) -> np.ndarray:
        return self._dict_arrays[column]

    def chunk(self, i: int) -> Chunk:
        if self._chunks is not None:
            return self._chunks[i]
        assert self._reader is not None
        return self._reader.read_chunk(i)

    def decode_to_tuples(self) -> list[ActivityTuple]:
        """Materialize every chunk back into plain activity tuples."""
        out: list[ActivityTuple] = []
        schema = self.schema
        for ci in range(self.chunk_count):
            ch = self.chunk(ci)
            n = ch.row_count
            users = decode_user_runs(ch.user_runs)
            cols: dict[str, list] = {}
            for col, seg in ch.strings.items():
                d = self.string_dicts[col]
                cols[col] = [d[g] for g in seg.gids_slice(0, n)]
            for col, seg in ch.ints.items():
                cols[col] = seg.values_slice(0, n).tolist()
            user_dict = self.string_dicts[schema.user_attr]
            for i in range(n):
                dims = tuple(cols[name][i] for name, _ in schema.dimensions)
                measures = tuple(cols[name][i] for name in schema.measures)
                out.append(ActivityTuple(
                    user=user_dict[users[i]],
                    time=int(cols[schema.time_attr][i]),
                    action=cols[schema.action_attr][i],
                    dims=dims,
                    measures=measures,
                ))
        return out

    def close(self) -> None:
        if self._reader is not None:
            self._reader.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _check_runs(runs: list[list[ActivityTuple]]) -> None:
    prev_key = None
    users_seen: set[str] = set()
    for run in runs:
        run_users: set[str] = set()
        for t in run:
            key = t.sort_key()
            if prev_key is not None and key < prev_key:
                raise DataError("tuples are not sorted by (user, time, action)")
            prev_key = key
            run_users.add(t.user)
        overlap = run_users & users_seen
        if overlap:
            raise DataError(f"users split across chunks: {sorted(overlap)[:3]}")
        users_seen |= run_users


def build_chunkset(
    schema: ActivitySchema,
    runs: list[list[ActivityTuple]],
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> ChunkSet:
    """Encode pre-sorted, user-aligned runs into an in-memory chunk set."""
    _check_runs(runs)
    all_tuples = [t for run in runs for t in run]

    string_cols = schema.string_columns()
    int_cols = schema.integer_columns()

    string_dicts: dict[str, list[str]] = {}
    lookups: dict[str, dict[str, int]] = {}
    for col in string_cols:
        values = [schema.value_of(t, col) for t in all_tuples]
        d, lk = build_global_dict(values)
        string_dicts[col] = d
        lookups[col] = lk

    int_ranges: dict[str, tuple[int, int]] = {}
    for col in int_cols:
        values = [schema.value_of(t, col) for t in all_tuples]
        if values:
            int_ranges[col] = (min(values), max(values))
        else:
            int_ranges[col] = (0, 0)

    chunks: list[Chunk] = []
    metas: list[ChunkMeta] = []
    for run in runs:
        if not run:
            continue
        strings: dict[str, StringSegment] = {}
        for col in string_cols:
            if col == schema.user_attr:
                continue
            gids = [lookups[col][schema.value_of(t, col)] for t in run]
            strings[col] = encode_string_segment(gids)
        ints: dict[str, IntSegment] = {}
        for col in int_cols:
            ints[col] = encode_int_segment([schema.value_of(t, col) for t in run])
        user_gids = [lookups[schema.user_attr][t.user] for t in run]
        user_runs = encode_user_runs(user_gids)
        chunks.append(Chunk(len(run), user_runs, strings, ints))
        metas.append(ChunkMeta(
            row_count=len(run),
            user_count=len(user_runs),
            string_dicts={c: s.chunk_dict for c, s in strings.items()},
            int_ranges={c: (s.vmin, s.vmax) for c, s in ints.items()},
        ))

    return ChunkSet(schema, chunk_size, string_dicts, int_ranges, metas, chunks=chunks)


# --------------------------------------------------------------------------
# Binary format
# --------------------------------------------------------------------------

class _Writer:
    def __init__(self):
        self.buf = io.BytesIO()

    def u8(self, v):
        self.buf.write(struct.pack("<B", v))

    def u32(self, v):
        self.buf.write(struct.pack("<I", v))

    def u64(self, v):
        self.buf.write(struct.pack("<Q", v))

    def i64(self, v):
        self.buf.write(struct.pack("<q", v))

    def text(self, s: str):
        raw = s.encode("utf-8")
        self.u32(len(raw))
        self.buf.write(raw)

    def getvalue(self) -> bytes:
        return self.buf.getvalue()


class _Reader:
    def __init__(self, data: bytes, where: str):
        self.data = data
        self.pos = 0
        self.where = where

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(f"{self.where}: ran out of bytes at offset {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self):
        return struct.unpack("<B", self._take(1))[0]

    def u32(self):
        return struct.unpack("<I", self._take(4))[0]

    def u64(self):
        return struct.unpack("<Q", self._take(8))[0]

    def i64(self):
        return struct.unpack("<q", self._take(8))[0]

    def text(self) -> str:
        n = self.u32()
        return self._take(n).decode("utf-8")


@dataclass
class _PackedLoc:
    bit_width: int
    word_count: int
    rel_offset: int
    length: int


@dataclass
class _ChunkDirEntry:
    """One chunk's directory record.

    The writer fills the *_loc fields with (PackedArray, rel_offset)
    pairs; the reader fills them with _PackedLoc records.
    """

    row_count: int
    user_count: int
    offset: int
    byte_length: int
    crc: int
    uid_loc: object = None
    runlen_loc: object = None
    string_dicts: dict = field(default_factory=dict)
    string_locs: dict = field(default_factory=dict)
    int_ranges: dict = field(default_factory=dict)
    int_locs: dict = field(default_factory=dict)


def _packed_bytes(arr: PackedArray) -> bytes:
    return arr.words.astype("<u8").tobytes()


def _write_packed_loc(w: _Writer, arr: PackedArray, rel_offset: int):
    w.u8(arr.bit_width)
    w.u32(len(arr.words))
    w.u32(rel_offset)
    w.u32(arr.length)


def _read_packed_loc(r: _Reader) -> _PackedLoc:
    return _PackedLoc(r.u8(), r.u32(), r.u32(), r.u32())


def write_chunkset(cs: ChunkSet, path) -> dict:
    """Persist a chunk set to ``path`` (a directory). Returns size stats."""
    import os

    os.makedirs(path, exist_ok=True)
    schema = cs.schema
    string_cols = schema.string_columns()
    int_cols = schema.integer_columns()

    chunk_payloads: list[bytes] = []
    entries: list[_ChunkDirEntry] = []
    offset = len(CHUNKS_MAGIC) + 4
    for ci in range(cs.chunk_count):
        ch = cs.chunk(ci)
        parts: list[bytes] = []
        rel = 0

        def put(arr: PackedArray) -> int:
            nonlocal rel
            raw = _packed_bytes(arr)
            parts.append(raw)
            at = rel
            rel += len(raw)
            return at

        uid_arr = PackedArray.pack([r.uid for r in ch.user_runs])
        runlen_arr = PackedArray.pack([r.count for r in ch.user_runs])
        entry = _ChunkDirEntry(
            row_count=ch.row_count,
            user_count=len(ch.user_runs),
            offset=offset,
            byte_length=0,
            crc=0,
        )
        entry.uid_loc = (uid_arr, put(uid_arr))
        entry.runlen_loc = (runlen_arr, put(runlen_arr))
        for col in string_cols:
            if col == schema.user_attr:
                continue
            seg = ch.strings[col]
            entry.string_dicts[col] = seg.chunk_dict
            entry.string_locs[col] = (seg.codes, put(seg.codes))
        for col in int_cols:
            seg = ch.ints[col]
            entry.int_ranges[col] = (seg.vmin, seg.vmax)
            entry.int_locs[col] = (seg.deltas, put(seg.deltas))
        payload = b"".join(parts)
        entry.byte_length = len(payload)
        entry.crc = zlib.crc32(payload)
        offset += len(payload)
        chunk_payloads.append(payload)
        entries.append(entry)

    chunks_path = os.path.join(path, "chunks.bin")
    with open(chunks_path, "wb") as f:
        f.write(CHUNKS_MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        for payload in chunk_payloads:
            f.write(payload)

    w = _Writer()
    w.text(schema.table_name)
    w.text(schema.user_attr)
    w.text(schema.time_attr)
    w.text(schema.action_attr)
    w.u32(len(schema.dimensions))
    for name, kind in schema.dimensions:
        w.text(name)
        w.u8(0 if kind == "string" else 1)
    w.u32(len(schema.measures))
    for name in schema.measures:
        w.text(name)
    w.u64(cs.chunk_size)
    w.u32(len(string_cols))
    for col in string_cols:
        w.text(col)
        d = cs.string_dicts[col]
        w.u32(len(d))
        for v in d:
            w.text(v)
    w.u32(len(int_cols))
    for col in int_cols:
        w.text(col)
        lo, hi = cs.int_ranges[col]
        w.i64(lo)
        w.i64(hi)
    w.u32(len(entries))
    for entry in entries:
        w.u32(entry.row_count)
        w.u32(entry.user_count)
        w.u64(entry.offset)
        w.u64(entry.byte_length)
        w.u32(entry.crc)
        for arr, rel in (entry.uid_loc, entry.runlen_loc):
            _write_packed_loc(w, arr, rel)
        for col in string_cols:
            if col == schema.user_attr:
                continue
            cd = entry.string_dicts[col]
            w.u32(len(cd))
            for gid in cd:
                w.u32(int(gid))
            arr, rel = entry.string_locs[col]
            _write_packed_loc(w, arr, rel)
        for col in int_cols:
            lo, hi = entry.int_ranges[col]
            w.i64(lo)
            w.i64(hi)
            arr, rel = entry.int_locs[col]
            _write_packed_loc(w, arr, rel)

    payload = w.getvalue()
    manifest_path = os.path.join(path, "manifest.bin")
    with open(manifest_path, "wb") as f:
        f.write(MANIFEST_MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(payload)
        f.write(struct.pack("<I", zlib.crc32(payload)))

    chunk_bytes = sum(len(p) for p in chunk_payloads)
    return {
        "chunks": cs.chunk_count,
        "rows": cs.row_count,
        "manifest_bytes": len(payload) + 12,
        "chunk_bytes": chunk_bytes + 8,
    }


class _ChunkReader:
    """Lazy chunk decoder over an open ``chunks.bin``."""

    def __init__(self, path: str, schema: ActivitySchema, entries: list[_ChunkDirEntry]):
        self.path = path
        self.schema = schema
        self.entries = entries
        self._lock = threading.Lock()  # seek/read pairs must not interleave
        self._fh: Optional[BinaryIO] = open(path, "rb")
        head = self._fh.read(8)
        if len(head) < 8:
            raise TruncatedFileError(f"{path}: missing header")
        if head[:4] != CHUNKS_MAGIC:
            raise StorageFormatError(f"{path}: bad magic {head[:4]!r}")
        version = struct.unpack("<I", head[4:])[0]
        if version != FORMAT_VERSION:
            raise FormatVersionError(f"{path}: version {version}, expected {FORMAT_VERSION}")

    def _load_packed(self, blob: bytes, loc: _PackedLoc) -> PackedArray:
        end = loc.rel_offset + loc.word_count * 8
        if end > len(blob):
            raise TruncatedFileError(f"{self.path}: packed array extends past chunk span")
        words = np.frombuffer(blob, dtype="<u8", count=loc.word_count,
                              offset=loc.rel_offset).astype(np.uint64)
        return PackedArray(words, loc.bit_width, loc.length)

    def read_chunk(self, i: int) -> Chunk:
        entry = self.entries[i]
        assert self._fh is not None, "reader is closed"
        with self._lock:
            self._fh.seek(entry.offset)
            blob = self._fh.read(entry.byte_length)
        if len(blob) < entry.byte_length:
            raise TruncatedFileError(f"{self.path}: chunk {i} is cut short")
        if zlib.crc32(blob) != entry.crc:
            raise ChecksumError(f"{self.path}: chunk {i} checksum mismatch")

        uids = self._load_packed(blob, entry.uid_loc)
        runlens = self._load_packed(blob, entry.runlen_loc)
        runs: list[RleTriple] = []
        pos = 0
        for k in range(uids.length):
            n = runlens.get(k)
            runs.append(RleTriple(uids.get(k), pos, n))
            pos += n
        if pos != entry.row_count:
            raise StorageFormatError(
                f"{self.path}: chunk {i} run lengths sum to {pos}, expected {entry.row_count}"
            )

        strings = {
            col: StringSegment(entry.string_dicts[col], self._load_packed(blob, loc))
            for col, loc in entry.string_locs.items()
        }
        ints = {
            col: IntSegment(entry.int_ranges[col][0], entry.int_ranges[col][1],
                            self._load_packed(blob, loc))
            for col, loc in entry.int_locs.items()
        }
        return Chunk(entry.row_count, runs, strings, ints)

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def open_chunkset(path) -> ChunkSet:
    """Open a store directory written by :func:`write_chunkset`."""
    import os

    manifest_path = os.path.join(path, "manifest.bin")
    with open(manifest_path, "rb") as f:
        raw = f.read()
    if len(raw) < 12:
        raise TruncatedFileError(f"{manifest_path}: too small to hold a header")
    if raw[:4] != MANIFEST_MAGIC:
        raise StorageFormatError(f"{manifest_path}: bad magic {raw[:4]!r}")
    version = struct.unpack("<I", raw[4:8])[0]
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"{manifest_path}: version {version}, expected {FORMAT_VERSION}")
    payload, stored_crc = raw[8:-4], struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(payload) != stored_crc:
        raise ChecksumError(f"{manifest_path}: manifest checksum mismatch")

    r = _Reader(payload, manifest_path)
    table_name = r.text()
    user_attr = r.text()
    time_attr = r.text()
    action_attr = r.text()
    dims = []
    for _ in range(r.u32()):
        name = r.text()
        kind = "string" if r.u8() == 0 else "integer"
        dims.append((name, kind))
    measures = tuple(r.text() for _ in range(r.u32()))
    schema = ActivitySchema(user_attr, time_attr, action_attr, tuple(dims), measures, table_name)
    chunk_size = r.u64()

    string_dicts: dict[str, list[str]] = {}
    for _ in range(r.u32()):
        col = r.text()
        string_dicts[col] = [r.text() for _ in range(r.u32())]
    int_ranges: dict[str, tuple[int, int]] = {}
    for _ in range(r.u32()):
        col = r.text()
        int_ranges[col] = (r.i64(), r.i64())

    string_cols = schema.string_columns()
    int_cols = schema.integer_columns()
    entries: list[_ChunkDirEntry] = []
    metas: list[ChunkMeta] = []
    for _ in range(r.u32()):
        entry = _ChunkDirEntry(
            row_count=r.u32(),
            user_count=r.u32(),
            offset=r.u64(),
            byte_length=r.u64(),
            crc=r.u32(),
        )
        entry.uid_loc = _read_packed_loc(r)
        entry.runlen_loc = _read_packed_loc(r)
        for col in string_cols:
            if col == schema.user_attr:
                continue
            cd = np.array([r.u32() for _ in range(r.u32())], dtype=np.int64)
            entry.string_dicts[col] = cd
            entry.string_locs[col] = _read_packed_loc(r)
        for col in int_cols:
            entry.int_ranges[col] = (r.i64(), r.i64())
            entry.int_locs[col] = _read_packed_loc(r)
        entries.append(entry)
        metas.append(ChunkMeta(
            row_count=entry.row_count,
            user_count=entry.user_count,
            string_dicts=dict(entry.string_dicts),
            int_ranges=dict(entry.int_ranges),
        ))

    reader = _ChunkReader(os.path.join(path, "chunks.bin"), schema, entries)
    return ChunkSet(schema, chunk_size, string_dicts, int_ranges, metas, reader=reader)
