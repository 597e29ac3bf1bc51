"""Pure-Python bit-packing kernels.

Fallback implementation used when the compiled extension is unavailable.
Packing and range decodes are vectorized with numpy; single-value reads
and first-match scans stay scalar so a scan stops exactly at the row it
needs and never touches the rest of a run.
"""
from __future__ import annotations

import numpy as np

IMPL_NAME = "py"


def _mask(bit_width: int) -> np.uint64:
    if bit_width == 64:
        return np.uint64(0xFFFF_FFFF_FFFF_FFFF)
    return np.uint64((1 << bit_width) - 1)


def pack(values, bit_width: int) -> np.ndarray:
    """Pack non-negative ints, ``bit_width`` bits each, into 64-bit words.

    Values never straddle a word boundary, so each word holds exactly
    ``64 // bit_width`` values and the tail of every word may be padding.
    """
    if not 1 <= bit_width <= 64:
        raise ValueError(f"bit width must be in [1, 64], got {bit_width}")
    arr = np.asarray(values, dtype=np.uint64)
    n = arr.size
    if n == 0:
        return np.empty(0, dtype=np.uint64)
    per_word = 64 // bit_width
    n_words = -(-n // per_word)
    padded = np.zeros(n_words * per_word, dtype=np.uint64)
    padded[:n] = arr
    lanes = padded.reshape(n_words, per_word)
    shifts = (np.arange(per_word, dtype=np.uint64) * np.uint64(bit_width))
    return np.bitwise_or.reduce(lanes << shifts, axis=1)


def unpack_at(words: np.ndarray, bit_width: int, i: int) -> int:
    """Read the i-th packed value. Constant work, no block decode."""
    per_word = 64 // bit_width
    word = words[i // per_word]
    shift = np.uint64((i % per_word) * bit_width)
    return int((word >> shift) & _mask(bit_width))


def unpack_range(words: np.ndarray, bit_width: int, start: int, count: int) -> np.ndarray:
    """Decode ``count`` consecutive values starting at ``start`` as int64."""
    if count <= 0:
        return np.empty(0, dtype=np.int64)
    per_word = 64 // bit_width
    idx = np.arange(start, start + count, dtype=np.uint64)
    word_idx = (idx // np.uint64(per_word)).astype(np.int64)
    shifts = (idx % np.uint64(per_word)) * np.uint64(bit_width)
    return ((words[word_idx] >> shifts) & _mask(bit_width)).astype(np.int64)


def find_first(words: np.ndarray, bit_width: int, start: int, stop: int, target: int) -> int:
    """Index of the first value equal to ``target`` in [start, stop), or -1.

    Scans forward one value at a time and stops at the first hit, so the
    number of values examined is exactly ``hit - start + 1`` (or the whole
    range on a miss).
    """
    per_word = 64 // bit_width
    mask = _mask(bit_width)
    t = np.uint64(target)
    bw = np.uint64(bit_width)
    pw = np.uint64(per_word)
    for i in range(start, stop):
        u = np.uint64(i)
        if (words[int(u // pw)] >> ((u % pw) * bw)) & mask == t:
            return i
    return -1
