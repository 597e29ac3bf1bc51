# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bit-packing kernels. Mirrors _bitpack_py exactly."""

import numpy as np

IMPL_NAME = "c"

ctypedef unsigned long long u64


cdef inline u64 _mask(int bit_width) nogil:
    if bit_width == 64:
        return <u64>0xFFFFFFFFFFFFFFFF
    return (<u64>1 << bit_width) - 1


def pack(values, int bit_width):
    if bit_width < 1 or bit_width > 64:
        raise ValueError(f"bit width must be in [1, 64], got {bit_width}")
    arr = np.ascontiguousarray(values, dtype=np.uint64)
    cdef u64[::1] vals = arr
    cdef Py_ssize_t n = vals.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.uint64)
    cdef int per_word = 64 // bit_width
    cdef Py_ssize_t n_words = (n + per_word - 1) // per_word
    out = np.zeros(n_words, dtype=np.uint64)
    cdef u64[::1] words = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            words[i // per_word] |= vals[i] << ((i % per_word) * bit_width)
    return out


def unpack_at(u64[::1] words, int bit_width, Py_ssize_t i):
    cdef int per_word = 64 // bit_width
    return <object>((words[i // per_word] >> ((i % per_word) * bit_width)) & _mask(bit_width))


def unpack_range(u64[::1] words, int bit_width, Py_ssize_t start, Py_ssize_t count):
    if count <= 0:
        return np.empty(0, dtype=np.int64)
    out = np.empty(count, dtype=np.int64)
    cdef long long[::1] dst = out
    cdef int per_word = 64 // bit_width
    cdef u64 mask = _mask(bit_width)
    cdef Py_ssize_t k, i
    with nogil:
        for k in range(count):
            i = start + k
            dst[k] = <long long>((words[i // per_word] >> ((i % per_word) * bit_width)) & mask)
    return out


def find_first(u64[::1] words, int bit_width, Py_ssize_t start, Py_ssize_t stop, u64 target):
    cdef int per_word = 64 // bit_width
    cdef u64 mask = _mask(bit_width)
    cdef Py_ssize_t i
    cdef Py_ssize_t hit = -1
    with nogil:
        for i in range(start, stop):
            if ((words[i // per_word] >> ((i % per_word) * bit_width)) & mask) == target:
                hit = i
                break
    return hit
