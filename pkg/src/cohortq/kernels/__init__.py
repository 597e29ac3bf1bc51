"""Bit-packing kernel dispatch.

Two interchangeable implementations exist: a compiled Cython extension
(``_bitpack_c``) and a pure-Python/numpy fallback (``_bitpack_py``). The
compiled one is preferred when it imported cleanly; ``COHORTQ_KERNELS``
(``c`` or ``py``) overrides the choice, and :func:`set_implementation`
switches at runtime, which the kernel benchmark uses to compare the two.
"""
from __future__ import annotations

import os
from importlib import import_module
from types import ModuleType

_CHOICES = ("c", "py")


def load(name: str) -> ModuleType:
    """Import one implementation by short name ("c" or "py")."""
    if name == "py":
        return import_module("cohortq.kernels._bitpack_py")
    if name == "c":
        return import_module("cohortq.kernels._bitpack_c")
    raise ValueError(f"unknown kernel implementation {name!r}")


def available() -> tuple[str, ...]:
    names = []
    for name in _CHOICES:
        try:
            load(name)
        except ImportError:
            continue
        names.append(name)
    return tuple(names)


def _default() -> ModuleType:
    forced = os.environ.get("COHORTQ_KERNELS")
    if forced:
        return load(forced)
    try:
        return load("c")
    except ImportError:
        return load("py")


_impl = _default()


def implementation_name() -> str:
    return _impl.IMPL_NAME


def set_implementation(name: str) -> None:
    """Swap the active implementation. Packed words are plain arrays, so
    arrays built under one implementation decode fine under the other."""
    global _impl
    _impl = load(name)


def pack(values, bit_width):
    return _impl.pack(values, bit_width)


def unpack_at(words, bit_width, i):
    return _impl.unpack_at(words, bit_width, i)


def unpack_range(words, bit_width, start, count):
    return _impl.unpack_range(words, bit_width, start, count)


def find_first(words, bit_width, start, stop, target):
    return _impl.find_first(words, bit_width, start, stop, target)
