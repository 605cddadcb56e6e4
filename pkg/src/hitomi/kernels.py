"""Backend dispatch for the hot kernels.

Two interchangeable implementations exist: numba-compiled loops
(``_kernels_numba``) and pure numpy (``_kernels_numpy``).  Selection, in
priority order:

1. an explicit ``set_backend()`` / ``use_backend()`` call,
2. the HITOMI_NUMBA environment variable (0/false forces numpy,
   1/true forces numba),
3. auto: numba when importable, numpy otherwise.

Both backends return identical values; the benchmark in
``benchmarks/backend_bench.py`` compares their speed.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

from . import _kernels_numpy as _numpy_impl

BACKENDS = ("auto", "numpy", "numba")

_forced: str | None = None
_numba_impl = None
_numba_failed = False


def _load_numba():
    global _numba_impl, _numba_failed
    if _numba_impl is None and not _numba_failed:
        try:
            from . import _kernels_numba as impl

            _numba_impl = impl
        except ImportError:
            _numba_failed = True
    return _numba_impl


def _env_choice() -> str:
    raw = os.environ.get("HITOMI_NUMBA", "").strip().lower()
    if raw in ("0", "false", "off", "no"):
        return "numpy"
    if raw in ("1", "true", "on", "yes"):
        return "numba"
    return "auto"


def numba_available() -> bool:
    return _load_numba() is not None


def current_backend() -> str:
    """Resolve the backend that the next kernel call will use."""
    choice = _forced if _forced is not None else _env_choice()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not numba_available():
            raise RuntimeError("numba backend requested but numba is not importable")
        return "numba"
    return "numba" if numba_available() else "numpy"


def set_backend(name: str) -> None:
    """Force a backend ('numpy' or 'numba'), or 'auto' to clear the override."""
    global _forced
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}, expected one of {BACKENDS}")
    _forced = None if name == "auto" else name


@contextmanager
def use_backend(name: str):
    global _forced
    prev = _forced
    set_backend(name)
    try:
        yield
    finally:
        _forced = prev


def _impl():
    return _numba_impl if current_backend() == "numba" else _numpy_impl


def forward_logits(x, w1, b1, w2, b2, w3, b3):
    return _impl().forward_logits(x, w1, b1, w2, b2, w3, b3)


def argmax_category(logits, is_clothing):
    return _impl().argmax_category(logits, is_clothing)


def dilate(mask, k):
    return _impl().dilate(mask, k)


def erode(mask, k):
    return _impl().erode(mask, k)


def label_components(mask, connectivity):
    return _impl().label_components(mask, connectivity)
