"""Text positions as sets of closed natural intervals.

A position is a set of word indices. It is stored as a sorted tuple of
``(lo, hi)`` pairs; intervals that intersect are joined, and by default
intervals that merely touch are joined too, so that equal word sets have
exactly one stored form. The merge kernels come from a compiled extension
when it is importable and from ``_kernels_py`` otherwise.
"""

from __future__ import annotations

from typing import Iterable

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_kernels = _compiled or _kernels_py
BACKEND = "compiled" if _compiled is not None else "python"


def set_backend(name: str) -> None:
    """Switch the kernel implementation (``"python"`` or ``"compiled"``)."""
    global _kernels, BACKEND
    if name == "python":
        _kernels = _kernels_py
    elif name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled interval kernels are not available")
        _kernels = _compiled
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name


def compiled_available() -> bool:
    return _compiled is not None


def _gap(merge_adjacent: bool) -> int:
    return 1 if merge_adjacent else 0


class IntervalSet(tuple):
    """Immutable normalized interval set; compares and hashes as its tuple."""

    __slots__ = ()

    def __new__(cls, intervals: Iterable[tuple[int, int]] = (), merge_adjacent: bool = True):
        items = [(int(lo), int(hi)) for lo, hi in intervals]
        for lo, hi in items:
            if lo < 0:
                raise ValueError(f"interval bound {lo} is not a natural number")
        return tuple.__new__(cls, _kernels.normalize(items, _gap(merge_adjacent)))

    @classmethod
    def _wrap(cls, t: tuple) -> "IntervalSet":
        if type(t) is cls:
            return t
        return tuple.__new__(cls, t)

    @classmethod
    def point(cls, word: int) -> "IntervalSet":
        return cls(((word, word),))

    def points(self) -> set[int]:
        return {w for lo, hi in self for w in range(lo, hi + 1)}

    @property
    def max_word(self) -> int:
        return self[-1][1] if self else 0

    def __or__(self, other):
        return interval_union(self, other)

    def __repr__(self) -> str:
        return "{" + ",".join(f"[{lo},{hi}]" for lo, hi in self) + "}"

    def to_text(self) -> str:
        return ",".join(f"{lo}-{hi}" if lo != hi else str(lo) for lo, hi in self)

    @classmethod
    def from_text(cls, text: str, merge_adjacent: bool = True) -> "IntervalSet":
        text = text.strip()
        if not text:
            return EMPTY
        items = []
        for part in text.split(","):
            lo, _, hi = part.strip().partition("-")
            items.append((int(lo), int(hi or lo)))
        return cls(items, merge_adjacent)


EMPTY = tuple.__new__(IntervalSet, ())


def interval_insert(s: IntervalSet, iv: tuple[int, int], merge_adjacent: bool = True) -> IntervalSet:
    lo, hi = iv
    if lo < 0:
        raise ValueError(f"interval bound {lo} is not a natural number")
    return IntervalSet._wrap(_kernels.insert(tuple(s), lo, hi, _gap(merge_adjacent)))


def interval_union(a: IntervalSet, b: IntervalSet, merge_adjacent: bool = True) -> IntervalSet:
    return IntervalSet._wrap(_kernels.union(tuple(a), tuple(b), _gap(merge_adjacent)))


def union_all(sets: Iterable[IntervalSet], merge_adjacent: bool = True) -> IntervalSet:
    return IntervalSet._wrap(_kernels.union_many([tuple(s) for s in sets], _gap(merge_adjacent)))
