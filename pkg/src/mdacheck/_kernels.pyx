# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled interval kernels; same contract as ``_kernels_py``."""


def normalize(intervals, long gap):
    cdef list out = []
    cdef long lo, hi, cur_lo = 0, cur_hi = 0
    cdef bint started = False
    for lo, hi in sorted(intervals):
        if lo > hi:
            raise ValueError(f"malformed interval [{lo},{hi}]")
        if started and lo <= cur_hi + gap:
            if hi > cur_hi:
                cur_hi = hi
        else:
            if started:
                out.append((cur_lo, cur_hi))
            cur_lo = lo
            cur_hi = hi
            started = True
    if started:
        out.append((cur_lo, cur_hi))
    return tuple(out)


def union(tuple a, tuple b, long gap):
    if not a:
        return b
    if not b:
        return a
    cdef Py_ssize_t i = 0, j = 0
    cdef Py_ssize_t na = len(a), nb = len(b)
    cdef long lo, hi, cur_lo = 0, cur_hi = 0
    cdef bint started = False
    cdef list out = []
    cdef tuple item
    while i < na or j < nb:
        if j >= nb or (i < na and <long>a[i][0] <= <long>b[j][0]):
            item = a[i]
            i += 1
        else:
            item = b[j]
            j += 1
        lo = item[0]
        hi = item[1]
        if started and lo <= cur_hi + gap:
            if hi > cur_hi:
                cur_hi = hi
        else:
            if started:
                out.append((cur_lo, cur_hi))
            cur_lo = lo
            cur_hi = hi
            started = True
    out.append((cur_lo, cur_hi))
    return tuple(out)


def insert(tuple a, long lo, long hi, long gap):
    if lo > hi:
        raise ValueError(f"malformed interval [{lo},{hi}]")
    return union(a, ((lo, hi),), gap)


def union_many(sets, long gap):
    cdef tuple acc = ()
    for s in sets:
        acc = union(acc, s, gap)
    return acc
