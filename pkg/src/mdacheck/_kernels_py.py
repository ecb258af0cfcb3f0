"""Pure-Python interval kernels.

Intervals are ``(lo, hi)`` tuples of naturals; a normalized set is a tuple of
such pairs sorted by ``lo`` with no two members closer than ``gap`` allows.
``gap=1`` joins touching intervals ([1,3] and [4,6]), ``gap=0`` joins only
intervals that share a point.
"""


def normalize(intervals, gap):
    out = []
    for lo, hi in sorted(intervals):
        if lo > hi:
            raise ValueError(f"malformed interval [{lo},{hi}]")
        if out and lo <= out[-1][1] + gap:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return tuple(out)


def union(a, b, gap):
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    na, nb = len(a), len(b)
    while i < na or j < nb:
        if j >= nb or (i < na and a[i][0] <= b[j][0]):
            lo, hi = a[i]
            i += 1
        else:
            lo, hi = b[j]
            j += 1
        if out and lo <= out[-1][1] + gap:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return tuple(out)


def insert(a, lo, hi, gap):
    if lo > hi:
        raise ValueError(f"malformed interval [{lo},{hi}]")
    return union(a, ((lo, hi),), gap)


def union_many(sets, gap):
    acc = ()
    for s in sets:
        acc = union(acc, s, gap)
    return acc
