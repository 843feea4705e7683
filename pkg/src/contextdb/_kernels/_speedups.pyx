# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernels for the finite-map inner loops.

Must stay behaviorally identical to ``pure.py``; the test suite runs both
backends against each other.
"""

BACKEND = "cython"


def compose_maps(dict inner, dict outer):
    cdef dict out = {}
    for k, v in inner.items():
        if v in outer:
            out[k] = outer[v]
    return out


def compose_chain(dict base, list outers):
    cdef dict out = {}
    cdef dict m
    cdef bint ok
    for k, v in base.items():
        ok = True
        for m in outers:
            if v in m:
                v = m[v]
            else:
                ok = False
                break
        if ok:
            out[k] = v
    return out


def pair_rows(list keys, list maps, list widths, list perm):
    cdef dict out = {}
    cdef Py_ssize_t i, n = len(maps)
    cdef dict m
    cdef bint ok
    for k in keys:
        comps = []
        ok = True
        for i in range(n):
            m = <dict> maps[i]
            if k not in m:
                ok = False
                break
            v = m[k]
            if <object> widths[i] == 1:
                comps.append(v)
            else:
                comps.extend(v)
        if ok:
            out[k] = tuple([comps[p] for p in perm])
    return out


def group_reduce(list sorted_keys, dict grouping, dict measuring, str op):
    cdef dict acc = {}
    cdef dict sums, counts, seen
    if op == "sum":
        for k in sorted_keys:
            if k in grouping and k in measuring:
                g = grouping[k]
                m = measuring[k]
                if g in acc:
                    acc[g] = acc[g] + m
                else:
                    acc[g] = m
        return acc
    if op == "count":
        for k in sorted_keys:
            if k in grouping and k in measuring:
                g = grouping[k]
                acc[g] = acc.get(g, 0) + 1
        return acc
    if op == "min":
        for k in sorted_keys:
            if k in grouping and k in measuring:
                g = grouping[k]
                m = measuring[k]
                if g not in acc or m < acc[g]:
                    acc[g] = m
        return acc
    if op == "max":
        for k in sorted_keys:
            if k in grouping and k in measuring:
                g = grouping[k]
                m = measuring[k]
                if g not in acc or m > acc[g]:
                    acc[g] = m
        return acc
    if op == "countd":
        seen = {}
        for k in sorted_keys:
            if k in grouping and k in measuring:
                g = grouping[k]
                if g in seen:
                    seen[g].add(measuring[k])
                else:
                    seen[g] = {measuring[k]}
        return {g: len(s) for g, s in seen.items()}
    if op == "avg":
        sums = {}
        counts = {}
        for k in sorted_keys:
            if k in grouping and k in measuring:
                g = grouping[k]
                m = measuring[k]
                if g in sums:
                    sums[g] = sums[g] + m
                    counts[g] = counts[g] + 1
                else:
                    sums[g] = m
                    counts[g] = 1
        return {g: sums[g] / counts[g] for g in sums}
    raise ValueError(f"unknown aggregate opcode {op!r}")


def preimage_keys(dict fn_map, set targets):
    cdef set out = set()
    for k, v in fn_map.items():
        if v in targets:
            out.add(k)
    return out
