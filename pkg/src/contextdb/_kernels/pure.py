"""Pure Python kernels for the finite-map inner loops.

Mirrors ``_speedups.pyx`` exactly: same signatures, same semantics, same
iteration order. Keys absent from a later map are dropped (that is the
restriction semantics; validated instances never lose keys otherwise).
"""

from __future__ import annotations

BACKEND = "pure"


def compose_maps(inner: dict, outer: dict) -> dict:
    out = {}
    for k, v in inner.items():
        if v in outer:
            out[k] = outer[v]
    return out


def compose_chain(base: dict, outers: list) -> dict:
    out = {}
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


def pair_rows(keys: list, maps: list, widths: list, perm: list) -> dict:
    """Pair member maps over ``keys``; component order follows ``perm``.

    ``widths[i]`` is the component count contributed by ``maps[i]`` (1 for a
    scalar-valued member). ``perm`` reorders the concatenated components into
    canonical factor order.
    """
    out = {}
    n = len(maps)
    for k in keys:
        comps = []
        ok = True
        for i in range(n):
            m = maps[i]
            if k not in m:
                ok = False
                break
            v = m[k]
            if widths[i] == 1:
                comps.append(v)
            else:
                comps.extend(v)
        if ok:
            out[k] = tuple(comps[p] for p in perm)
    return out


def group_reduce(sorted_keys: list, grouping: dict, measuring: dict, op: str) -> dict:
    """Aggregate measure values per group, folding in sorted-key order."""
    if op == "sum":
        acc = {}
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
        acc = {}
        for k in sorted_keys:
            if k in grouping and k in measuring:
                g = grouping[k]
                acc[g] = acc.get(g, 0) + 1
        return acc
    if op == "min":
        acc = {}
        for k in sorted_keys:
            if k in grouping and k in measuring:
                g = grouping[k]
                m = measuring[k]
                if g not in acc or m < acc[g]:
                    acc[g] = m
        return acc
    if op == "max":
        acc = {}
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
                seen.setdefault(grouping[k], set()).add(measuring[k])
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
                    counts[g] += 1
                else:
                    sums[g] = m
                    counts[g] = 1
        return {g: sums[g] / counts[g] for g in sums}
    raise ValueError(f"unknown aggregate opcode {op!r}")


def preimage_keys(fn_map: dict, targets: set) -> set:
    return {k for k, v in fn_map.items() if v in targets}
