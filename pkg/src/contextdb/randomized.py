"""Randomized small instances and schemas for sampling-based equivalence checks."""

from __future__ import annotations

import itertools
from random import Random

from .context import Context, Edge, NodeRef
from .database import DatabaseInstance, FiniteFunction


def _random_extent(name: str, base: str, rng: Random, max_size: int) -> set:
    size = rng.randint(1, max_size)
    if base == "integer":
        return set(rng.sample(range(100), size))
    if base == "float":
        out = set()
        while len(out) < size:
            out.add(round(rng.uniform(-50, 50), 3))
        return out
    if base == "date":
        days = rng.sample(range(1, 28), min(size, 27))
        return {f"2024-01-{d:02d}" for d in days}
    return {f"{name}_{i}" for i in range(size)}


def random_database(ctx: Context, rng: Random, max_size: int = 8) -> DatabaseInstance:
    """Random extents (sizes 1..max_size) and random total edge functions."""
    node_values = {}
    for node in sorted(ctx.nodes, key=lambda n: n.name):
        for f in node.factors:
            simple = NodeRef((f,))
            if simple not in node_values:
                base = ctx.attributes[f].base
                node_values[simple] = _random_extent(f, base, rng, max_size)

    def pick(node: NodeRef):
        if node.is_product:
            return tuple(rng.choice(sorted(node_values[NodeRef((f,))])) for f in node.factors)
        return rng.choice(sorted(node_values[node]))

    edge_functions = {}
    for e in sorted(ctx.edges, key=lambda e: e.key):
        if e.source.is_product:
            domain = itertools.product(
                *[sorted(node_values[NodeRef((f,))]) for f in e.source.factors]
            )
        else:
            domain = sorted(node_values[e.source])
        edge_functions[e] = FiniteFunction(
            e.source, e.target, {k: pick(e.target) for k in domain}
        )
    return DatabaseInstance(ctx, node_values, edge_functions)


def chain_context(depth: int, measure_base: str = "integer") -> Context:
    """Root K with a grouping chain K -> X1 -> ... -> Xdepth and a measure K -> M."""
    attrs = [("K", "text"), ("M", measure_base)]
    edges = [Edge(NodeRef(("K",)), "m", NodeRef(("M",)))]
    prev = "K"
    for i in range(1, depth + 1):
        name = f"X{i}"
        attrs.append((name, "text"))
        edges.append(Edge(NodeRef((prev,)), f"g{i}", NodeRef((name,))))
        prev = name
    return Context(attrs, edges=edges)


def random_chain_setup(rng: Random, max_depth: int = 4, max_size: int = 8):
    """A random chain schema plus a random instance over it."""
    depth = rng.randint(1, max_depth)
    base = rng.choice(["integer", "integer", "float"])
    ctx = chain_context(depth, base)
    return ctx, random_database(ctx, rng, max_size), depth
