"""Proposal enumeration for the interactive analysis flow.

Given clicked target nodes, candidate keys are the nodes reaching every
target through plain or projection edges; each (key, target) pair lists all
simple composition paths, shortest first.
"""

from __future__ import annotations

from dataclasses import dataclass

from .context import Context, Edge, EdgeKind, NodeRef
from .errors import NoCandidateKey, UnknownNode
from .expr import EdgeRef, Expression, Projection, chain_to_compose, to_text


@dataclass(frozen=True)
class Proposal:
    key: NodeRef
    expressions: dict  # target NodeRef -> tuple[Expression, ...]
    depth: int  # total shortest-path length to the targets (smaller = closer)


def _edge_to_expr(e: Edge, ctx: Context) -> Expression:
    if e.kind is EdgeKind.PROJECTION:
        return Projection(e.source, e.target)
    qualified = len(ctx.edges_by_label(e.label)) > 1
    return EdgeRef(e, qualified=qualified)


def _neighbors(ctx: Context, node: NodeRef) -> list[Edge]:
    out = [e for e in ctx.edges_from(node) if not e.target.is_terminal]
    out.extend(ctx.projections_from(node))
    return sorted(out, key=lambda e: e.key)


def _paths(ctx: Context, start: NodeRef, goal: NodeRef, max_len: int):
    """All simple directed paths start -> goal of length 1..max_len (DFS)."""
    results: list[list[Edge]] = []
    path: list[Edge] = []
    visited = {start}

    def dfs(node: NodeRef):
        if len(path) >= max_len:
            return
        for e in _neighbors(ctx, node):
            if e.target in visited:
                continue
            path.append(e)
            if e.target == goal:
                results.append(list(path))
            visited.add(e.target)
            dfs(e.target)
            visited.discard(e.target)
            path.pop()

    dfs(start)
    return results


def _path_expression(path: list[Edge], ctx: Context) -> Expression:
    exprs = [_edge_to_expr(e, ctx) for e in path]
    return chain_to_compose(list(reversed(exprs)))


def enumerate_proposals(
    ctx: Context,
    targets,
    max_len: int = 8,
    max_per_pair: int = 32,
) -> list[Proposal]:
    """Candidate keys with their expression sets, closest to the targets first."""
    targets = list(targets)
    if not targets:
        raise NoCandidateKey("no targets given")
    for t in targets:
        if not ctx.has_node(t):
            raise UnknownNode(t.name)

    proposals = []
    for key in sorted(ctx.nodes, key=lambda n: n.name):
        per_target = {}
        depth = 0
        for t in targets:
            paths = _paths(ctx, key, t, max_len)
            if not paths:
                per_target = None
                break
            paths.sort(key=lambda p: (len(p), to_text(_path_expression(p, ctx))))
            exprs = tuple(_path_expression(p, ctx) for p in paths[:max_per_pair])
            per_target[t] = exprs
            depth += len(paths[0])
        if per_target is not None:
            proposals.append(Proposal(key, per_target, depth))

    if not proposals:
        raise NoCandidateKey(
            "no node reaches all of: " + ", ".join(t.name for t in targets)
        )
    proposals.sort(key=lambda p: (p.depth, p.key.name))
    return proposals
