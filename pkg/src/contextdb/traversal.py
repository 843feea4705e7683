"""Traversal queries: answers, tree detection, induced relations, closure.

A traversal query pairs expressions over a common key. Its answer induces a
relation whose key is the query key and whose columns carry the defining
expressions as attribute semantics; parallel expressions are either aliased
or checked for equality and collapsed.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

from .algebra import EvaluatedFunction, eval_expression
from .context import NodeRef
from .database import DatabaseInstance, FiniteFunction
from .errors import EqualityViolation, KeyMismatch, QueryTypeError
from .expr import (
    Compose,
    EdgeRef,
    Expression,
    Identity,
    Pair,
    ProductExpr,
    Projection,
    Restrict,
    TraversalQueryAst,
    ValueSet,
    source,
    target,
    to_text,
    tuple_layout,
)
from .values import sort_key, value_to_json


@dataclass(frozen=True)
class TraversalAnswer:
    query: TraversalQueryAst
    function: EvaluatedFunction

    @property
    def map(self) -> dict:
        return self.function.map


@dataclass(frozen=True)
class RelationColumn:
    display: str
    attribute: str
    expression: Expression

    @property
    def expression_text(self) -> str:
        return to_text(self.expression)


@dataclass(frozen=True)
class RelationSchema:
    name: str
    key_attribute: str
    columns: tuple[RelationColumn, ...]


@dataclass(frozen=True)
class Relation:
    schema: RelationSchema
    rows: tuple[tuple, ...]


def answer(q: TraversalQueryAst, db: DatabaseInstance) -> TraversalAnswer:
    """Pairing of the evaluated expressions over the common key."""
    fn = eval_expression(q.as_expression(), db)
    return TraversalAnswer(q, fn)


def split_expression(e: Expression) -> list[Expression]:
    """Equivalent list of expressions each targeting a simple (or terminal) node."""
    t = target(e)
    if not t.is_product:
        return [e]
    if isinstance(e, Pair):
        return [part for m in e.members for part in split_expression(m)]
    if isinstance(e, Restrict):
        return [Restrict(part, e.spec) for part in split_expression(e.base)]
    if isinstance(e, Compose):
        outs = split_expression(e.outer)
        if len(outs) == 1 and outs[0] is e.outer:
            return [Compose(Projection(t, NodeRef((f,))), e) for f in _unique(t.factors)]
        return [part for o in outs for part in split_expression(Compose(o, e.inner))]
    if isinstance(e, ProductExpr):
        src = source(e)
        parts = []
        for m in e.members:
            m_src = source(m)
            parts.extend(split_expression(Compose(m, Projection(src, m_src))))
        return parts
    # Opaque product-valued operand (edge into a product node, identity or
    # projection): post-compose with per-factor projections.
    return [Compose(Projection(t, NodeRef((f,))), e) for f in _unique(t.factors)]


def _unique(factors):
    seen = []
    for f in factors:
        if f not in seen:
            seen.append(f)
    return seen


def split_product_targets(q: TraversalQueryAst) -> TraversalQueryAst:
    exprs: list[Expression] = []
    names: list = []
    for i, e in enumerate(q.expressions):
        parts = split_expression(e)
        exprs.extend(parts)
        names.extend([q.name_for(i)] * len(parts))
    if tuple(exprs) == q.expressions:
        return q
    return TraversalQueryAst(q.key, tuple(exprs), tuple(names))


def is_tree(q: TraversalQueryAst) -> bool:
    """No parallel expressions and only simple-node targets (after splitting)."""
    q = split_product_targets(q)
    targets = [target(e) for e in q.expressions]
    if any(t.is_product for t in targets):
        return False
    return len(set(targets)) == len(targets)


def parallel_pairs(q: TraversalQueryAst):
    q = split_product_targets(q)
    by_target: dict[NodeRef, list[int]] = {}
    for i, e in enumerate(q.expressions):
        by_target.setdefault(target(e), []).append(i)
    return [(t, idxs) for t, idxs in by_target.items() if len(idxs) > 1]


def induced_relation(
    q: TraversalQueryAst,
    db: DatabaseInstance,
    mode: str = "alias",
    name: str = "R_Q",
    aliases: dict | None = None,
) -> Relation:
    """Tabular form of the answer with key, one column per expression.

    mode "alias": parallel expressions keep separate, prefixed columns.
    mode "require_equalities": parallel expressions must agree extensionally;
    they collapse into one column, otherwise EqualityViolation is raised with
    up to 10 witness keys.
    """
    if mode not in ("alias", "require_equalities"):
        raise ValueError(f"unknown mode {mode!r}")
    q = split_product_targets(q)
    evals = [eval_expression(e, db) for e in q.expressions]
    keys = set(evals[0].map) if evals else set()
    for ev in evals[1:]:
        keys &= set(ev.map)
    keys = sorted(keys, key=sort_key)

    by_target: dict[NodeRef, list[int]] = {}
    for i, e in enumerate(q.expressions):
        by_target.setdefault(target(e), []).append(i)

    kept: list[int] = list(range(len(q.expressions)))
    if mode == "require_equalities":
        kept = []
        for i, e in enumerate(q.expressions):
            group = by_target[target(e)]
            if group[0] != i:
                first = evals[group[0]]
                mine = evals[i]
                witnesses = [k for k in keys if first.map[k] != mine.map[k]]
                if witnesses:
                    raise EqualityViolation(
                        to_text(q.expressions[group[0]]), to_text(e), witnesses[:10]
                    )
            else:
                kept.append(i)

    columns = []
    used_names = set()
    for i in kept:
        e = q.expressions[i]
        t = target(e)
        attr = t.name
        display = attr
        if mode == "alias" and len(by_target[t]) > 1:
            prefix = q.name_for(i) or to_text(e)
            display = f"{prefix}.{attr}"
        if aliases and i in aliases:
            display = aliases[i]
        if display in used_names:
            display = f"{to_text(e)}.{attr}"
        used_names.add(display)
        columns.append(RelationColumn(display, attr, e))

    rows = tuple((k,) + tuple(evals[i].map[k] for i in kept) for k in keys)
    schema = RelationSchema(name, q.key.name, tuple(columns))
    relation = Relation(schema, rows)
    _check_key_fds(relation)
    return relation


def _check_key_fds(relation: Relation) -> None:
    keys = [r[0] for r in relation.rows]
    if len(keys) != len(set(keys)):
        raise EqualityViolation("key", "key", [k for k in keys if keys.count(k) > 1])


# -- query closure -------------------------------------------------------------------


def compose_queries(outer: TraversalQueryAst, inner: TraversalQueryAst) -> TraversalQueryAst:
    """Composition of queries; the inner query's key is the result key."""
    inner_expr = inner.as_expression()
    outer_expr = outer.as_expression()
    if target(inner_expr) != source(outer_expr):
        raise QueryTypeError(
            f"cannot compose queries: inner target {target(inner_expr).name} differs "
            f"from outer key {source(outer_expr).name}"
        )
    return TraversalQueryAst(inner.key, (Compose(outer_expr, inner_expr),))


def pair_queries(queries, names=None) -> TraversalQueryAst:
    """Pairing of queries with a common key; shared expressions stay duplicated."""
    keys = {q.key for q in queries}
    if len(keys) != 1:
        raise KeyMismatch(sorted(k.name for k in keys))
    exprs: list[Expression] = []
    expr_names: list = []
    for j, q in enumerate(queries):
        qname = names[j] if names else None
        for i, e in enumerate(q.expressions):
            exprs.append(e)
            expr_names.append(qname or q.name_for(i))
    return TraversalQueryAst(next(iter(keys)), tuple(exprs), tuple(expr_names))


def restrict_query(q: TraversalQueryAst, spec) -> TraversalQueryAst:
    """Restrict the key carrier; a set of values is also accepted directly."""
    if isinstance(spec, (set, frozenset)):
        spec = ValueSet(frozenset(spec))
    return TraversalQueryAst(
        q.key, tuple(Restrict(e, spec) for e in q.expressions), q.expr_names
    )


# -- exports --------------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, tuple):
        return json.dumps(value_to_json(value), ensure_ascii=False)
    j = value_to_json(value)
    return j if isinstance(j, str) else repr(j)


def relation_to_csv(relation: Relation) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow([relation.schema.key_attribute] + [c.display for c in relation.schema.columns])
    for row in relation.rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def relation_to_json_table(relation: Relation) -> dict:
    return {
        "schema": {
            "name": relation.schema.name,
            "key": relation.schema.key_attribute,
            "columns": [
                {"name": c.display, "attribute": c.attribute, "expression": c.expression_text}
                for c in relation.schema.columns
            ],
        },
        "rows": [[value_to_json(v) for v in row] for row in relation.rows],
    }
