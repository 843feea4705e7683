"""Views: schemas whose edges are defined by queries over a base schema.

A view edge may be defined by a traversal query (unfoldable, macro-like) or
by an analytic query (its answer is a function, usable in further
composition). Views are read-only; materialization stores the evaluated edge
functions together with the snapshot id they were computed from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import _kernels as kernels
from .algebra import eval_expression
from .context import Context
from .database import DatabaseInstance, FiniteFunction
from .errors import EvalError, QueryTypeError, UnknownEdge
from .expr import (
    Compose,
    EdgeRef,
    Expression,
    Identity,
    Pair,
    Restrict,
    Terminal,
    ValueSet,
    source,
    target,
    to_text,
    tuple_layout,
)
from .values import sort_key


@dataclass
class Materialized:
    snapshot: str
    functions: dict  # view edge label -> dict


@dataclass
class View:
    shape: Context
    base: object  # Context or another View
    definitions: dict  # view edge label -> query text over the base
    materialized: Materialized | None = None

    def __post_init__(self):
        self._typecheck_definitions()

    @property
    def base_shape(self) -> Context:
        return self.base.shape if isinstance(self.base, View) else self.base

    def _typecheck_definitions(self) -> None:
        from .parser import parse_analytic, parse_expression

        own_labels = {e.label for e in self.shape.edges}
        for label, text in self.definitions.items():
            edges = self.shape.edges_by_label(label)
            if not edges:
                raise UnknownEdge(label)
            edge = edges[0]
            if _is_analytic(text):
                q = parse_analytic(text, self.base_shape)
                g_target = target(q.grouping.as_expression())
                if edge.source != g_target:
                    raise QueryTypeError(
                        f"view edge {label} starts at {edge.source.name} but its "
                        f"analytic definition groups into {g_target.name}"
                    )
            else:
                try:
                    expr = parse_expression(text, self.base_shape)
                except UnknownEdge as exc:
                    if exc.label in own_labels:
                        raise QueryTypeError(
                            f"view definition {label} references the view's own edge "
                            f"{exc.label}; definitions must be queries over the base"
                        ) from None
                    raise
                if source(expr) != edge.source or target(expr) != edge.target:
                    raise QueryTypeError(
                        f"view edge {label}: definition {text!r} has signature "
                        f"{source(expr).name} -> {target(expr).name}, edge wants "
                        f"{edge.source.name} -> {edge.target.name}"
                    )

    def analytic_labels(self) -> set[str]:
        return {l for l, t in self.definitions.items() if _is_analytic(t)}

    # -- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        return {"shape": self.shape.to_json(), "definitions": dict(sorted(self.definitions.items()))}

    @staticmethod
    def from_json(doc: dict, base) -> "View":
        return View(Context.from_json(doc["shape"]), base, doc["definitions"])

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @staticmethod
    def load(path, base) -> "View":
        return View.from_json(json.loads(Path(path).read_text(encoding="utf-8")), base)


def _is_analytic(text: str) -> bool:
    return text.lstrip().startswith("analytic(")


def _edge_labels(expr: Expression):
    from .expr import walk

    for _, sub in walk(expr):
        if isinstance(sub, EdgeRef):
            yield sub.edge.label


def unfold(view_query: Expression, view: View) -> Expression:
    """Replace every view-edge reference by its defining expression.

    Unfolds transitively through views over views, down to the base schema.
    Analytic-valued edges have no base-expression form and raise.
    """
    from .parser import parse_expression

    def subst(e: Expression) -> Expression:
        if isinstance(e, EdgeRef):
            text = view.definitions.get(e.edge.label)
            if text is None:
                return e  # a base edge passed through the view
            if _is_analytic(text):
                raise EvalError(
                    f"view edge {e.edge.label} is analytic-valued and cannot unfold "
                    "into a base expression"
                )
            return parse_expression(text, view.base_shape)
        if isinstance(e, Compose):
            return Compose(subst(e.outer), subst(e.inner))
        if isinstance(e, Pair):
            return Pair(tuple(subst(m) for m in e.members))
        if isinstance(e, Restrict):
            return Restrict(subst(e.base), e.spec)
        return e

    out = subst(view_query)
    if isinstance(view.base, View):
        return unfold(out, view.base)
    return out


def _base_db(view: View, db: DatabaseInstance) -> DatabaseInstance:
    return db


def edge_value(view: View, label: str, db: DatabaseInstance) -> dict:
    """Value of one view edge, from storage when fresh, else computed."""
    if view.materialized and view.materialized.snapshot == db.snapshot_id():
        stored = view.materialized.functions.get(label)
        if stored is not None:
            return stored
    return _compute_edge(view, label, db)


def _compute_edge(view: View, label: str, db: DatabaseInstance) -> dict:
    from .analytic import evaluate_analytic
    from .parser import parse_analytic, parse_expression

    text = view.definitions[label]
    if _is_analytic(text):
        q = parse_analytic(text, view.base_shape)
        return dict(evaluate_analytic(q, db).map)
    expr = parse_expression(text, view.base_shape)
    if isinstance(view.base, View):
        expr = unfold(expr, view.base)
    return dict(eval_expression(expr, db).map)


def materialize(view: View, db: DatabaseInstance) -> View:
    """Evaluate and store every definition with the instance's snapshot id."""
    functions = {
        label: _compute_edge(view, label, db) for label in sorted(view.definitions)
    }
    return View(view.shape, view.base, view.definitions, Materialized(db.snapshot_id(), functions))


def is_stale(view: View, db: DatabaseInstance) -> bool:
    if view.materialized is None:
        return True
    return view.materialized.snapshot != db.snapshot_id()


def answer_over_view(view: View, expr: Expression, db: DatabaseInstance) -> dict:
    """Evaluate an expression over the view.

    Pure traversal definitions are unfolded and evaluated over the base.
    When analytic-valued edges are involved, the expression is evaluated as
    map algebra over the edge values (composition, pairing and value-set
    restriction; predicates would need base extents and are rejected).
    """
    labels = set(_edge_labels(expr))
    if not (labels & view.analytic_labels()):
        return dict(eval_expression(unfold(expr, view), db).map)

    def go(e: Expression) -> dict:
        if isinstance(e, EdgeRef):
            if e.edge.label in view.definitions:
                return edge_value(view, e.edge.label, db)
            return dict(db.edge_function(e.edge).map)
        if isinstance(e, Compose):
            inner = go(e.inner)
            outer = go(e.outer)
            return kernels.compose_maps(inner, outer)
        if isinstance(e, Pair):
            members = [go(m) for m in e.members]
            _, widths, perm = tuple_layout([target(m) for m in e.members])
            keys = set(members[0])
            for m in members[1:]:
                keys &= set(m)
            return kernels.pair_rows(sorted(keys, key=sort_key), members, widths, perm)
        if isinstance(e, Restrict):
            if not isinstance(e.spec, ValueSet):
                raise EvalError("only value-set restrictions apply over analytic view edges")
            base = go(e.base)
            return {k: v for k, v in base.items() if k in e.spec.values}
        if isinstance(e, Identity):
            raise EvalError("identity over a view node needs a base extent; unfold instead")
        raise EvalError(f"expression {to_text(e)} is not evaluable over the view")

    return go(expr)
