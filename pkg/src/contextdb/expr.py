"""Expression ASTs over a schema, with inferred source and target nodes.

Operations are restriction, composition, pairing and product; operands are
edges (including the synthesized identity, terminal and projection edges).
``g o f`` applies ``f`` first. Pair values are stored in canonical
(sorted-attribute) order; the query text order is kept separately for display.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .context import Context, Edge, EdgeKind, NodeRef, TERMINAL
from .errors import KeyMismatch, PredicateTypeError, QueryTypeError
from .values import sort_key

COMPARE_OPS = ("=", "!=", "<", "<=", ">", ">=")
ORDERED_BASES = {"integer", "float", "date", "text"}


# -- restriction specifications ------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: object

    def __str__(self):
        v = self.value
        if isinstance(v, str):
            return '"' + v.replace('"', '\\"') + '"'
        return repr(v)


@dataclass(frozen=True)
class ValueSet:
    """Explicit carrier subset."""

    values: frozenset

    def __str__(self):
        return "{" + ", ".join(str(Literal(v)) for v in sorted(self.values, key=sort_key)) + "}"


@dataclass(frozen=True)
class Comparison:
    lhs: "Expression"
    op: str
    rhs: Union["Expression", Literal]

    def __str__(self):
        return f"{to_text(self.lhs)} {self.op} {self.rhs if isinstance(self.rhs, Literal) else to_text(self.rhs)}"


@dataclass(frozen=True)
class Predicate:
    """Conjunction of comparisons over expressions sharing the restricted node."""

    comparisons: tuple[Comparison, ...]

    def __str__(self):
        return "[" + " && ".join(str(c) for c in self.comparisons) + "]"


@dataclass(frozen=True)
class CarrierAnd:
    """Intersection of carriers (produced by restriction pushing)."""

    specs: tuple

    def __str__(self):
        return "(" + " ∩ ".join(str(s) for s in self.specs) + ")"


@dataclass(frozen=True)
class CarrierPreimage:
    """Keys whose image under ``through`` satisfies ``spec`` (pushed form)."""

    through: "Expression"
    spec: object

    def __str__(self):
        return f"{to_text(self.through)}^-1{self.spec}"


RestrictionSpec = Union[ValueSet, Predicate, CarrierAnd, CarrierPreimage]


# -- expression variants ---------------------------------------------------------


@dataclass(frozen=True)
class EdgeRef:
    edge: Edge
    qualified: bool = False


@dataclass(frozen=True)
class Identity:
    node: NodeRef


@dataclass(frozen=True)
class Terminal:
    node: NodeRef


@dataclass(frozen=True)
class Projection:
    product_node: NodeRef
    sub_product: NodeRef


@dataclass(frozen=True)
class Compose:
    outer: "Expression"
    inner: "Expression"


@dataclass(frozen=True)
class Pair:
    members: tuple["Expression", ...]


@dataclass(frozen=True)
class ProductExpr:
    members: tuple["Expression", ...]


@dataclass(frozen=True)
class Restrict:
    base: "Expression"
    spec: RestrictionSpec


Expression = Union[EdgeRef, Identity, Terminal, Projection, Compose, Pair, ProductExpr, Restrict]


# -- layouts ----------------------------------------------------------------------


def tuple_layout(parts: list[NodeRef]):
    """Canonical layout of a product of nodes.

    Returns ``(node, widths, perm)``: the flattened sorted product node, the
    component count each part contributes, and the permutation taking the
    concatenated components to canonical order (stable, so repeated attribute
    names keep their textual order).
    """
    names: list[str] = []
    widths: list[int] = []
    for p in parts:
        names.extend(p.factors)
        widths.append(len(p.factors))
    perm = sorted(range(len(names)), key=lambda i: (names[i], i))
    node = NodeRef(tuple(names))
    return node, widths, perm


# -- source/target inference -------------------------------------------------------


def source(expr: Expression) -> NodeRef:
    if isinstance(expr, EdgeRef):
        return expr.edge.source
    if isinstance(expr, (Identity, Terminal)):
        return expr.node
    if isinstance(expr, Projection):
        return expr.product_node
    if isinstance(expr, Compose):
        return source(expr.inner)
    if isinstance(expr, Pair):
        srcs = {source(m) for m in expr.members}
        if len(srcs) != 1:
            raise KeyMismatch(sorted(s.name for s in srcs))
        return next(iter(srcs))
    if isinstance(expr, ProductExpr):
        return tuple_layout([source(m) for m in expr.members])[0]
    if isinstance(expr, Restrict):
        return source(expr.base)
    raise TypeError(f"not an expression: {expr!r}")


def target(expr: Expression) -> NodeRef:
    if isinstance(expr, EdgeRef):
        return expr.edge.target
    if isinstance(expr, Identity):
        return expr.node
    if isinstance(expr, Terminal):
        return TERMINAL
    if isinstance(expr, Projection):
        return expr.sub_product
    if isinstance(expr, Compose):
        return target(expr.outer)
    if isinstance(expr, Pair):
        return tuple_layout([target(m) for m in expr.members])[0]
    if isinstance(expr, ProductExpr):
        return tuple_layout([target(m) for m in expr.members])[0]
    if isinstance(expr, Restrict):
        return target(expr.base)
    raise TypeError(f"not an expression: {expr!r}")


def typecheck(expr: Expression, ctx: Context) -> tuple[NodeRef, NodeRef]:
    """Recursive well-typedness check; returns (source, target) or raises.

    Kept independent of the parser's inference so the two can be used as
    oracles for each other.
    """
    if isinstance(expr, EdgeRef):
        e = expr.edge
        if e.kind is EdgeKind.PLAIN and e not in ctx.edges:
            raise QueryTypeError(f"edge {e.key} is not part of the schema")
        if e.kind is EdgeKind.PROJECTION and not e.source.sub_product(e.target):
            raise QueryTypeError(f"invalid projection {e.key}")
        return e.source, e.target
    if isinstance(expr, Identity):
        if not ctx.usable_node(expr.node):
            raise QueryTypeError(f"unknown node {expr.node.name}")
        return expr.node, expr.node
    if isinstance(expr, Terminal):
        if not ctx.usable_node(expr.node):
            raise QueryTypeError(f"unknown node {expr.node.name}")
        return expr.node, TERMINAL
    if isinstance(expr, Projection):
        if not expr.product_node.sub_product(expr.sub_product):
            raise QueryTypeError(
                f"{expr.sub_product.name} is not a proper sub-product of {expr.product_node.name}"
            )
        return expr.product_node, expr.sub_product
    if isinstance(expr, Compose):
        s_in, t_in = typecheck(expr.inner, ctx)
        s_out, t_out = typecheck(expr.outer, ctx)
        if t_in != s_out:
            raise QueryTypeError(
                f"cannot compose: inner target {t_in.name} differs from outer source {s_out.name}"
            )
        return s_in, t_out
    if isinstance(expr, Pair):
        if len(expr.members) < 2:
            raise QueryTypeError("pairing needs at least two expressions")
        pairs = [typecheck(m, ctx) for m in expr.members]
        srcs = {s for s, _ in pairs}
        if len(srcs) != 1:
            raise KeyMismatch(sorted(s.name for s in srcs))
        return next(iter(srcs)), tuple_layout([t for _, t in pairs])[0]
    if isinstance(expr, ProductExpr):
        if len(expr.members) < 2:
            raise QueryTypeError("product needs at least two expressions")
        pairs = [typecheck(m, ctx) for m in expr.members]
        return (
            tuple_layout([s for s, _ in pairs])[0],
            tuple_layout([t for _, t in pairs])[0],
        )
    if isinstance(expr, Restrict):
        s, t = typecheck(expr.base, ctx)
        _check_spec(expr.spec, s, ctx)
        return s, t
    raise QueryTypeError(f"not an expression: {expr!r}")


def _check_spec(spec, restricted: NodeRef, ctx: Context) -> None:
    if isinstance(spec, ValueSet):
        return
    if isinstance(spec, Predicate):
        for cmp in spec.comparisons:
            s_l, t_l = typecheck(cmp.lhs, ctx)
            if s_l != restricted:
                raise PredicateTypeError(
                    f"predicate operand {to_text(cmp.lhs)} has source {s_l.name}, "
                    f"expected the restricted node {restricted.name}"
                )
            if isinstance(cmp.rhs, Literal):
                t_r = None
            else:
                s_r, t_r = typecheck(cmp.rhs, ctx)
                if s_r != restricted:
                    raise PredicateTypeError(
                        f"predicate operand {to_text(cmp.rhs)} has source {s_r.name}, "
                        f"expected the restricted node {restricted.name}"
                    )
            if cmp.op not in COMPARE_OPS:
                raise PredicateTypeError(f"unknown comparison operator {cmp.op!r}")
            if cmp.op in ("<", "<=", ">", ">="):
                if t_l.is_simple and ctx.attributes[t_l.factors[0]].base not in ORDERED_BASES:
                    raise PredicateTypeError(
                        f"order comparison on unordered domain of {t_l.name}"
                    )
        return
    if isinstance(spec, CarrierAnd):
        for s in spec.specs:
            _check_spec(s, restricted, ctx)
        return
    if isinstance(spec, CarrierPreimage):
        s, t = typecheck(spec.through, ctx)
        if s != restricted:
            raise PredicateTypeError(
                f"preimage through {to_text(spec.through)} starts at {s.name}, "
                f"expected {restricted.name}"
            )
        _check_spec(spec.spec, t, ctx)
        return
    raise PredicateTypeError(f"unknown restriction spec {spec!r}")


# -- traversal / analytic query ASTs ----------------------------------------------


@dataclass(frozen=True)
class TraversalQueryAst:
    """Pairing of expressions with a common source, the key."""

    key: NodeRef
    expressions: tuple[Expression, ...]
    expr_names: tuple = ()  # optional per-expression provenance for aliasing

    def as_expression(self) -> Expression:
        if len(self.expressions) == 1:
            return self.expressions[0]
        return Pair(self.expressions)

    def name_for(self, i: int):
        if i < len(self.expr_names):
            return self.expr_names[i]
        return None


@dataclass(frozen=True)
class AnalyticQueryAst:
    """Grouping query, measuring query and aggregate operation."""

    grouping: TraversalQueryAst
    measuring: TraversalQueryAst
    op: str
    answer_restriction: object = None


# -- pretty printing -----------------------------------------------------------------

_PAIR, _PROD, _COMP, _ATOM = 0, 1, 2, 3


def _level(expr: Expression) -> int:
    if isinstance(expr, Pair):
        return _PAIR
    if isinstance(expr, ProductExpr):
        return _PROD
    if isinstance(expr, Compose):
        return _COMP
    return _ATOM


def to_text(expr: Expression, level: int = _PAIR) -> str:
    """Render to the concrete query syntax; reparsing yields the same AST."""
    if isinstance(expr, EdgeRef):
        text = expr.edge.key if expr.qualified else expr.edge.label
        if expr.edge.kind is not EdgeKind.PLAIN and not expr.qualified:
            text = expr.edge.label  # synthesized labels already carry their node names
        out = text
    elif isinstance(expr, Identity):
        out = f"id({expr.node.name})"
    elif isinstance(expr, Terminal):
        out = f"tau({expr.node.name})"
    elif isinstance(expr, Projection):
        out = f"pi[{expr.product_node.name}]({expr.sub_product.name})"
    elif isinstance(expr, Compose):
        chain = compose_chain(expr)
        out = " o ".join(to_text(c, _ATOM) for c in chain)
    elif isinstance(expr, Pair):
        out = " & ".join(to_text(m, _PROD) for m in expr.members)
    elif isinstance(expr, ProductExpr):
        out = " * ".join(to_text(m, _COMP) for m in expr.members)
    elif isinstance(expr, Restrict):
        out = to_text(expr.base, _ATOM) + "/" + str(expr.spec)
        return out if level <= _ATOM else f"({out})"
    else:
        raise TypeError(f"not an expression: {expr!r}")
    if _level(expr) < level:
        return f"({out})"
    return out


def canonical_text(expr: Expression) -> str:
    """Fully parenthesized normal form (cache keys, trace output)."""
    if isinstance(expr, Compose):
        return f"({canonical_text(expr.outer)} o {canonical_text(expr.inner)})"
    if isinstance(expr, Pair):
        return "(" + " & ".join(canonical_text(m) for m in expr.members) + ")"
    if isinstance(expr, ProductExpr):
        return "(" + " * ".join(canonical_text(m) for m in expr.members) + ")"
    if isinstance(expr, Restrict):
        return f"({canonical_text(expr.base)}/{expr.spec})"
    return to_text(expr, _ATOM)


def compose_chain(expr: Expression) -> list[Expression]:
    """Flatten a composition left spine: outermost function first."""
    if isinstance(expr, Compose):
        return compose_chain(expr.outer) + [expr.inner]
    return [expr]


def chain_to_compose(chain: list[Expression]) -> Expression:
    """Inverse of compose_chain (left-associated rebuild)."""
    expr = chain[0]
    for nxt in chain[1:]:
        expr = Compose(expr, nxt)
    return expr


# -- traversal helpers ----------------------------------------------------------------


def children(expr: Expression) -> tuple[Expression, ...]:
    if isinstance(expr, Compose):
        return (expr.outer, expr.inner)
    if isinstance(expr, (Pair, ProductExpr)):
        return expr.members
    if isinstance(expr, Restrict):
        return (expr.base,)
    return ()


def replace_child(expr: Expression, index: int, child: Expression) -> Expression:
    if isinstance(expr, Compose):
        return Compose(child if index == 0 else expr.outer, child if index == 1 else expr.inner)
    if isinstance(expr, Pair):
        members = list(expr.members)
        members[index] = child
        return Pair(tuple(members))
    if isinstance(expr, ProductExpr):
        members = list(expr.members)
        members[index] = child
        return ProductExpr(tuple(members))
    if isinstance(expr, Restrict):
        if index != 0:
            raise IndexError(index)
        return Restrict(child, expr.spec)
    raise IndexError(f"{expr!r} has no children")


def at_path(expr: Expression, path: tuple[int, ...]) -> Expression:
    for i in path:
        expr = children(expr)[i]
    return expr


def replace_at_path(expr: Expression, path: tuple[int, ...], new: Expression) -> Expression:
    if not path:
        return new
    head, rest = path[0], path[1:]
    return replace_child(expr, head, replace_at_path(children(expr)[head], rest, new))


def walk(expr: Expression, path: tuple[int, ...] = ()):
    """Yield (path, subexpression) pairs, preorder."""
    yield path, expr
    for i, c in enumerate(children(expr)):
        yield from walk(c, path + (i,))


def subexpressions(expr: Expression):
    for _, sub in walk(expr):
        yield sub
