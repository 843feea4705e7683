"""Expression evaluation over an instance, and restriction pushing.

Evaluation produces total finite functions on the (possibly restricted)
carrier of the expression's source. Composition applies outer expressions
pointwise, so identity, terminal and projection edges over product nodes are
never materialized unless an expression with a product source is evaluated
standalone.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import _kernels as kernels
from .context import EdgeKind, NodeRef
from .database import DatabaseInstance, FiniteFunction, projection_selector
from .errors import EvalError, PredicateTypeError
from .expr import (
    CarrierAnd,
    CarrierPreimage,
    Compose,
    EdgeRef,
    Expression,
    Identity,
    Literal,
    Pair,
    Predicate,
    ProductExpr,
    Projection,
    Restrict,
    Terminal,
    ValueSet,
    compose_chain,
    source,
    target,
    to_text,
    tuple_layout,
)
from .values import UNIT, sort_key

_MISSING = object()


@dataclass(frozen=True)
class EvaluatedFunction:
    """The value of an expression: a finite function plus its provenance."""

    expression: Expression
    fn: FiniteFunction
    restricted: bool = False

    @property
    def map(self) -> dict:
        return self.fn.map

    @property
    def domain_node(self) -> NodeRef:
        return self.fn.domain_node

    @property
    def target_node(self) -> NodeRef:
        return self.fn.target_node

    def sorted_keys(self) -> list:
        return self.fn.sorted_keys()

    def __call__(self, x):
        return self.fn.map[x]

    def __len__(self):
        return len(self.fn.map)


def _compare(a, op: str, b) -> bool:
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    numeric = (int, float)
    same_kind = (
        (isinstance(a, numeric) and isinstance(b, numeric))
        or (isinstance(a, str) and isinstance(b, str))
        or (isinstance(a, tuple) and isinstance(b, tuple))
    )
    if not same_kind:
        raise PredicateTypeError(f"cannot order-compare {a!r} with {b!r}")
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise PredicateTypeError(f"unknown comparison operator {op!r}")


def carrier_of_spec(spec, node: NodeRef, db: DatabaseInstance) -> set:
    """Concrete carrier subset of a node extent selected by a restriction."""
    if isinstance(spec, ValueSet):
        return {x for x in db.extent_iter(node) if x in spec.values}
    if isinstance(spec, Predicate):
        carrier = set(db.extent_iter(node))
        for cmp in spec.comparisons:
            lhs = eval_expression(cmp.lhs, db)
            if isinstance(cmp.rhs, Literal):
                carrier = {
                    x for x in carrier if x in lhs.map and _compare(lhs.map[x], cmp.op, cmp.rhs.value)
                }
            else:
                rhs = eval_expression(cmp.rhs, db)
                carrier = {
                    x
                    for x in carrier
                    if x in lhs.map and x in rhs.map and _compare(lhs.map[x], cmp.op, rhs.map[x])
                }
        return carrier
    if isinstance(spec, CarrierAnd):
        carrier = None
        for s in spec.specs:
            c = carrier_of_spec(s, node, db)
            carrier = c if carrier is None else carrier & c
        return carrier if carrier is not None else set(db.extent_iter(node))
    if isinstance(spec, CarrierPreimage):
        through = eval_expression(spec.through, db)
        inner = carrier_of_spec(spec.spec, target(spec.through), db)
        return {k for k, v in through.map.items() if v in inner}
    raise EvalError(f"unknown restriction spec {spec!r}")


def _applier(expr: Expression, db: DatabaseInstance):
    """Pointwise form of an expression: value -> value or _MISSING."""
    if isinstance(expr, EdgeRef):
        if expr.edge.kind is EdgeKind.PLAIN:
            m = db.edge_functions[expr.edge].map
            return lambda v: m.get(v, _MISSING)
        if expr.edge.kind is EdgeKind.IDENTITY:
            return lambda v: v
        if expr.edge.kind is EdgeKind.TERMINAL:
            return lambda v: UNIT
        return projection_selector(expr.edge.source, expr.edge.target)
    if isinstance(expr, Identity):
        return lambda v: v
    if isinstance(expr, Terminal):
        return lambda v: UNIT
    if isinstance(expr, Projection):
        return projection_selector(expr.product_node, expr.sub_product)
    if isinstance(expr, Compose):
        inner = _applier(expr.inner, db)
        outer = _applier(expr.outer, db)

        def apply_compose(v):
            w = inner(v)
            if w is _MISSING:
                return _MISSING
            return outer(w)

        return apply_compose
    if isinstance(expr, Pair):
        members = [_applier(m, db) for m in expr.members]
        _, widths, perm = tuple_layout([target(m) for m in expr.members])

        def apply_pair(v):
            comps = []
            for i, fn in enumerate(members):
                w = fn(v)
                if w is _MISSING:
                    return _MISSING
                if widths[i] == 1:
                    comps.append(w)
                else:
                    comps.extend(w)
            return tuple(comps[p] for p in perm)

        return apply_pair
    if isinstance(expr, ProductExpr):
        members = [_applier(m, db) for m in expr.members]
        src_parts = [source(m) for m in expr.members]
        _, src_widths, src_perm = tuple_layout(src_parts)
        _, tgt_widths, tgt_perm = tuple_layout([target(m) for m in expr.members])
        inv = [0] * len(src_perm)
        for canon, concat in enumerate(src_perm):
            inv[concat] = canon
        offsets = list(itertools.accumulate([0] + src_widths[:-1]))

        def apply_product(v):
            comps = []
            for i, fn in enumerate(members):
                w = src_widths[i]
                if w == 1:
                    arg = v[inv[offsets[i]]]
                else:
                    arg = tuple(v[inv[offsets[i] + j]] for j in range(w))
                out = fn(arg)
                if out is _MISSING:
                    return _MISSING
                if tgt_widths[i] == 1:
                    comps.append(out)
                else:
                    comps.extend(out)
            return tuple(comps[p] for p in tgt_perm)

        return apply_product
    if isinstance(expr, Restrict):
        carrier = carrier_of_spec(expr.spec, source(expr.base), db)
        base = _applier(expr.base, db)

        def apply_restrict(v):
            if v not in carrier:
                return _MISSING
            return base(v)

        return apply_restrict
    raise EvalError(f"not an expression: {expr!r}")


def eval_expression(expr: Expression, db: DatabaseInstance) -> EvaluatedFunction:
    """Value of an expression in the instance (an empty carrier is legal)."""
    src = source(expr)
    tgt = target(expr)

    if isinstance(expr, EdgeRef):
        fn = db.edge_function(expr.edge)
        return EvaluatedFunction(expr, fn)
    if isinstance(expr, Identity):
        fn = db.edge_function(db.context.identity_edge(expr.node))
        return EvaluatedFunction(expr, fn)
    if isinstance(expr, Terminal):
        fn = db.edge_function(db.context.terminal_edge(expr.node))
        return EvaluatedFunction(expr, fn)
    if isinstance(expr, Projection):
        sel = projection_selector(expr.product_node, expr.sub_product)
        fn = FiniteFunction(
            src, tgt, {x: sel(x) for x in db.extent_iter(expr.product_node)}
        )
        return EvaluatedFunction(expr, fn)

    if isinstance(expr, Compose):
        chain = compose_chain(expr)
        base = eval_expression(chain[-1], db)
        rest = chain[:-1]  # outermost first; applied innermost first
        plain = all(
            isinstance(c, EdgeRef) and c.edge.kind is EdgeKind.PLAIN for c in rest
        )
        if plain:
            maps = [db.edge_functions[c.edge].map for c in reversed(rest)]
            out = kernels.compose_chain(base.map, maps)
        else:
            appliers = [_applier(c, db) for c in reversed(rest)]
            out = {}
            for k, v in base.map.items():
                for fn in appliers:
                    v = fn(v)
                    if v is _MISSING:
                        break
                else:
                    out[k] = v
        restricted = base.restricted or len(out) != len(base.map) or _has_restrict(expr)
        return EvaluatedFunction(expr, FiniteFunction(src, tgt, out), restricted)

    if isinstance(expr, Pair):
        members = [eval_expression(m, db) for m in expr.members]
        _, widths, perm = tuple_layout([m.target_node for m in members])
        keys = set(members[0].map)
        for m in members[1:]:
            keys &= set(m.map)
        out = kernels.pair_rows(
            sorted(keys, key=sort_key), [m.map for m in members], widths, perm
        )
        restricted = any(m.restricted for m in members)
        return EvaluatedFunction(expr, FiniteFunction(src, tgt, out), restricted)

    if isinstance(expr, ProductExpr):
        members = [eval_expression(m, db) for m in expr.members]
        _, src_widths, src_perm = tuple_layout([m.domain_node for m in members])
        _, tgt_widths, tgt_perm = tuple_layout([m.target_node for m in members])
        out = {}
        for combo in itertools.product(*[m.sorted_keys() for m in members]):
            in_comps: list = []
            out_comps: list = []
            for i, k in enumerate(combo):
                if src_widths[i] == 1:
                    in_comps.append(k)
                else:
                    in_comps.extend(k)
                v = members[i].map[k]
                if tgt_widths[i] == 1:
                    out_comps.append(v)
                else:
                    out_comps.extend(v)
            key = tuple(in_comps[p] for p in src_perm)
            out[key] = tuple(out_comps[p] for p in tgt_perm)
        restricted = any(m.restricted for m in members)
        return EvaluatedFunction(expr, FiniteFunction(src, tgt, out), restricted)

    if isinstance(expr, Restrict):
        base = eval_expression(expr.base, db)
        carrier = carrier_of_spec(expr.spec, src, db)
        out = {k: v for k, v in base.map.items() if k in carrier}
        return EvaluatedFunction(expr, FiniteFunction(src, tgt, out), True)

    raise EvalError(f"not an expression: {expr!r}")


def _has_restrict(expr: Expression) -> bool:
    if isinstance(expr, Restrict):
        return True
    if isinstance(expr, Compose):
        return _has_restrict(expr.outer) or _has_restrict(expr.inner)
    if isinstance(expr, (Pair, ProductExpr)):
        return any(_has_restrict(m) for m in expr.members)
    return False


# -- restriction pushing -----------------------------------------------------------


def _push(expr: Expression):
    """Return (core, specs) with every restriction lifted to the source."""
    if isinstance(expr, (EdgeRef, Identity, Terminal, Projection)):
        return expr, []
    if isinstance(expr, Restrict):
        core, specs = _push(expr.base)
        return core, specs + [expr.spec]
    if isinstance(expr, Compose):
        outer_core, outer_specs = _push(expr.outer)
        inner_core, inner_specs = _push(expr.inner)
        specs = inner_specs + [CarrierPreimage(inner_core, s) for s in outer_specs]
        return Compose(outer_core, inner_core), specs
    if isinstance(expr, Pair):
        cores, specs = [], []
        for m in expr.members:
            c, s = _push(m)
            cores.append(c)
            specs.extend(s)
        return Pair(tuple(cores)), specs
    if isinstance(expr, ProductExpr):
        # Restrictions stay at each factor's own source; they cannot merge
        # across the product boundary.
        members = tuple(push_restrictions(m) for m in expr.members)
        return ProductExpr(members), []
    raise EvalError(f"not an expression: {expr!r}")


def push_restrictions(expr: Expression) -> Expression:
    """Equivalent expression with restrictions only at pairing-branch sources."""
    core, specs = _push(expr)
    if not specs:
        return core
    if len(specs) == 1:
        return Restrict(core, specs[0])
    return Restrict(core, CarrierAnd(tuple(specs)))


# -- implied function signatures ------------------------------------------------------


def implied_closure_step(db: DatabaseInstance, known: set) -> set:
    """One application of the reflexivity, transitivity and augmentation rules.

    Signatures are (source, target) node pairs; the rules range over nodes
    present in the schema, which keeps each step finite.
    """
    ctx = db.context
    out = set(known)
    nodes = sorted(ctx.nodes, key=lambda n: n.name)
    for x in nodes:
        out.add((x, x))
        if x.is_product:
            factors = x.factors
            for size in range(1, len(factors)):
                for combo in itertools.combinations(range(len(factors)), size):
                    sub = NodeRef(tuple(factors[i] for i in combo))
                    out.add((x, sub))
    for (x, y) in known:
        for (y2, z) in known:
            if y == y2:
                out.add((x, z))
    for (x, y) in known:
        for z in nodes:
            zf = set(z.factors)
            if zf & set(x.factors) or zf & set(y.factors):
                continue
            out.add((NodeRef.product([x, z]), NodeRef.product([y, z])))
    return out


def extensionally_equal(e1, e2, tol: float = 0.0) -> bool:
    """Pointwise equality of two evaluated functions."""
    m1, m2 = e1.map, e2.map
    if set(m1) != set(m2):
        return False
    if tol == 0.0:
        return all(m1[k] == m2[k] for k in m1)
    for k in m1:
        a, b = m1[k], m2[k]
        if isinstance(a, float) or isinstance(b, float):
            if abs(a - b) > tol:
                return False
        elif a != b:
            return False
    return True


def disagreement_keys(e1, e2, limit: int = 10) -> list:
    """Keys of the common carrier where the two functions differ."""
    m1, m2 = e1.map, e2.map
    out = []
    for k in sorted(set(m1) & set(m2), key=sort_key):
        if m1[k] != m2[k]:
            out.append(k)
            if len(out) >= limit:
                break
    return out


def function_text(ev: EvaluatedFunction) -> str:
    return to_text(ev.expression)
