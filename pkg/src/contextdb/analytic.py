"""Analytic queries: grouping, measuring, aggregation, and their rewritings.

An analytic query is a triple of a grouping query, a measuring query and an
aggregate operation; its answer maps each occurring group to the aggregate of
the measures over the group's preimage. Associative aggregates admit nested
evaluation along composed or paired groupings; avg and countd do not and the
engine refuses to rewrite them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import _kernels as kernels
from .algebra import _compare, eval_expression
from .context import Context, NodeRef, TERMINAL
from .database import DatabaseInstance
from .errors import (
    DivisionByZero,
    DomainMismatch,
    NotAssociative,
    NotTreeQuery,
    OpNotApplicable,
    PredicateTypeError,
)
from .expr import (
    AnalyticQueryAst,
    Compose,
    Expression,
    Pair,
    TraversalQueryAst,
    ValueSet,
    compose_chain,
    source,
    target,
    to_text,
    tuple_layout,
)
from .traversal import is_tree, parallel_pairs, split_product_targets
from .values import sort_key, value_to_json


@dataclass(frozen=True)
class AggregateOp:
    """An aggregate over finite multisets of values."""

    name: str
    bases: frozenset | None  # applicable input base domains; None = any
    associative: bool

    def applicable_to(self, base: str | None) -> bool:
        if self.bases is None:
            return True
        return base is not None and base in self.bases


AGGREGATES: dict[str, AggregateOp] = {
    "sum": AggregateOp("sum", frozenset({"integer", "float"}), True),
    "min": AggregateOp("min", frozenset({"integer", "float", "date"}), True),
    "max": AggregateOp("max", frozenset({"integer", "float", "date"}), True),
    "count": AggregateOp("count", None, True),
    "countd": AggregateOp("countd", None, False),
    "avg": AggregateOp("avg", frozenset({"integer", "float"}), False),
}


def aggregate_multiset(op: str, values: list):
    """Reference aggregation over an explicit multiset (used as oracle)."""
    if op == "sum":
        total = values[0]
        for v in values[1:]:
            total = total + v
        return total
    if op == "count":
        return len(values)
    if op == "countd":
        return len(set(values))
    if op == "min":
        return min(values)
    if op == "max":
        return max(values)
    if op == "avg":
        total = values[0]
        for v in values[1:]:
            total = total + v
        return total / len(values)
    raise OpNotApplicable(op, "?")


def _base_of(node: NodeRef, ctx: Context) -> str | None:
    if node.is_terminal:
        return "unit"
    if node.is_simple:
        return ctx.attributes[node.factors[0]].base
    return None  # product targets carry tuples


def applicable_aggregates(node: NodeRef, ctx: Context) -> list[str]:
    base = _base_of(node, ctx)
    return [name for name, op in AGGREGATES.items() if op.applicable_to(base)]


def make_analytic(
    g: TraversalQueryAst,
    m: TraversalQueryAst,
    op: str,
    ctx: Context,
    answer_restriction=None,
) -> AnalyticQueryAst:
    if op not in AGGREGATES:
        raise OpNotApplicable(op, "unknown aggregate")
    if g.key != m.key:
        from .errors import KeyMismatch

        raise KeyMismatch([g.key.name, m.key.name])
    tgt = target(m.as_expression())
    if not AGGREGATES[op].applicable_to(_base_of(tgt, ctx)):
        raise OpNotApplicable(op, tgt.name)
    return AnalyticQueryAst(g, m, op, answer_restriction)


@dataclass(frozen=True)
class AnalyticAnswer:
    """Function from occurring groups to aggregate values."""

    map: dict
    key_node: NodeRef
    value_name: str
    query: AnalyticQueryAst | None = None

    def sorted_items(self):
        return sorted(self.map.items(), key=lambda kv: sort_key(kv[0]))


def _as_tree(q: TraversalQueryAst, db: DatabaseInstance, role: str) -> TraversalQueryAst:
    """Collapse a traversal query to a tree, requiring its equalities to hold."""
    q = split_product_targets(q)
    if is_tree(q):
        return q
    pairs = parallel_pairs(q)
    kept: list[int] = []
    drop: set[int] = set()
    for _, idxs in pairs:
        first = eval_expression(q.expressions[idxs[0]], db)
        for j in idxs[1:]:
            other = eval_expression(q.expressions[j], db)
            common = set(first.map) & set(other.map)
            if any(first.map[k] != other.map[k] for k in common):
                raise NotTreeQuery(
                    f"{role} query is not a tree: parallel expressions "
                    f"{to_text(q.expressions[idxs[0]])} and {to_text(q.expressions[j])} disagree",
                    (to_text(q.expressions[idxs[0]]), to_text(q.expressions[j])),
                )
            drop.add(j)
    exprs = tuple(e for i, e in enumerate(q.expressions) if i not in drop)
    return TraversalQueryAst(q.key, exprs, q.expr_names)


def result_name(q: AnalyticQueryAst) -> str:
    tgt = target(q.measuring.as_expression())
    return f"{q.op}({tgt.name})"


def evaluate_analytic(
    q: AnalyticQueryAst, db: DatabaseInstance, name: str | None = None
) -> AnalyticAnswer:
    """Three-step evaluation: group, measure, aggregate per group."""
    g = _as_tree(q.grouping, db, "grouping")
    m = _as_tree(q.measuring, db, "measuring")
    tgt = target(m.as_expression())
    if not AGGREGATES[q.op].applicable_to(_base_of(tgt, db.context)):
        raise OpNotApplicable(q.op, tgt.name)
    g_fn = eval_expression(g.as_expression(), db)
    m_fn = eval_expression(m.as_expression(), db)
    keys = sorted(set(g_fn.map) & set(m_fn.map), key=sort_key)
    out = kernels.group_reduce(keys, g_fn.map, m_fn.map, q.op)
    ans = AnalyticAnswer(out, g_fn.target_node, name or result_name(q), q)
    if q.answer_restriction is not None:
        ans = restrict_answer(ans, q.answer_restriction)
    return ans


# -- nested evaluation plans ------------------------------------------------------------


@dataclass(frozen=True)
class NestedPlan:
    """Composition-rule plan: aggregate the measure up a chain of groupings.

    ``levels`` hold the grouping chain innermost first; the base of the
    recursion is the identity grouping, whose answer is the measure itself.
    """

    levels: tuple[Expression, ...]
    measuring: TraversalQueryAst
    op: str

    def describe(self) -> str:
        inner = f"(id({source(self.measuring.as_expression()).name}), {to_text(self.measuring.as_expression())}, {self.op})"
        for level in self.levels:
            inner = f"({to_text(level)}, {inner}, {self.op})"
        return inner


def rewrite_composition(q: AnalyticQueryAst) -> NestedPlan:
    """Unfold a composed grouping into a nested plan (associative ops only)."""
    if not AGGREGATES[q.op].associative:
        raise NotAssociative(q.op)
    g_expr = q.grouping.as_expression()
    if isinstance(g_expr, Pair):
        raise NotTreeQuery("composition rule needs a single grouping expression", None)
    chain = compose_chain(g_expr)  # outermost first
    return NestedPlan(tuple(reversed(chain)), q.measuring, q.op)


@dataclass(frozen=True)
class PairingPlan:
    """Pairing-rule plan: one component's totals from the paired totals."""

    component: int
    paired: AnalyticQueryAst
    op: str
    component_position: int  # canonical tuple slot of the component's target


def rewrite_pairing(target_component: int, q_paired: AnalyticQueryAst) -> PairingPlan:
    if not AGGREGATES[q_paired.op].associative:
        raise NotAssociative(q_paired.op)
    members = q_paired.grouping.expressions
    if len(members) == 1 and isinstance(members[0], Pair):
        members = members[0].members
    if target_component < 0 or target_component >= len(members):
        raise IndexError(target_component)
    if len(members) == 1:
        position = -1  # degenerate: the paired grouping is already the component
    else:
        targets = [target(m) for m in members]
        _, widths, perm = tuple_layout(targets)
        offset = sum(widths[:target_component])
        position = perm.index(offset)
    return PairingPlan(target_component, q_paired, q_paired.op, position)


def evaluate_plan(plan, db: DatabaseInstance) -> AnalyticAnswer:
    if isinstance(plan, NestedPlan):
        ans = eval_expression(plan.measuring.as_expression(), db)
        current = dict(ans.map)
        key_node = ans.domain_node
        for level in plan.levels:
            level_fn = eval_expression(level, db)
            keys = sorted(set(current) & set(level_fn.map), key=sort_key)
            current = kernels.group_reduce(keys, level_fn.map, current, plan.op)
            key_node = level_fn.target_node
        tgt = target(plan.measuring.as_expression())
        return AnalyticAnswer(current, key_node, f"{plan.op}({tgt.name})")
    if isinstance(plan, PairingPlan):
        return evaluate_pairing_plan(plan, db)
    raise TypeError(f"not a plan: {plan!r}")


def evaluate_pairing_plan(plan: PairingPlan, db: DatabaseInstance) -> AnalyticAnswer:
    inner = evaluate_analytic(plan.paired, db)
    if plan.component_position < 0:
        proj = {t: t for t in inner.map}
    else:
        proj = {t: t[plan.component_position] for t in inner.map}
    keys = sorted(inner.map, key=sort_key)
    out = kernels.group_reduce(keys, proj, inner.map, plan.op)
    members = plan.paired.grouping.expressions
    if len(members) == 1 and isinstance(members[0], Pair):
        members = members[0].members
    tgt = target(members[plan.component]) if len(members) > 1 else target(members[0])
    m_tgt = target(plan.paired.measuring.as_expression())
    return AnalyticAnswer(out, tgt, f"{plan.op}({m_tgt.name})")


# -- answer restriction -------------------------------------------------------------------


@dataclass(frozen=True)
class AnswerRestriction:
    """Restriction of an analytic answer.

    kind "key-in": keep listed groups. kind "value-cmp": compare each answer
    value against a literal and keep satisfying groups. kind "value-vs-agg":
    compare each answer value against an aggregate of all answer values.
    """

    kind: str
    op: str = "="
    literal: object = None
    values: frozenset = frozenset()
    agg: str = ""


_ANSWER_RESTR_RE = re.compile(
    r"^\s*value\s*(?P<op><=|>=|!=|<|>|=)\s*(?P<rhs>.+?)\s*$"
)


def parse_answer_restriction(text: str) -> AnswerRestriction:
    """Forms: ``value <= 1000``, ``value > avg``, ``key in {"a", "b"}``."""
    text = text.strip()
    m = re.match(r"^key\s+in\s*\{(?P<body>.*)\}\s*$", text)
    if m:
        values = []
        for part in m.group("body").split(","):
            part = part.strip()
            if not part:
                continue
            values.append(_parse_literal(part))
        return AnswerRestriction("key-in", values=frozenset(values))
    m = _ANSWER_RESTR_RE.match(text)
    if m:
        rhs = m.group("rhs").strip()
        if rhs in ("avg", "min", "max", "sum"):
            return AnswerRestriction("value-vs-agg", op=m.group("op"), agg=rhs)
        return AnswerRestriction("value-cmp", op=m.group("op"), literal=_parse_literal(rhs))
    raise PredicateTypeError(f"cannot parse answer restriction {text!r}")


def _parse_literal(text: str):
    if re.match(r"^-?\d+$", text):
        return int(text)
    if re.match(r"^-?\d+\.\d+$", text):
        return float(text)
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def restrict_answer(ans: AnalyticAnswer, spec) -> AnalyticAnswer:
    """Keep the groups selected by the spec; value predicates are pushed to keys."""
    if isinstance(spec, str):
        spec = parse_answer_restriction(spec)
    if isinstance(spec, ValueSet):
        spec = AnswerRestriction("key-in", values=spec.values)
    if not isinstance(spec, AnswerRestriction):
        raise PredicateTypeError(f"unsupported answer restriction {spec!r}")
    if spec.kind == "key-in":
        kept = {k: v for k, v in ans.map.items() if k in spec.values}
    elif spec.kind == "value-cmp":
        kept = {k: v for k, v in ans.map.items() if _compare(v, spec.op, spec.literal)}
    elif spec.kind == "value-vs-agg":
        if not ans.map:
            kept = {}
        else:
            ref = aggregate_multiset(spec.agg, [v for _, v in ans.sorted_items()])
            kept = {k: v for k, v in ans.map.items() if _compare(v, spec.op, ref)}
    else:
        raise PredicateTypeError(f"unknown answer restriction kind {spec.kind!r}")
    return AnalyticAnswer(kept, ans.key_node, ans.value_name, ans.query)


# -- answer arithmetic ----------------------------------------------------------------------


def combine_answers(a1: AnalyticAnswer, a2, op: str) -> AnalyticAnswer:
    """Pointwise arithmetic; dividing by a unit-keyed total yields shares."""
    if op not in ("divide", "subtract", "add", "multiply"):
        raise DomainMismatch(f"unknown combine operation {op!r}")

    if isinstance(a2, AnalyticAnswer):
        if set(a2.map) == {None} or a2.key_node == TERMINAL:
            unit_value = next(iter(a2.map.values()))
            lookup = lambda k: unit_value
            rhs_name = a2.value_name
        else:
            missing = [k for k in a1.map if k not in a2.map]
            if missing:
                raise DomainMismatch(
                    f"combine needs the right answer to cover the left domain; "
                    f"missing {sorted(missing, key=sort_key)[:5]}"
                )
            lookup = a2.map.__getitem__
            rhs_name = a2.value_name
    else:
        lookup = lambda k: a2
        rhs_name = repr(a2)

    sym = {"divide": "/", "subtract": "-", "add": "+", "multiply": "*"}[op]
    out = {}
    for k, v in a1.map.items():
        w = lookup(k)
        if op == "divide":
            if w == 0:
                raise DivisionByZero(k)
            out[k] = v / w
        elif op == "subtract":
            out[k] = v - w
        elif op == "add":
            out[k] = v + w
        else:
            out[k] = v * w
    return AnalyticAnswer(out, a1.key_node, f"({a1.value_name} {sym} {rhs_name})")


# -- exports -----------------------------------------------------------------------------------


def analytic_to_csv(ans: AnalyticAnswer, key_name: str | None = None) -> str:
    import csv as _csv
    import io

    buf = io.StringIO()
    writer = _csv.writer(buf, lineterminator="\r\n")
    writer.writerow([key_name or ans.key_node.name, ans.value_name])
    for k, v in ans.sorted_items():
        kj = value_to_json(k)
        writer.writerow([kj if isinstance(kj, str) else repr(kj), repr(value_to_json(v))])
    return buf.getvalue()


def analytic_to_json_table(ans: AnalyticAnswer) -> dict:
    return {
        "schema": {"key": ans.key_node.name, "value": ans.value_name},
        "rows": [[value_to_json(k), value_to_json(v)] for k, v in ans.sorted_items()],
    }
