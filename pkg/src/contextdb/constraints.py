"""Equality and refinement constraints over an instance.

An equality constraint requires two parallel expressions to have the same
value. A refinement constraint compares the partitions two common-source
expressions induce: the finer one determines the coarser one, and the
determining function is synthesized as a unique witness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .algebra import EvaluatedFunction, eval_expression
from .context import Context, ValidationReport
from .database import DatabaseInstance, FiniteFunction, partition_of
from .errors import NotRefined, QueryTypeError
from .expr import Expression, source, target, to_text
from .values import sort_key


@dataclass(frozen=True)
class Equality:
    lhs: Expression
    rhs: Expression

    def __post_init__(self):
        if source(self.lhs) != source(self.rhs) or target(self.lhs) != target(self.rhs):
            raise QueryTypeError(
                "equality constraint needs parallel expressions, got "
                f"{to_text(self.lhs)} and {to_text(self.rhs)}"
            )


@dataclass(frozen=True)
class Refinement:
    finer: Expression
    coarser: Expression

    def __post_init__(self):
        if source(self.finer) != source(self.coarser):
            raise QueryTypeError(
                "refinement constraint needs a common source, got "
                f"{to_text(self.finer)} and {to_text(self.coarser)}"
            )


Constraint = Union[Equality, Refinement]


@dataclass(frozen=True)
class Verdict:
    satisfied: bool
    witnesses: tuple = ()
    detail: str = ""

    def __bool__(self):
        return self.satisfied


def check_equality(c: Equality, db: DatabaseInstance) -> Verdict:
    lhs = eval_expression(c.lhs, db)
    rhs = eval_expression(c.rhs, db)
    common = sorted(set(lhs.map) & set(rhs.map), key=sort_key)
    witnesses = [k for k in common if lhs.map[k] != rhs.map[k]]
    if witnesses:
        return Verdict(
            False,
            tuple(witnesses[:10]),
            f"{to_text(c.lhs)} = {to_text(c.rhs)} fails on {len(witnesses)} key(s)",
        )
    return Verdict(True)


def check_refinement(c: Refinement, db: DatabaseInstance) -> Verdict:
    """Every block of the finer partition must sit inside a coarser block."""
    fine = eval_expression(c.finer, db)
    coarse = eval_expression(c.coarser, db)
    common = set(fine.map) & set(coarse.map)
    blocks: dict = {}
    for k in common:
        blocks.setdefault(fine.map[k], []).append(k)
    for v, block in sorted(blocks.items(), key=lambda kv: sort_key(kv[0])):
        images = {coarse.map[k] for k in block}
        if len(images) > 1:
            block_sorted = sorted(block, key=sort_key)
            first_image = coarse.map[block_sorted[0]]
            other = next(k for k in block_sorted if coarse.map[k] != first_image)
            return Verdict(
                False,
                (block_sorted[0], other),
                f"block {sorted(block, key=sort_key)} of {to_text(c.finer)} straddles "
                f"{len(images)} blocks of {to_text(c.coarser)}",
            )
    return Verdict(True)


def refinement_witness(f: EvaluatedFunction, g: EvaluatedFunction) -> FiniteFunction:
    """The unique h on range(f) with h(f(x)) = g(x), when f refines g."""
    common = set(f.map) & set(g.map)
    h: dict = {}
    for k in sorted(common, key=sort_key):
        y = f.map[k]
        z = g.map[k]
        if y in h and h[y] != z:
            raise NotRefined(
                f"{to_text(f.expression)} does not refine {to_text(g.expression)}: "
                f"value {y!r} maps ambiguously"
            )
        h[y] = z
    return FiniteFunction(f.target_node, g.target_node, h)


def _parse_declared(ctx: Context):
    from .parser import parse_expression  # parser depends on this module's users, not vice versa

    out = []
    for decl in ctx.constraints:
        lhs = parse_expression(decl.lhs, ctx)
        rhs = parse_expression(decl.rhs, ctx)
        if decl.kind == "eq":
            out.append(Equality(lhs, rhs))
        elif decl.kind == "ref":
            out.append(Refinement(lhs, rhs))
        else:
            raise QueryTypeError(f"unknown constraint kind {decl.kind!r}")
    return out


def check_all(db: DatabaseInstance) -> ValidationReport:
    """Evaluate every declared constraint; violations become report entries."""
    report = ValidationReport()
    for c in _parse_declared(db.context):
        if isinstance(c, Equality):
            verdict = check_equality(c, db)
            code, text = "equality", f"{to_text(c.lhs)} = {to_text(c.rhs)}"
        else:
            verdict = check_refinement(c, db)
            code, text = "refinement", f"{to_text(c.finer)} <= {to_text(c.coarser)}"
        if not verdict:
            report.add(code, f"constraint {text} violated: {verdict.detail}", verdict.witnesses)
    return report
