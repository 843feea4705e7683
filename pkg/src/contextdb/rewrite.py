"""Algebraic rewriting of query expressions and a reusable result cache.

Four rules: associative (reparenthesize compositions), distributive (push a
shared outer composition into a pairing), grouping (factor a shared inner
function out of a pairing), and restriction propagation (push restrictions to
the source). All are value-preserving on every instance; soundness is
property-tested on randomized instances.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from random import Random

from . import _kernels as kernels
from .algebra import _applier, _MISSING, eval_expression, push_restrictions, EvaluatedFunction
from .context import Context
from .database import DatabaseInstance, FiniteFunction
from .errors import NoMatch, QueryTypeError
from .expr import (
    Compose,
    Expression,
    Pair,
    Restrict,
    at_path,
    canonical_text,
    replace_at_path,
    source,
    target,
    to_text,
    tuple_layout,
    walk,
)
from .randomized import random_database
from .values import sort_key


@dataclass(frozen=True)
class RewriteRule:
    name: str
    transform: "callable"

    def apply(self, expr: Expression) -> Expression:
        return self.transform(expr)


def _associative(expr: Expression) -> Expression:
    if isinstance(expr, Compose):
        if isinstance(expr.outer, Compose):
            a, b, c = expr.outer.outer, expr.outer.inner, expr.inner
            return Compose(a, Compose(b, c))
        if isinstance(expr.inner, Compose):
            a, b, c = expr.outer, expr.inner.outer, expr.inner.inner
            return Compose(Compose(a, b), c)
    raise NoMatch("associative rule needs a nested composition")


def _distributive(expr: Expression) -> Expression:
    if isinstance(expr, Compose) and isinstance(expr.outer, Pair):
        f = expr.inner
        return Pair(tuple(Compose(m, f) for m in expr.outer.members))
    raise NoMatch("distributive rule needs a pairing applied after a function")


def _grouping(expr: Expression) -> Expression:
    if isinstance(expr, Pair) and all(isinstance(m, Compose) for m in expr.members):
        inners = {m.inner for m in expr.members}
        if len(inners) == 1:
            f = next(iter(inners))
            return Compose(Pair(tuple(m.outer for m in expr.members)), f)
    raise NoMatch("grouping rule needs compositions sharing their inner function")


def _restriction_propagation(expr: Expression) -> Expression:
    pushed = push_restrictions(expr)
    if pushed == expr:
        raise NoMatch("no restriction to propagate")
    return pushed


RULES: dict[str, RewriteRule] = {
    "associative": RewriteRule("associative", _associative),
    "distributive": RewriteRule("distributive", _distributive),
    "grouping": RewriteRule("grouping", _grouping),
    "restriction-propagation": RewriteRule("restriction-propagation", _restriction_propagation),
}


@dataclass(frozen=True)
class TraceStep:
    rule: str
    before: Expression
    after: Expression
    path: tuple[int, ...]


@dataclass
class RewriteTrace:
    steps: list[TraceStep] = field(default_factory=list)

    def format(self) -> str:
        lines = []
        for s in self.steps:
            where = ".".join(str(i) for i in s.path) or "root"
            lines.append(
                f"{s.rule} @ {where} : {canonical_text(s.before)} => {canonical_text(s.after)}"
            )
        return "\n".join(lines)

    def replay(self, expr: Expression) -> Expression:
        for s in self.steps:
            if at_path(expr, s.path) != s.before:
                raise NoMatch(f"trace replay diverged at step {s.rule} @ {s.path}")
            expr = replace_at_path(expr, s.path, s.after)
        return expr


def apply_rule(rule, expr: Expression, position: tuple[int, ...] = ()) -> Expression:
    """Apply one rule at a path into the AST; raises NoMatch when it does not fit."""
    if isinstance(rule, str):
        rule = RULES[rule]
    sub = at_path(expr, position)
    return replace_at_path(expr, position, rule.apply(sub))


# -- result cache -------------------------------------------------------------------


class ResultCache:
    """Evaluated functions keyed by canonical expression text and snapshot id.

    Concurrent reads are lock-free; inserts are serialized. Entries are never
    mutated, only inserted.
    """

    def __init__(self):
        self._entries: dict[tuple[str, str], EvaluatedFunction] = {}
        self._texts: set[str] = set()
        self._lock = threading.Lock()

    def get(self, expr: Expression, snapshot: str):
        return self._entries.get((canonical_text(expr), snapshot))

    def put(self, expr: Expression, snapshot: str, value: EvaluatedFunction) -> None:
        with self._lock:
            self._entries[(canonical_text(expr), snapshot)] = value
            self._texts.add(canonical_text(expr))

    def has_text(self, text: str, snapshot: str | None = None) -> bool:
        if snapshot is None:
            return text in self._texts
        return (text, snapshot) in self._entries

    def seed_text(self, text: str) -> None:
        """Mark an expression as cached for planning purposes only."""
        with self._lock:
            self._texts.add(text)

    def __len__(self):
        return len(self._entries)

    def save_dir(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        index = sorted(self._texts)
        (directory / "index.json").write_text(
            json.dumps({"texts": index}, ensure_ascii=False, indent=2), encoding="utf-8"
        )

    @staticmethod
    def load_dir(directory) -> "ResultCache":
        cache = ResultCache()
        path = Path(directory) / "index.json"
        if path.exists():
            for text in json.loads(path.read_text(encoding="utf-8")).get("texts", []):
                cache.seed_text(text)
        return cache


def eval_with_cache(
    expr: Expression, db: DatabaseInstance, cache: ResultCache, snapshot: str | None = None
) -> EvaluatedFunction:
    """Structural evaluation with cache lookups at every subexpression.

    Unrestricted values are cached; restrictions filter after the fetch, so a
    cached unrestricted result serves all its restricted variants.
    """
    snapshot = snapshot or db.snapshot_id()

    def go(e: Expression) -> EvaluatedFunction:
        hit = cache.get(e, snapshot)
        if hit is not None:
            return hit
        if isinstance(e, Compose):
            inner = go(e.inner)
            outer = _applier(e.outer, db)
            out = {}
            for k, v in inner.map.items():
                w = outer(v)
                if w is not _MISSING:
                    out[k] = w
            val = EvaluatedFunction(
                e, FiniteFunction(source(e), target(e), out), inner.restricted
            )
        elif isinstance(e, Pair):
            members = [go(m) for m in e.members]
            _, widths, perm = tuple_layout([m.target_node for m in members])
            keys = set(members[0].map)
            for m in members[1:]:
                keys &= set(m.map)
            out = kernels.pair_rows(
                sorted(keys, key=sort_key), [m.map for m in members], widths, perm
            )
            val = EvaluatedFunction(
                e,
                FiniteFunction(source(e), target(e), out),
                any(m.restricted for m in members),
            )
        elif isinstance(e, Restrict):
            base = go(e.base)
            from .algebra import carrier_of_spec

            carrier = carrier_of_spec(e.spec, source(e.base), db)
            out = {k: v for k, v in base.map.items() if k in carrier}
            return EvaluatedFunction(e, FiniteFunction(source(e), target(e), out), True)
        else:
            val = eval_expression(e, db)
        if not val.restricted:
            cache.put(e, snapshot, val)
        return val

    return go(expr)


# -- cache-steered rewriting ------------------------------------------------------------


def _node_count(expr: Expression) -> int:
    return sum(1 for _ in walk(expr))


def _cache_score(expr: Expression, cache: ResultCache, snapshot: str | None):
    texts = {canonical_text(sub) for _, sub in walk(expr)}
    hits = sum(1 for t in texts if cache.has_text(t, snapshot))
    return (hits, -_node_count(expr))


_RULE_ORDER = ("associative", "distributive", "grouping", "restriction-propagation")


def rewrite_for_cache(
    expr: Expression,
    cache: ResultCache,
    snapshot: str | None = None,
    max_depth: int = 32,
) -> tuple[Expression, RewriteTrace]:
    """Greedy bounded search maximizing cached subexpressions referenced.

    Ties prefer the smaller expression, then the leftmost-innermost match;
    the result is deterministic given the cache contents.
    """
    trace = RewriteTrace()
    current = expr
    current_score = _cache_score(current, cache, snapshot)
    for _ in range(max_depth):
        candidates = []
        for path, _sub in walk(current):
            for rule_idx, rule_name in enumerate(_RULE_ORDER):
                try:
                    rewritten = apply_rule(rule_name, current, path)
                except NoMatch:
                    continue
                score = _cache_score(rewritten, cache, snapshot)
                order = (-len(path), tuple(path), rule_idx)
                candidates.append((score, order, rule_name, path, rewritten))
        if not candidates:
            break
        candidates.sort(key=lambda c: (tuple(-x for x in c[0]), c[1]))
        best_score, _, rule_name, path, rewritten = candidates[0]
        if best_score <= current_score:
            break
        trace.steps.append(
            TraceStep(rule_name, at_path(current, path), at_path(rewritten, path), path)
        )
        current = rewritten
        current_score = best_score
    return current, trace


# -- sampling-based equivalence ------------------------------------------------------------


@dataclass(frozen=True)
class EquivalenceVerdict:
    equivalent_on_samples: bool
    trials: int
    counterexample_db: DatabaseInstance | None = None
    counterexample_key: object = None

    def __bool__(self):
        return self.equivalent_on_samples


def check_equivalence(
    e1: Expression,
    e2: Expression,
    trials: int,
    ctx: Context,
    seed: int = 0,
    max_size: int = 8,
) -> EquivalenceVerdict:
    """Evaluate both expressions on randomized small instances.

    A passing verdict is explicitly "equivalent on the samples", not a proof.
    """
    if source(e1) != source(e2) or target(e1) != target(e2):
        raise QueryTypeError(
            f"expressions are not parallel: {to_text(e1)} vs {to_text(e2)}"
        )
    for i in range(trials):
        db = random_database(ctx, Random(seed + i), max_size)
        m1 = eval_expression(e1, db).map
        m2 = eval_expression(e2, db).map
        if m1 != m2:
            keys = set(m1) ^ set(m2)
            if not keys:
                keys = {k for k in m1 if m1[k] != m2[k]}
            witness = sorted(keys, key=sort_key)[0]
            return EquivalenceVerdict(False, i + 1, db, witness)
    return EquivalenceVerdict(True, trials)
