"""Relational bridge: ingestion by projections, export by queries, SQL emission.

A consistent keyed relation decomposes into one total function per non-key
column; pairing those functions back recovers the relation exactly. In the
other direction a named set of traversal queries exports a relational
database, and analytic queries over backed edges translate to one ANSI SQL
GROUP BY statement.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .context import Context, NodeRef
from .database import DatabaseInstance, FiniteFunction
from .errors import KeyViolation, QueryTypeError, UnbackedEdge
from .expr import (
    AnalyticQueryAst,
    Compose,
    EdgeRef,
    Expression,
    Identity,
    Literal,
    Predicate,
    Restrict,
    Terminal,
    TraversalQueryAst,
    ValueSet,
    compose_chain,
    target,
    to_text,
)
from .traversal import Relation, induced_relation, is_tree
from .values import sort_key


# -- ingestion -----------------------------------------------------------------------


@dataclass(frozen=True)
class IngestResult:
    """Projections of one keyed relation: extents and edge functions by label."""

    node_values: dict  # node name -> set of values
    edge_maps: dict  # edge label -> {key -> value}
    key_column: str


def ingest_relation(columns, rows, key_column, edge_labels) -> IngestResult:
    """Decompose a keyed relation into per-column total functions.

    ``edge_labels`` maps each non-key column to the edge label that carries
    it. Duplicate keys (after dropping identical rows) violate the key
    dependencies and are rejected with both conflicting rows.
    """
    if key_column not in columns:
        raise KeyViolation([key_column])
    key_idx = columns.index(key_column)
    distinct = []
    seen_rows = set()
    for row in rows:
        t = tuple(row)
        if t not in seen_rows:
            seen_rows.add(t)
            distinct.append(t)
    by_key = {}
    for row in distinct:
        k = row[key_idx]
        if k in by_key:
            raise KeyViolation([(k, by_key[k], row)])
        by_key[k] = row

    node_values = {col: set() for col in columns}
    for row in distinct:
        for col, v in zip(columns, row):
            node_values[col].add(v)
    edge_maps = {}
    for col in columns:
        if col == key_column:
            continue
        label = edge_labels[col]
        idx = columns.index(col)
        edge_maps[label] = {row[key_idx]: row[idx] for row in distinct}
    return IngestResult(node_values, edge_maps, key_column)


def instance_from_ingests(ctx: Context, ingests) -> DatabaseInstance:
    """Merge ingest contributions into one instance over the schema."""
    from .database import _edge_by_key

    node_values: dict[NodeRef, set] = {}
    edge_functions = {}
    for ing in ingests:
        for name, values in ing.node_values.items():
            node = NodeRef((name,))
            node_values.setdefault(node, set()).update(values)
        for label, mapping in ing.edge_maps.items():
            edge = _edge_by_key(ctx, label)
            edge_functions[edge] = FiniteFunction(edge.source, edge.target, dict(mapping))
    return DatabaseInstance(ctx, node_values, edge_functions)


# -- export --------------------------------------------------------------------------


@dataclass(frozen=True)
class QueryDef:
    text: str
    mode: str = "alias"  # or "require_equalities"


@dataclass(frozen=True)
class RelationalViewDef:
    queries: dict  # relation name -> QueryDef

    @staticmethod
    def from_json(doc: dict) -> "RelationalViewDef":
        return RelationalViewDef(
            {
                name: QueryDef(q["query"], q.get("mode", "alias"))
                for name, q in doc.get("relations", {}).items()
            }
        )

    @staticmethod
    def load(path) -> "RelationalViewDef":
        return RelationalViewDef.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def export_database(defs: RelationalViewDef, db: DatabaseInstance) -> dict[str, Relation]:
    from .parser import parse_traversal

    out = {}
    for name in sorted(defs.queries):
        qdef = defs.queries[name]
        q = parse_traversal(qdef.text, db.context)
        mode = "require_equalities" if qdef.mode in ("eq", "require_equalities") else "alias"
        out[name] = induced_relation(q, db, mode=mode, name=name)
    return out


# -- SQL emission -----------------------------------------------------------------------


@dataclass(frozen=True)
class BackingEntry:
    table: str
    key_col: str
    val_col: str


class BackingMap:
    """Relational backing per edge label: table plus key/value columns."""

    def __init__(self, entries: dict):
        self.entries = {
            label: e if isinstance(e, BackingEntry) else BackingEntry(**e)
            for label, e in entries.items()
        }

    def __getitem__(self, label: str) -> BackingEntry:
        try:
            return self.entries[label]
        except KeyError:
            raise UnbackedEdge(label) from None

    def __contains__(self, label):
        return label in self.entries

    @staticmethod
    def load(path) -> "BackingMap":
        return BackingMap(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_json(self) -> dict:
        return {
            label: {"table": e.table, "key_col": e.key_col, "val_col": e.val_col}
            for label, e in sorted(self.entries.items())
        }


_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _quote_ident(name: str) -> str:
    if _IDENT_RE.match(name):
        return name
    return '"' + name.replace('"', '""') + '"'


def _quote_literal(v) -> str:
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    return repr(v)


class _JoinPlan:
    """FROM/JOIN bookkeeping shared by every expression chain of the query."""

    def __init__(self, from_table: str, key_col: str):
        self.from_table = from_table
        self.key_col = key_col
        self.joins: list[str] = []
        self.where: list[str] = []
        self._alias_counts: dict[str, int] = {from_table: 1}
        self._walked: dict[tuple, tuple] = {}

    def alias_for(self, table: str) -> str:
        n = self._alias_counts.get(table, 0) + 1
        self._alias_counts[table] = n
        return table if n == 1 else f"{table}_{n}"

    def walk_edge(self, at: tuple[str, str], entry: BackingEntry, label: str) -> tuple[str, str]:
        """Move along one backed edge from the current (table, column) anchor."""
        cur_table, cur_col = at
        memo_key = (cur_table, cur_col, label)
        if memo_key in self._walked:
            return self._walked[memo_key]
        if entry.table == cur_table and entry.key_col == cur_col:
            result = (cur_table, entry.val_col)
        else:
            alias = self.alias_for(entry.table)
            table_sql = (
                _quote_ident(entry.table)
                if alias == entry.table
                else f"{_quote_ident(entry.table)} AS {_quote_ident(alias)}"
            )
            self.joins.append(
                f"JOIN {table_sql} ON {_quote_ident(cur_table)}.{_quote_ident(cur_col)}"
                f" = {_quote_ident(alias)}.{_quote_ident(entry.key_col)}"
            )
            result = (alias, entry.val_col)
        self._walked[memo_key] = result
        return result


def _chain_atoms(expr: Expression):
    """Chain steps innermost-first: (kind, payload, restrictions)."""
    steps = []
    for item in reversed(compose_chain(expr)):
        specs = []
        while isinstance(item, Restrict):
            specs.append(item.spec)
            item = item.base
        steps.append((item, specs))
    return steps


def _emit_column(plan: _JoinPlan, expr: Expression, backing: BackingMap):
    """Resolve an expression chain to a column; returns None for a terminal map."""
    at = (plan.from_table, plan.key_col)
    col = f"{_quote_ident(plan.from_table)}.{_quote_ident(plan.key_col)}"
    for item, specs in _chain_atoms(expr):
        if isinstance(item, Terminal):
            _apply_specs(plan, at, specs)
            return None
        if isinstance(item, Identity):
            _apply_specs(plan, at, specs)
            col = f"{_quote_ident(at[0])}.{_quote_ident(at[1])}"
            continue
        if isinstance(item, EdgeRef):
            _apply_specs(plan, at, specs)  # restrictions bind the edge's source
            entry = backing[item.edge.label]
            at = plan.walk_edge(at, entry, item.edge.label)
            col = f"{_quote_ident(at[0])}.{_quote_ident(at[1])}"
            continue
        raise QueryTypeError(
            f"cannot translate {to_text(item)}: SQL emission covers chains of "
            "backed edges, identities, terminals and restrictions"
        )
    return col


def _apply_specs(plan: _JoinPlan, at: tuple[str, str], specs) -> None:
    col = f"{_quote_ident(at[0])}.{_quote_ident(at[1])}"
    for spec in specs:
        if isinstance(spec, ValueSet):
            values = sorted(spec.values, key=sort_key)
            if len(values) == 1:
                plan.where.append(f"{col} = {_quote_literal(values[0])}")
            else:
                plan.where.append(f"{col} IN ({', '.join(_quote_literal(v) for v in values)})")
        elif isinstance(spec, Predicate):
            for cmp in spec.comparisons:
                if not isinstance(cmp.rhs, Literal) or not isinstance(cmp.lhs, Identity):
                    raise QueryTypeError(
                        "SQL emission supports node restrictions of the form "
                        "id(X)/[id(X) op literal] or value sets"
                    )
                op = "<>" if cmp.op == "!=" else cmp.op
                plan.where.append(f"{col} {op} {_quote_literal(cmp.rhs.value)}")
        else:
            raise QueryTypeError(f"restriction {spec} is not translatable to SQL")


_SQL_AGG = {"sum": "SUM", "min": "MIN", "max": "MAX", "avg": "AVG", "count": "COUNT", "countd": "COUNT"}


def emit_sql(q: AnalyticQueryAst, backing: BackingMap) -> str:
    """One ANSI SQL-92 GROUP BY statement for an analytic query over backed edges.

    Joins follow composition order (innermost edge first); formatting is
    deterministic so emitted text is golden-testable. No trailing semicolon.
    """
    if not is_tree(q.grouping) or not is_tree(q.measuring):
        raise QueryTypeError("SQL emission needs tree-shaped grouping and measuring queries")

    anchor_edge = None
    for expr in tuple(q.grouping.expressions) + tuple(q.measuring.expressions):
        first, _ = _chain_atoms(expr)[0]
        if isinstance(first, EdgeRef):
            anchor_edge = first.edge
            break
    if anchor_edge is None:
        raise QueryTypeError("SQL emission needs at least one backed edge to anchor FROM")
    entry = backing[anchor_edge.label]
    plan = _JoinPlan(entry.table, entry.key_col)

    group_cols = []
    for expr in q.grouping.expressions:
        col = _emit_column(plan, expr, backing)
        if col is not None:
            group_cols.append(col)

    measure_cols = [_emit_column(plan, expr, backing) for expr in q.measuring.expressions]
    if len(measure_cols) != 1 or measure_cols[0] is None:
        raise QueryTypeError("SQL emission needs a single column-valued measuring query")
    agg_fn = _SQL_AGG[q.op]
    inner = f"DISTINCT {measure_cols[0]}" if q.op == "countd" else measure_cols[0]
    agg = f"{agg_fn}({inner})"

    select = ", ".join(group_cols + [agg])
    sql = f"SELECT {select} FROM {_quote_ident(plan.from_table)}"
    for j in plan.joins:
        sql += f" {j}"
    if plan.where:
        sql += " WHERE " + " AND ".join(plan.where)
    if group_cols:
        sql += " GROUP BY " + ", ".join(group_cols)
    return sql
