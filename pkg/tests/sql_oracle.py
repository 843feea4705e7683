"""Brute-force interpreter for the emitted SQL subset, plus a sqlite3 runner.

Both are independent of the emitter: the interpreter walks FROM/JOIN/WHERE/
GROUP BY by hand over row dicts, and sqlite3 is a third-party engine. They
exist so emitted statements can be checked for semantics, not just text.
"""

from __future__ import annotations

import re
import sqlite3

_SQL_RE = re.compile(
    r"^SELECT (?P<select>.*?) FROM (?P<from>\S+)"
    r"(?P<joins>(?: JOIN .*? ON \S+ = \S+)*)"
    r"(?: WHERE (?P<where>.*?))?"
    r"(?: GROUP BY (?P<group>.*?))?$"
)
_JOIN_RE = re.compile(r" JOIN (?P<table>\S+)(?: AS (?P<alias>\S+))? ON (?P<left>\S+) = (?P<right>\S+)")
_AGG_RE = re.compile(r"^(?P<fn>SUM|MIN|MAX|AVG|COUNT)\((?P<distinct>DISTINCT )?(?P<col>[^)]+)\)$")


def _unquote(name: str) -> str:
    if name.startswith('"') and name.endswith('"'):
        return name[1:-1].replace('""', '"')
    return name


def _split_ref(ref: str):
    table, _, col = ref.partition(".")
    return _unquote(table), _unquote(col)


def _parse_literal(text: str):
    text = text.strip()
    if text.startswith("'") and text.endswith("'"):
        return text[1:-1].replace("''", "'")
    if re.match(r"^-?\d+$", text):
        return int(text)
    return float(text)


def run_sql_brute_force(sql: str, tables: dict) -> dict:
    """Evaluate one emitted GROUP BY statement over {table: [row dicts]}."""
    m = _SQL_RE.match(sql)
    if not m:
        raise ValueError(f"unparseable statement: {sql}")
    base = _unquote(m.group("from"))
    rows = [{(base, k): v for k, v in row.items()} for row in tables[base]]

    for j in _JOIN_RE.finditer(m.group("joins") or ""):
        table = _unquote(j.group("table"))
        alias = _unquote(j.group("alias")) if j.group("alias") else table
        lt, lc = _split_ref(j.group("left"))
        rt, rc = _split_ref(j.group("right"))
        joined = []
        for row in rows:
            for extra in tables[table]:
                cand = dict(row)
                cand.update({(alias, k): v for k, v in extra.items()})
                if cand[(lt, lc)] == cand[(rt, rc)]:
                    joined.append(cand)
        rows = joined

    where = m.group("where")
    if where:
        for clause in where.split(" AND "):
            inm = re.match(r"^(\S+) IN \((.*)\)$", clause)
            if inm:
                t, c = _split_ref(inm.group(1))
                allowed = {_parse_literal(x) for x in inm.group(2).split(", ")}
                rows = [r for r in rows if r[(t, c)] in allowed]
                continue
            cm = re.match(r"^(\S+) (=|<>|<=|>=|<|>) (.+)$", clause)
            t, c = _split_ref(cm.group(1))
            op, lit = cm.group(2), _parse_literal(cm.group(3))
            ops = {
                "=": lambda a, b: a == b,
                "<>": lambda a, b: a != b,
                "<": lambda a, b: a < b,
                "<=": lambda a, b: a <= b,
                ">": lambda a, b: a > b,
                ">=": lambda a, b: a >= b,
            }
            rows = [r for r in rows if ops[op](r[(t, c)], lit)]

    select_items = [s.strip() for s in m.group("select").split(", ")]
    agg_m = _AGG_RE.match(select_items[-1])
    group_refs = [_split_ref(s) for s in select_items[:-1]]
    fn = agg_m.group("fn")
    distinct = bool(agg_m.group("distinct"))
    at, ac = _split_ref(agg_m.group("col"))

    groups: dict = {}
    for r in rows:
        key = tuple(r[ref] for ref in group_refs) if group_refs else ()
        groups.setdefault(key, []).append(r[(at, ac)])

    out = {}
    for key, values in groups.items():
        if distinct:
            values = list(set(values))
        if fn == "SUM":
            agg = sum(values)
        elif fn == "MIN":
            agg = min(values)
        elif fn == "MAX":
            agg = max(values)
        elif fn == "AVG":
            agg = sum(values) / len(values)
        else:
            agg = len(values)
        out[key[0] if len(key) == 1 else key] = agg
    return out


def run_sql_sqlite(sql: str, tables: dict) -> dict:
    """Execute the statement on an in-memory sqlite3 database."""
    conn = sqlite3.connect(":memory:")
    for name, rows in tables.items():
        if not rows:
            continue
        cols = list(rows[0])
        conn.execute(f"CREATE TABLE {name} ({', '.join(cols)})")
        conn.executemany(
            f"INSERT INTO {name} VALUES ({', '.join('?' for _ in cols)})",
            [tuple(r[c] for c in cols) for r in rows],
        )
    cur = conn.execute(sql)
    fetched = cur.fetchall()
    conn.close()
    out = {}
    for row in fetched:
        *key, value = row
        out[key[0] if len(key) == 1 else tuple(key) if key else ()] = value
    return out


def tables_from_instance(db, backing) -> dict:
    """Rebuild the backing tables from the instance's edge functions."""
    tables: dict[str, dict] = {}
    for label, entry in backing.entries.items():
        fn = None
        for edge, f in db.edge_functions.items():
            if edge.label == label:
                fn = f
                break
        if fn is None:
            continue
        table = tables.setdefault(entry.table, {})
        for k, v in fn.map.items():
            row = table.setdefault(k, {entry.key_col: k})
            row[entry.val_col] = v
    return {name: list(rows.values()) for name, rows in tables.items()}
