"""Command line shell: load, validate, query, rewrite, export, emit SQL, serve.

Exit codes: 0 success, 1 violations found, 2 usage or parse errors.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .analytic import (
    analytic_to_csv,
    analytic_to_json_table,
    evaluate_analytic,
    make_analytic,
    parse_answer_restriction,
    restrict_answer,
    rewrite_composition,
    AGGREGATES,
)
from .constraints import check_all
from .context import Context, validate_context
from .database import DatabaseInstance, load_edge_csv, validate_instance
from .errors import ContextDbError, QuerySyntaxError
from .expr import Compose, to_text
from .parser import parse_analytic, parse_expression, parse_traversal
from .relational import BackingMap, RelationalViewDef, emit_sql, export_database
from .rewrite import ResultCache, rewrite_for_cache
from .traversal import induced_relation, relation_to_csv, relation_to_json_table


def _load_ctx(path: str) -> Context:
    return Context.load(path)


def _load_db(ctx: Context, path: str, edge_csvs=()) -> DatabaseInstance:
    db = DatabaseInstance.load(path, ctx)
    if edge_csvs:
        functions = dict(db.edge_functions)
        for item in edge_csvs:
            key, _, csv_path = item.partition("=")
            edge, fn = load_edge_csv(csv_path, ctx, key)
            functions[edge] = fn
        db = DatabaseInstance(ctx, db.node_values, functions)
    return db


def _fail(exc: ContextDbError) -> None:
    click.echo(f"error [{exc.code}]: {exc}", err=True)
    sys.exit(2)


@click.group()
def main():
    """Graph database engine over DAG schemas of total functions."""


@main.command()
@click.argument("ctx_path", metavar="CTX")
@click.argument("db_path", metavar="[DB]", required=False)
def validate(ctx_path, db_path):
    """Validate a schema file and optionally an instance over it."""
    ctx = _load_ctx(ctx_path)
    report = validate_context(ctx)
    if db_path:
        db = _load_db(ctx, db_path)
        for v in validate_instance(db):
            report.violations.append(v)
    if report.ok:
        click.echo("ok")
        sys.exit(0)
    click.echo(str(report))
    sys.exit(1)


@main.command()
@click.argument("ctx_path", metavar="CTX")
@click.argument("db_path", metavar="DB")
@click.argument("query_text", metavar="QUERY")
@click.option("--mode", type=click.Choice(["alias", "eq"]), default="alias")
@click.option("--csv", "csv_out", type=click.Path(), default=None, help="write CSV to a file")
@click.option("--json", "as_json", is_flag=True, help="print the JSON table form")
@click.option("--edge-csv", multiple=True, metavar="LABEL=FILE", help="load an edge from a two-column CSV")
def query(ctx_path, db_path, query_text, mode, csv_out, as_json, edge_csv):
    """Answer a traversal query and print its induced relation."""
    try:
        ctx = _load_ctx(ctx_path)
        db = _load_db(ctx, db_path, edge_csv)
        q = parse_traversal(query_text, ctx)
        relation = induced_relation(
            q, db, mode="require_equalities" if mode == "eq" else "alias"
        )
    except ContextDbError as exc:
        _fail(exc)
    text = relation_to_csv(relation)
    if csv_out:
        Path(csv_out).write_text(text, encoding="utf-8")
    if as_json:
        click.echo(json.dumps(relation_to_json_table(relation), ensure_ascii=False, sort_keys=True))
    elif not csv_out:
        click.echo(text.replace("\r\n", "\n").rstrip("\n"))


@main.command()
@click.argument("ctx_path", metavar="CTX")
@click.argument("db_path", metavar="DB")
@click.argument("grouping", metavar="G")
@click.argument("measuring", metavar="M")
@click.argument("op", metavar="OP", type=click.Choice(sorted(AGGREGATES)))
@click.option("--restrict", "restrictions", multiple=True, help='answer restriction, e.g. "value > 500"')
@click.option("--explain", is_flag=True, help="print the nested evaluation plan")
@click.option("--json", "as_json", is_flag=True, help="print the JSON table form")
@click.option("--csv", "csv_out", type=click.Path(), default=None)
def analytic(ctx_path, db_path, grouping, measuring, op, restrictions, explain, as_json, csv_out):
    """Evaluate an analytic query (grouping, measuring, aggregate)."""
    try:
        ctx = _load_ctx(ctx_path)
        db = _load_db(ctx, db_path)
        q = make_analytic(parse_traversal(grouping, ctx), parse_traversal(measuring, ctx), op, ctx)
        if explain:
            g_expr = q.grouping.as_expression()
            if AGGREGATES[op].associative and isinstance(g_expr, Compose):
                click.echo(f"plan: {rewrite_composition(q).describe()}", err=True)
            else:
                click.echo("plan: direct evaluation", err=True)
        ans = evaluate_analytic(q, db)
        for r in restrictions:
            ans = restrict_answer(ans, parse_answer_restriction(r))
    except ContextDbError as exc:
        _fail(exc)
    if csv_out:
        Path(csv_out).write_text(analytic_to_csv(ans), encoding="utf-8")
    if as_json:
        click.echo(json.dumps(analytic_to_json_table(ans), ensure_ascii=False, sort_keys=True))
    elif not csv_out:
        click.echo(analytic_to_csv(ans).replace("\r\n", "\n").rstrip("\n"))


@main.command()
@click.argument("ctx_path", metavar="CTX")
@click.argument("expr_text", metavar="EXPR")
@click.option("--cache", "cache_dir", type=click.Path(), default=None, help="directory with cached expression index")
@click.option("--explain", is_flag=True, help="print the rewrite trace")
def rewrite(ctx_path, expr_text, cache_dir, explain):
    """Rewrite an expression to reuse cached results."""
    try:
        ctx = _load_ctx(ctx_path)
        expr = parse_expression(expr_text, ctx)
        cache = ResultCache.load_dir(cache_dir) if cache_dir else ResultCache()
        rewritten, trace = rewrite_for_cache(expr, cache)
    except ContextDbError as exc:
        _fail(exc)
    if explain:
        click.echo(trace.format() or "(no rewrite)")
    click.echo(to_text(rewritten))


@main.command()
@click.argument("ctx_path", metavar="CTX")
@click.argument("db_path", metavar="DB")
def check(ctx_path, db_path):
    """Check every declared constraint of the schema against the instance."""
    try:
        ctx = _load_ctx(ctx_path)
        db = _load_db(ctx, db_path)
        report = check_all(db)
    except ContextDbError as exc:
        _fail(exc)
    if report.ok:
        click.echo("ok")
        sys.exit(0)
    click.echo(str(report))
    sys.exit(1)


@main.command()
@click.argument("ctx_path", metavar="CTX")
@click.argument("db_path", metavar="DB")
@click.argument("viewdefs", metavar="VIEWDEFS")
@click.option("--outdir", type=click.Path(), required=True)
def export(ctx_path, db_path, viewdefs, outdir):
    """Export relations defined by stored traversal queries, one CSV each."""
    try:
        ctx = _load_ctx(ctx_path)
        db = _load_db(ctx, db_path)
        defs = RelationalViewDef.load(viewdefs)
        relations = export_database(defs, db)
    except ContextDbError as exc:
        _fail(exc)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, relation in sorted(relations.items()):
        (out / f"{name}.csv").write_text(relation_to_csv(relation), encoding="utf-8")
        click.echo(f"wrote {name}.csv ({len(relation.rows)} rows)")


@main.command(name="emit-sql")
@click.argument("ctx_path", metavar="CTX")
@click.argument("analytic_text", metavar="ANALYTIC")
@click.argument("backing_path", metavar="BACKING")
def emit_sql_cmd(ctx_path, analytic_text, backing_path):
    """Emit the SQL GROUP BY statement for analytic(G; M; OP)."""
    try:
        ctx = _load_ctx(ctx_path)
        q = parse_analytic(analytic_text, ctx)
        backing = BackingMap.load(backing_path)
        click.echo(emit_sql(q, backing))
    except ContextDbError as exc:
        _fail(exc)


@main.command()
@click.argument("ctx_path", metavar="CTX")
@click.argument("db_path", metavar="DB")
@click.option("--port", type=int, default=None, help="defaults to CONTEXTDB_PORT or 8000")
@click.option("--host", default="127.0.0.1")
@click.option("--backing", "backing_path", type=click.Path(), default=None)
def serve(ctx_path, db_path, port, host, backing_path):
    """Serve the HTTP API over one immutable snapshot."""
    import uvicorn

    from .service import create_app

    try:
        ctx = _load_ctx(ctx_path)
        db = _load_db(ctx, db_path)
        backing = BackingMap.load(backing_path) if backing_path else None
    except ContextDbError as exc:
        _fail(exc)
    if port is None:
        port = int(os.environ.get("CONTEXTDB_PORT", "8000"))
    uvicorn.run(create_app(ctx, db, backing), host=host, port=port)


if __name__ == "__main__":
    main()
