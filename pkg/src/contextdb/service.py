"""Read-only HTTP service over one immutable snapshot.

Endpoints mirror the CLI: the JSON payloads for traversal and analytic
answers are byte-identical to the CLI's ``--json`` output for the same query
and snapshot.
"""

from __future__ import annotations

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse

from .analytic import (
    analytic_to_json_table,
    applicable_aggregates,
    combine_answers,
    evaluate_analytic,
    make_analytic,
    parse_answer_restriction,
    restrict_answer,
)
from .context import Context
from .database import DatabaseInstance
from .errors import ContextDbError, UnknownEdge, UnknownNode
from .parser import parse_traversal
from .proposals import enumerate_proposals
from .relational import BackingMap, emit_sql
from .traversal import induced_relation, relation_to_json_table

_NOT_FOUND_CODES = {"unknown-node", "unknown-edge"}


def create_app(
    ctx: Context, db: DatabaseInstance, backing: BackingMap | None = None
) -> FastAPI:
    app = FastAPI(title="contextdb", docs_url=None, redoc_url=None)
    snapshot = db.snapshot_id()

    @app.exception_handler(ContextDbError)
    async def engine_error(request: Request, exc: ContextDbError):
        status = 404 if exc.code in _NOT_FOUND_CODES else 400
        return JSONResponse(status_code=status, content={"error": exc.to_json()})

    @app.get("/health")
    def health():
        return {"status": "ok", "snapshot": snapshot}

    @app.get("/context")
    def context():
        return ctx.to_json()

    @app.get("/aggregates")
    def aggregates(node: str = Query(...)):
        n = ctx.node_by_name(node)
        return {"node": n.name, "aggregates": applicable_aggregates(n, ctx)}

    @app.post("/proposals")
    def proposals(body: dict):
        targets = [ctx.node_by_name(t) for t in body.get("targets", [])]
        found = enumerate_proposals(
            ctx,
            targets,
            max_len=int(body.get("max_len", 8)),
            max_per_pair=int(body.get("max_per_pair", 32)),
        )
        return {
            "proposals": [
                {
                    "key": p.key.name,
                    "depth": p.depth,
                    "expressions": {
                        t.name: [  # shortest first, as enumerated
                            _text(e) for e in exprs
                        ]
                        for t, exprs in sorted(p.expressions.items(), key=lambda kv: kv[0].name)
                    },
                }
                for p in found
            ]
        }

    @app.post("/traversal")
    def traversal(body: dict):
        q = parse_traversal(body["query"], ctx)
        mode = body.get("mode", "alias")
        if mode == "eq":
            mode = "require_equalities"
        relation = induced_relation(q, db, mode=mode)
        return {"relation": relation_to_json_table(relation), "snapshot": snapshot}

    @app.post("/analytic")
    def analytic(body: dict):
        g = parse_traversal(body["grouping"], ctx)
        m = parse_traversal(body["measuring"], ctx)
        q = make_analytic(g, m, body["op"], ctx)
        ans = evaluate_analytic(q, db)
        for text in body.get("restrictions", []) or []:
            ans = restrict_answer(ans, parse_answer_restriction(text))
        combine = body.get("combine")
        if combine:
            if "scalar" in combine:
                other = combine["scalar"]
            else:
                q2 = make_analytic(
                    parse_traversal(combine["grouping"], ctx),
                    parse_traversal(combine["measuring"], ctx),
                    combine.get("op", body["op"]),
                    ctx,
                )
                other = evaluate_analytic(q2, db)
            ans = combine_answers(ans, other, combine.get("how", "divide"))
        sql = None
        if body.get("emit_sql") and backing is not None:
            sql = emit_sql(q, backing)
        return {"answer": analytic_to_json_table(ans), "sql": sql, "snapshot": snapshot}

    return app


def _text(expr) -> str:
    from .expr import to_text

    return to_text(expr)
