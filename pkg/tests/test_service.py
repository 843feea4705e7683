import json

import pytest
from fastapi.testclient import TestClient

from contextdb import BackingMap
from contextdb.service import create_app
from tests.conftest import FIXTURES


@pytest.fixture(scope="module")
def client(request):
    inv_ctx = request.getfixturevalue("inv_ctx")
    inv7 = request.getfixturevalue("inv7")
    backing = BackingMap.load(FIXTURES / "backing.json")
    return TestClient(create_app(inv_ctx, inv7, backing))


class TestEndpoints:
    def test_health(self, client):
        res = client.get("/health")
        assert res.status_code == 200
        assert res.json()["status"] == "ok"

    def test_context_graph(self, client):
        doc = client.get("/context").json()
        assert {"attributes", "nodes", "edges"} <= set(doc)
        labels = {e["label"] for e in doc["edges"]}
        assert labels == {"d", "b", "p", "q", "r", "c", "s", "h"}

    def test_aggregates_for_text_node(self, client):
        res = client.get("/aggregates", params={"node": "Branch"})
        assert res.json()["aggregates"] == ["count", "countd"]

    def test_aggregates_unknown_node_404(self, client):
        assert client.get("/aggregates", params={"node": "Nope"}).status_code == 404

    def test_proposals(self, client):
        res = client.post("/proposals", json={"targets": ["Region"]})
        assert res.status_code == 200
        by_key = {p["key"]: p for p in res.json()["proposals"]}
        assert by_key["Inv"]["expressions"]["Region"] == ["r o b", "h o s o p"]

    def test_traversal(self, client):
        res = client.post("/traversal", json={"query": "Q(Prod; s; c)", "mode": "alias"})
        table = res.json()["relation"]
        assert table["schema"]["key"] == "Prod"
        assert ["P1", "S1", "Food"] in table["rows"]

    def test_analytic_by_region(self, client):
        res = client.post(
            "/analytic", json={"grouping": "r o b", "measuring": "q", "op": "sum"}
        )
        assert res.json()["answer"]["rows"] == [["North", 300], ["South", 1200]]

    def test_analytic_with_restriction_and_sql(self, client):
        res = client.post(
            "/analytic",
            json={
                "grouping": "b",
                "measuring": "q",
                "op": "sum",
                "restrictions": ["value > 500"],
                "emit_sql": True,
            },
        )
        doc = res.json()
        assert doc["answer"]["rows"] == [["Branch-2", 600], ["Branch-3", 600]]
        assert doc["sql"] == "SELECT R.Branch, SUM(R.Qty) FROM R GROUP BY R.Branch"

    def test_analytic_percentages_via_combine(self, client):
        res = client.post(
            "/analytic",
            json={
                "grouping": "b",
                "measuring": "q",
                "op": "sum",
                "combine": {"grouping": "tau(Inv)", "measuring": "q", "how": "divide"},
            },
        )
        assert res.json()["answer"]["rows"] == [
            ["Branch-1", 0.2], ["Branch-2", 0.4], ["Branch-3", 0.4],
        ]

    def test_engine_error_becomes_400(self, client):
        res = client.post(
            "/analytic", json={"grouping": "q", "measuring": "b", "op": "sum"}
        )
        assert res.status_code == 400
        assert res.json()["error"]["code"] == "op-not-applicable"

    def test_unknown_edge_becomes_404(self, client):
        res = client.post("/traversal", json={"query": "zz"})
        assert res.status_code == 404

    def test_syntax_error_becomes_400(self, client):
        res = client.post("/traversal", json={"query": "r o"})
        assert res.status_code == 400
        assert res.json()["error"]["code"] == "syntax"


class TestCliParity:
    def test_http_json_matches_cli_json(self, client, inv_ctx, inv7):
        from click.testing import CliRunner

        from contextdb.cli import main

        res = client.post(
            "/analytic", json={"grouping": "b", "measuring": "q", "op": "sum"}
        )
        http_payload = json.dumps(res.json()["answer"], ensure_ascii=False, sort_keys=True)
        runner = CliRunner()
        out = runner.invoke(
            main,
            [
                "analytic",
                str(FIXTURES / "inv.ctx.json"),
                str(FIXTURES / "inv7.db.json"),
                "b",
                "q",
                "sum",
                "--json",
            ],
        )
        assert out.exit_code == 0
        assert out.output.strip() == http_payload
