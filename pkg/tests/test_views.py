import pytest

from contextdb import (
    answer_over_view,
    eval_expression,
    is_stale,
    materialize,
    parse_expression,
    unfold,
)
from contextdb.context import Context, Edge, NodeRef
from contextdb.database import DatabaseInstance, FiniteFunction
from contextdb.errors import EvalError, QueryTypeError
from contextdb.expr import to_text
from contextdb.views import View


@pytest.fixture
def region_cat_view(inv_ctx):
    """View with edges e := r o b and e2 := c o p, plus d and q passed through."""
    shape = Context(
        [("Inv", "integer"), ("Region", "text"), ("Cat", "text"), ("Date", "date"), ("Qty", "integer")],
        edges=[
            Edge(NodeRef.of("Inv"), "e", NodeRef.of("Region")),
            Edge(NodeRef.of("Inv"), "e2", NodeRef.of("Cat")),
            Edge(NodeRef.of("Inv"), "d", NodeRef.of("Date")),
            Edge(NodeRef.of("Inv"), "q", NodeRef.of("Qty")),
        ],
    )
    return View(shape, inv_ctx, {"e": "r o b", "e2": "c o p"})


@pytest.fixture
def totals_view(inv_ctx):
    shape = Context(
        [("Branch", "text"), ("TotQty", "integer")],
        edges=[Edge(NodeRef.of("Branch"), "e2", NodeRef.of("TotQty"))],
    )
    return View(shape, inv_ctx, {"e2": "analytic(b; q; sum)"})


class TestUnfold:
    def test_pair_of_view_edges(self, region_cat_view, inv_ctx):
        q = parse_expression("e & e2", region_cat_view.shape)
        unfolded = unfold(q, region_cat_view)
        assert unfolded == parse_expression("(r o b) & (c o p)", inv_ctx)

    def test_base_edges_pass_through(self, region_cat_view, inv_ctx):
        q = parse_expression("q", region_cat_view.shape)
        assert unfold(q, region_cat_view) == parse_expression("q", inv_ctx)

    def test_nested_views_unfold_transitively(self, region_cat_view, inv7):
        inner_shape = region_cat_view.shape
        outer_shape = Context(
            [("Inv", "integer"), ("Region", "text")],
            edges=[Edge(NodeRef.of("Inv"), "ee", NodeRef.of("Region"))],
        )
        outer = View(outer_shape, region_cat_view, {"ee": "e"})
        q = parse_expression("ee", outer_shape)
        unfolded = unfold(q, outer)
        assert to_text(unfolded) == "r o b"
        assert eval_expression(unfolded, inv7).map == answer_over_view(outer, q, inv7)

    def test_definition_signature_checked(self, inv_ctx):
        shape = Context(
            [("Inv", "integer"), ("Region", "text")],
            edges=[Edge(NodeRef.of("Inv"), "e", NodeRef.of("Region"))],
        )
        with pytest.raises(QueryTypeError):
            View(shape, inv_ctx, {"e": "b"})  # b targets Branch, not Region

    def test_self_reference_rejected(self, inv_ctx):
        shape = Context(
            [("Inv", "integer"), ("Branch", "text"), ("Region", "text")],
            edges=[
                Edge(NodeRef.of("Inv"), "e", NodeRef.of("Region")),
                Edge(NodeRef.of("Branch"), "e2", NodeRef.of("Region")),
            ],
        )
        with pytest.raises(QueryTypeError, match="own edge"):
            View(shape, inv_ctx, {"e": "e2 o b", "e2": "r"})

    def test_label_shadowing_base_edge_is_pass_through(self, inv_ctx, inv7):
        # a view edge may reuse a base label; its definition refers to the base
        shape = Context(
            [("Inv", "integer"), ("Region", "text")],
            edges=[Edge(NodeRef.of("Inv"), "r", NodeRef.of("Region"))],
        )
        view = View(shape, inv_ctx, {"r": "r o b"})
        q = parse_expression("r", shape)
        assert to_text(unfold(q, view)) == "r o b"

    def test_analytic_edge_cannot_unfold(self, totals_view):
        q = parse_expression("e2", totals_view.shape)
        with pytest.raises(EvalError):
            unfold(q, totals_view)


class TestMaterialize:
    def test_materialized_matches_unfolding(self, region_cat_view, inv7):
        mat = materialize(region_cat_view, inv7)
        q = parse_expression("e", region_cat_view.shape)
        assert mat.materialized.functions["e"] == eval_expression(
            unfold(q, region_cat_view), inv7
        ).map

    def test_analytic_edge_stored(self, totals_view, inv7):
        mat = materialize(totals_view, inv7)
        assert mat.materialized.functions["e2"] == {
            "Branch-1": 300, "Branch-2": 600, "Branch-3": 600,
        }

    def test_stale_flag(self, totals_view, inv7):
        mat = materialize(totals_view, inv7)
        assert not is_stale(mat, inv7)
        q_edge = next(e for e in inv7.context.edges if e.label == "q")
        changed_fns = dict(inv7.edge_functions)
        m = dict(changed_fns[q_edge].map)
        m[1] = 400
        changed_fns[q_edge] = FiniteFunction(q_edge.source, q_edge.target, m)
        changed = DatabaseInstance(inv7.context, inv7.node_values, changed_fns)
        assert is_stale(mat, changed)

    def test_query_over_analytic_edge(self, totals_view, inv7):
        q = parse_expression("e2", totals_view.shape)
        assert answer_over_view(totals_view, q, inv7) == {
            "Branch-1": 300, "Branch-2": 600, "Branch-3": 600,
        }

    def test_composition_over_analytic_edge(self, inv_ctx, inv7):
        shape = Context(
            [("Branch", "text"), ("TotQty", "integer"), ("Region", "text")],
            edges=[
                Edge(NodeRef.of("Branch"), "e2", NodeRef.of("TotQty")),
                Edge(NodeRef.of("Branch"), "r", NodeRef.of("Region")),
            ],
        )
        view = View(shape, inv_ctx, {"e2": "analytic(b; q; sum)", "r": "r"})
        q = parse_expression("e2 & r", shape)
        got = answer_over_view(view, q, inv7)
        # canonical factor order: Region before TotQty
        assert got == {
            "Branch-1": ("North", 300),
            "Branch-2": ("South", 600),
            "Branch-3": ("South", 600),
        }


class TestSerialization:
    def test_round_trip(self, region_cat_view, inv_ctx, tmp_path):
        path = tmp_path / "view.json"
        region_cat_view.save(path)
        again = View.load(path, inv_ctx)
        assert again.definitions == region_cat_view.definitions
        assert again.shape.edges == region_cat_view.shape.edges
