from random import Random

import pytest

from contextdb import (
    eval_expression,
    extensionally_equal,
    implied_closure_step,
    parse_expression,
    push_restrictions,
    preimage,
)
from contextdb.context import NodeRef
from contextdb.expr import Restrict, source, to_text
from contextdb.randomized import random_database
from contextdb.values import UNIT


def ev(text, ctx, db):
    return eval_expression(parse_expression(text, ctx), db)


class TestBasicEvaluation:
    def test_edge_value(self, inv_ctx, inv7):
        b = ev("b", inv_ctx, inv7)
        assert b.map == {
            1: "Branch-1", 2: "Branch-1", 3: "Branch-2", 4: "Branch-2",
            5: "Branch-3", 6: "Branch-3", 7: "Branch-3",
        }

    def test_identity(self, inv_ctx, inv7):
        ident = ev("id(Inv)", inv_ctx, inv7)
        assert ident.map == {i: i for i in range(1, 8)}

    def test_pairing(self, inv_ctx, inv7):
        pair = ev("b & q", inv_ctx, inv7)
        assert pair.map[1] == ("Branch-1", 200)
        assert pair.map[7] == ("Branch-3", 100)
        assert len(pair.map) == 7

    def test_terminal_absorption(self, inv_ctx, inv7):
        absorbed = ev("tau(Qty) o q", inv_ctx, inv7)
        plain = ev("tau(Inv)", inv_ctx, inv7)
        assert absorbed.map == plain.map == {i: UNIT for i in range(1, 8)}

    def test_composition(self, inv_ctx, inv7):
        rb = ev("r o b", inv_ctx, inv7)
        assert rb.map == {1: "North", 2: "North", 3: "South", 4: "South",
                          5: "South", 6: "South", 7: "South"}

    def test_identity_laws(self, inv_ctx, inv7):
        q = ev("q", inv_ctx, inv7)
        left = ev("id(Qty) o q", inv_ctx, inv7)
        right = ev("q o id(Inv)", inv_ctx, inv7)
        assert q.map == left.map == right.map

    def test_empty_carrier_is_legal(self, inv_ctx, inv7):
        empty = ev('b/{99}', inv_ctx, inv7)
        assert empty.map == {}

    def test_pair_commutativity_canonical(self, inv_ctx, inv7):
        bq = ev("b & q", inv_ctx, inv7)
        qb = ev("q & b", inv_ctx, inv7)
        assert bq.map == qb.map  # canonical factor order makes both identical
        assert bq.target_node == qb.target_node

    def test_projection_over_product_edge(self, price_ctx, price_db):
        sup = ev("pi[Sup*Cat](Sup) o sc", price_ctx, price_db)
        s = ev("s", price_ctx, price_db)
        assert sup.map == s.map

    def test_product_of_functions(self, inv_ctx, inv7):
        prod = ev("b * r", inv_ctx, inv7)
        assert len(prod.map) == 7 * 3
        # canonical source order is (Branch, Inv); targets are (Branch, Region)
        assert prod.map[("Branch-1", 1)] == ("Branch-1", "North")


class TestLemmas:
    def test_projection_recovers_pair_component(self, inv_ctx, inv7):
        lhs = ev("pi[Branch*Qty](Branch) o (b & q)", inv_ctx, inv7)
        assert lhs.map == ev("b", inv_ctx, inv7).map
        rhs = ev("pi[Branch*Qty](Qty) o (b & q)", inv_ctx, inv7)
        assert rhs.map == ev("q", inv_ctx, inv7).map

    def test_product_equals_pair_of_projected_compositions(self, inv_ctx, inv7):
        direct = ev("b * r", inv_ctx, inv7)
        derived = ev("(b o pi[Branch*Inv](Inv)) & (r o pi[Branch*Inv](Branch))", inv_ctx, inv7)
        assert direct.map == derived.map
        assert direct.target_node == derived.target_node

    def test_lemma_checks_on_random_instances(self, inv_ctx):
        for i in range(25):
            db = random_database(inv_ctx, Random(1000 + i), max_size=6)
            f = ev("b", inv_ctx, db)
            lhs = ev("pi[Branch*Qty](Branch) o (b & q)", inv_ctx, db)
            assert extensionally_equal(lhs, f)


class TestRestrictionPushing:
    def test_two_step_law(self, inv_ctx, inv7):
        # (r/T) o (b/S) == (r o b)/W with W = S intersected with the b-preimage of T
        expr = parse_expression('(r/{"Branch-1", "Branch-2"}) o (b/{1, 2, 3, 6})', inv_ctx)
        pushed = push_restrictions(expr)
        assert isinstance(pushed, Restrict) and not isinstance(pushed.base, Restrict)
        got = eval_expression(pushed, inv7)
        direct = eval_expression(expr, inv7)
        assert got.map == direct.map
        b = ev("b", inv_ctx, inv7)
        expected_carrier = {1, 2, 3, 6} & preimage(b.fn, {"Branch-1", "Branch-2"})
        assert set(got.map) == expected_carrier == {1, 2, 3}

    def test_no_restrictions_unchanged(self, inv_ctx):
        expr = parse_expression("r o b", inv_ctx)
        assert push_restrictions(expr) == expr

    def test_pair_restrictions_merge(self, inv_ctx, inv7):
        expr = parse_expression('(b/{1, 2, 3}) & (q/{1, 2, 5})', inv_ctx)
        pushed = push_restrictions(expr)
        assert isinstance(pushed, Restrict)
        assert eval_expression(pushed, inv7).map == eval_expression(expr, inv7).map
        assert set(eval_expression(pushed, inv7).map) == {1, 2}

    def test_randomized_equivalence(self, inv_ctx):
        samples = [
            '(r/{"Branch_0", "Branch_1"}) o (b/{1, 2, 3, 10, 20})',
            '(r/{"Branch_0"}) o b',
            '(b/{1, 2, 3, 30, 40}) & (q/{1, 2, 5, 30, 50})',
            '(h/{"Sup_0"}) o (s/{"Prod_0", "Prod_1"}) o p',
            '((r o b)/{5, 6, 7}) & q',
            "(b & q)/[q <= 50]",
        ]
        for i in range(20):
            db = random_database(inv_ctx, Random(2000 + i), max_size=6)
            for text in samples:
                expr = parse_expression(text, inv_ctx)
                a = eval_expression(expr, db)
                b = eval_expression(push_restrictions(expr), db)
                assert a.map == b.map, text


class TestImpliedClosure:
    def test_transitivity(self, inv7):
        known = {
            (NodeRef.of("Inv"), NodeRef.of("Branch")),
            (NodeRef.of("Branch"), NodeRef.of("Region")),
        }
        out = implied_closure_step(inv7, known)
        assert (NodeRef.of("Inv"), NodeRef.of("Region")) in out

    def test_projections_from_product_node(self, price_db):
        out = implied_closure_step(price_db, set())
        sup_cat = NodeRef.of("Sup", "Cat")
        assert (sup_cat, NodeRef.of("Sup")) in out
        assert (sup_cat, NodeRef.of("Cat")) in out

    def test_augmentation(self, inv7):
        known = {(NodeRef.of("Prod"), NodeRef.of("Sup"))}
        out = implied_closure_step(inv7, known)
        assert (NodeRef.of("Prod", "Cat"), NodeRef.of("Sup", "Cat")) in out

    def test_augmentation_witness_is_total(self, inv_ctx, inv7):
        # s x id(Cat) is a total function on the product carrier
        prod = ev("s * id(Cat)", inv_ctx, inv7)
        assert len(prod.map) == inv7.extent_size(NodeRef.of("Prod", "Cat"))

    def test_monotone(self, inv7):
        known = {(NodeRef.of("Inv"), NodeRef.of("Branch"))}
        out = implied_closure_step(inv7, known)
        assert known <= out
