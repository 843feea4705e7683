from pathlib import Path

import pytest

from contextdb import instance_from_maps
from contextdb.context import Context, Edge, NodeRef
from contextdb.database import DatabaseInstance

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def inv_ctx() -> Context:
    return Context.load(FIXTURES / "inv.ctx.json")


@pytest.fixture(scope="session")
def inv7(inv_ctx) -> DatabaseInstance:
    return DatabaseInstance.load(FIXTURES / "inv7.db.json", inv_ctx)


@pytest.fixture(scope="session")
def price_ctx() -> Context:
    """Invoice schema extended with a product node Sup*Cat and a unit price."""
    base = Context.load(FIXTURES / "inv.ctx.json")
    attrs = [(s.attribute, s.base) for s in base.attributes.values() if s.attribute != "⊤"]
    attrs.append(("Unitprice", "float"))
    sup_cat = NodeRef.of("Sup", "Cat")
    edges = set(base.edges)
    edges.add(Edge(NodeRef.of("Prod"), "sc", sup_cat))
    edges.add(Edge(sup_cat, "u", NodeRef.of("Unitprice")))
    return Context(attrs, set(base.nodes) | {sup_cat}, edges)


@pytest.fixture(scope="session")
def price_db(price_ctx) -> DatabaseInstance:
    """INV7 data plus the Sup*Cat edges; sc is consistent with s & c."""
    base = DatabaseInstance.load(FIXTURES / "inv7.db.json", price_ctx)
    node_values = {n: set(vs) for n, vs in base.node_values.items()}
    node_values[NodeRef.of("Unitprice")] = {0.5, 1.25, 2.0, 3.75}
    edge_functions = dict(base.edge_functions)
    sc_edge = next(e for e in price_ctx.edges if e.label == "sc")
    u_edge = next(e for e in price_ctx.edges if e.label == "u")
    s = base.edge_functions[next(e for e in price_ctx.edges if e.label == "s")].map
    c = base.edge_functions[next(e for e in price_ctx.edges if e.label == "c")].map
    # canonical factor order of Sup*Cat is (Cat, Sup)
    edge_functions[sc_edge] = {p: (c[p], s[p]) for p in s}
    prices = {}
    for i, cat in enumerate(sorted({v for v in c.values()})):
        for j, sup in enumerate(sorted({v for v in s.values()})):
            prices[(cat, sup)] = [0.5, 1.25, 2.0, 3.75][(2 * i + j) % 4]
    edge_functions[u_edge] = prices
    return DatabaseInstance(price_ctx, node_values, edge_functions)


@pytest.fixture(scope="session")
def emp_ctx() -> Context:
    return Context(
        [("Emp", "text"), ("Dep", "text"), ("Mgr", "text")],
        edges=[
            Edge(NodeRef.of("Emp"), "f", NodeRef.of("Dep")),
            Edge(NodeRef.of("Dep"), "g", NodeRef.of("Mgr")),
            Edge(NodeRef.of("Emp"), "h", NodeRef.of("Mgr")),
        ],
    )


def emp_db(emp_ctx, h_override=None) -> DatabaseInstance:
    f = {"e1": "D1", "e2": "D1", "e3": "D2"}
    g = {"D1": "m1", "D2": "m2"}
    h = {e: g[f[e]] for e in f}
    if h_override:
        h.update(h_override)
    return instance_from_maps(
        emp_ctx,
        {"Emp": list(f), "Dep": ["D1", "D2"], "Mgr": ["m1", "m2"]},
        {"f": f, "g": g, "h": h},
    )
