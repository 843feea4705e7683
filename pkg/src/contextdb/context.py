"""Schema graphs: nodes, labeled edges, special edges, validation.

A schema is a finite labeled DAG with a single root. Simple nodes are
attributes of the universe; product nodes are canonicalized sorted tuples of
attributes. Identity, terminal and projection edges exist for every node but
are synthesized on demand, never stored, so serialized schemas stay minimal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import RootCollision, SchemaError, UnknownNode
from .values import BASES, TERMINAL_ATTR

RESERVED_ATTRS = {TERMINAL_ATTR, "T", "unit"}


@dataclass(frozen=True)
class NodeRef:
    """A simple node (one factor) or a product node (sorted factors).

    Product is treated as associative and commutative, so factors are kept
    sorted and nested products are flattened at construction. Declared schema
    nodes must have distinct factors; derived pairing targets may repeat one.
    """

    factors: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(sorted(self.factors)))
        if not self.factors:
            raise ValueError("a node needs at least one factor")

    @staticmethod
    def of(*names: str) -> "NodeRef":
        return NodeRef(tuple(names))

    @staticmethod
    def product(nodes) -> "NodeRef":
        factors: list[str] = []
        for n in nodes:
            factors.extend(n.factors)
        return NodeRef(tuple(factors))

    @property
    def is_terminal(self) -> bool:
        return self.factors == (TERMINAL_ATTR,)

    @property
    def is_simple(self) -> bool:
        return len(self.factors) == 1 and not self.is_terminal

    @property
    def is_product(self) -> bool:
        return len(self.factors) > 1

    @property
    def name(self) -> str:
        if self.is_terminal:
            return "T"
        return "*".join(self.factors)

    def sub_product(self, other: "NodeRef") -> bool:
        """True when ``other`` is a proper sub-product of this node."""
        if not self.is_product or other == self:
            return False
        pool = list(self.factors)
        for f in other.factors:
            if f in pool:
                pool.remove(f)
            else:
                return False
        return True

    def __repr__(self):
        return f"NodeRef({self.name})"


TERMINAL = NodeRef((TERMINAL_ATTR,))


def node_from_name(text: str) -> NodeRef:
    if text == "T" or text == TERMINAL_ATTR:
        return TERMINAL
    return NodeRef(tuple(text.split("*")))


class EdgeKind(str, Enum):
    PLAIN = "plain"
    IDENTITY = "identity"
    TERMINAL = "terminal"
    PROJECTION = "projection"


@dataclass(frozen=True)
class Edge:
    """Edge identity is the (source, label, target) triple."""

    source: NodeRef
    label: str
    target: NodeRef
    kind: EdgeKind = EdgeKind.PLAIN

    @property
    def key(self) -> str:
        return f"{self.label}@{self.source.name}>{self.target.name}"

    def __repr__(self):
        return f"Edge({self.key})"


def identity_edge(node: NodeRef) -> Edge:
    return Edge(node, f"id({node.name})", node, EdgeKind.IDENTITY)


def terminal_edge(node: NodeRef) -> Edge:
    return Edge(node, f"tau({node.name})", TERMINAL, EdgeKind.TERMINAL)


def projection_edge(source: NodeRef, target: NodeRef) -> Edge:
    if not (source.sub_product(target)):
        raise SchemaError(
            f"projection must go from a product node to a proper sub-product, "
            f"got {source.name} -> {target.name}"
        )
    return Edge(source, f"pi[{source.name}]({target.name})", target, EdgeKind.PROJECTION)


@dataclass(frozen=True)
class DomainSpec:
    attribute: str
    base: str

    def __post_init__(self):
        if self.base not in BASES:
            raise SchemaError(f"unknown base domain {self.base!r} for {self.attribute}")


@dataclass(frozen=True)
class ConstraintDecl:
    """Declared constraint in serialized form; parsed lazily by the checker."""

    kind: str  # "eq" | "ref"
    lhs: str
    rhs: str


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    elements: tuple = ()

    def __str__(self):
        return f"[{self.code}] {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str, elements=()):
        self.violations.append(Violation(code, message, tuple(elements)))

    def __iter__(self):
        return iter(self.violations)

    def __len__(self):
        return len(self.violations)

    def __str__(self):
        if self.ok:
            return "ok"
        return "\n".join(str(v) for v in self.violations)


class Context:
    """Immutable schema value; share freely across concurrent evaluations."""

    def __init__(
        self,
        attributes,
        nodes=(),
        edges=(),
        constraints=(),
        node_classes=None,
        coalesced=None,
    ):
        specs = {}
        for spec in attributes:
            if isinstance(spec, DomainSpec):
                specs[spec.attribute] = spec
            else:
                name, base = spec
                specs[name] = DomainSpec(name, base)
        specs.setdefault(TERMINAL_ATTR, DomainSpec(TERMINAL_ATTR, "unit"))
        self.attributes: dict[str, DomainSpec] = specs

        node_set = set(nodes)
        edge_set = set(edges)
        for e in edge_set:
            node_set.add(e.source)
            node_set.add(e.target)
        node_set.discard(TERMINAL)
        self.nodes: frozenset[NodeRef] = frozenset(node_set)
        self.edges: frozenset[Edge] = frozenset(edge_set)
        self.constraints: tuple[ConstraintDecl, ...] = tuple(constraints)
        # Coalescing metadata: representative -> full equivalence class, and
        # original node -> representative.
        self.node_classes: dict[NodeRef, frozenset[NodeRef]] = dict(node_classes or {})
        self.coalesced: dict[NodeRef, NodeRef] = dict(coalesced or {})

        self._by_label: dict[str, list[Edge]] = {}
        self._out: dict[NodeRef, list[Edge]] = {n: [] for n in self.nodes}
        self._in: dict[NodeRef, list[Edge]] = {n: [] for n in self.nodes}
        for e in sorted(self.edges, key=lambda e: e.key):
            self._by_label.setdefault(e.label, []).append(e)
            self._out[e.source].append(e)
            self._in[e.target].append(e)

    # -- node and edge lookup ------------------------------------------------

    def has_node(self, node: NodeRef) -> bool:
        return node == TERMINAL or node in self.nodes

    def usable_node(self, node: NodeRef) -> bool:
        """Declared nodes plus implicit products of declared simple nodes.

        Pairing targets are products that need not be declared; projections
        and identities over them are still well-formed.
        """
        if self.has_node(node):
            return True
        return all(NodeRef((f,)) in self.nodes for f in node.factors)

    def node_by_name(self, text: str) -> NodeRef:
        node = node_from_name(text)
        if text == "T" and "T" in self.attributes and TERMINAL_ATTR != "T":
            node = NodeRef(("T",))
        if not self.has_node(node):
            raise UnknownNode(text)
        return node

    def identity_edge(self, node: NodeRef) -> Edge:
        if not self.usable_node(node):
            raise UnknownNode(node.name)
        return identity_edge(node)

    def terminal_edge(self, node: NodeRef) -> Edge:
        if not self.usable_node(node):
            raise UnknownNode(node.name)
        return terminal_edge(node)

    def projection_edge(self, source: NodeRef, target: NodeRef) -> Edge:
        return projection_edge(source, target)

    def edges_by_label(self, label: str) -> list[Edge]:
        return list(self._by_label.get(label, []))

    def edges_from(self, node: NodeRef) -> list[Edge]:
        return list(self._out.get(node, []))

    def edges_into(self, node: NodeRef) -> list[Edge]:
        return list(self._in.get(node, []))

    def projections_from(self, node: NodeRef) -> list[Edge]:
        """Synthesized projections from ``node`` to sub-products present as nodes."""
        if not node.is_product:
            return []
        return [
            projection_edge(node, other)
            for other in sorted(self.nodes, key=lambda n: n.name)
            if node.sub_product(other)
        ]

    def class_of(self, node: NodeRef) -> frozenset[NodeRef]:
        return self.node_classes.get(node, frozenset({node}))

    # -- roots ----------------------------------------------------------------

    def _has_incoming(self, node: NodeRef) -> bool:
        if self._in.get(node):
            return True
        return any(other.sub_product(node) for other in self.nodes)

    def roots(self) -> list[NodeRef]:
        return sorted(
            (n for n in self.nodes if not self._has_incoming(n)),
            key=lambda n: n.name,
        )

    def root(self) -> NodeRef:
        roots = self.roots()
        if len(roots) != 1:
            raise SchemaError(f"expected a single root, found {[r.name for r in roots]}")
        return roots[0]

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        attrs = [
            {"name": s.attribute, "base": s.base}
            for s in sorted(self.attributes.values(), key=lambda s: s.attribute)
            if s.attribute != TERMINAL_ATTR
        ]
        nodes = sorted([list(n.factors) for n in self.nodes])
        edges = sorted(
            (
                {"source": list(e.source.factors), "label": e.label, "target": list(e.target.factors)}
                for e in self.edges
            ),
            key=lambda d: (d["label"], d["source"], d["target"]),
        )
        doc = {
            "attributes": attrs,
            "nodes": nodes,
            "edges": edges,
            "constraints": [{"kind": c.kind, "lhs": c.lhs, "rhs": c.rhs} for c in self.constraints],
        }
        if self.node_classes:
            doc["classes"] = {
                rep.name: sorted(m.name for m in members)
                for rep, members in sorted(self.node_classes.items(), key=lambda kv: kv[0].name)
            }
        return doc

    @staticmethod
    def from_json(doc: dict) -> "Context":
        attrs = [(a["name"], a["base"]) for a in doc.get("attributes", [])]
        nodes = [NodeRef(tuple(f)) for f in doc.get("nodes", [])]
        edges = [
            Edge(NodeRef(tuple(e["source"])), e["label"], NodeRef(tuple(e["target"])))
            for e in doc.get("edges", [])
        ]
        constraints = [
            ConstraintDecl(c["kind"], c["lhs"], c["rhs"]) for c in doc.get("constraints", [])
        ]
        classes = None
        if "classes" in doc:
            classes = {
                node_from_name(rep): frozenset(node_from_name(m) for m in members)
                for rep, members in doc["classes"].items()
            }
        return Context(attrs, nodes, edges, constraints, node_classes=classes)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def load(path) -> "Context":
        return Context.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# -- validation -----------------------------------------------------------------


def _plain_adjacency(ctx: Context) -> dict[NodeRef, list[NodeRef]]:
    adj = {n: [] for n in ctx.nodes}
    for e in sorted(ctx.edges, key=lambda e: e.key):
        if e.kind is EdgeKind.PLAIN and not e.target.is_terminal:
            adj[e.source].append(e.target)
    return adj


def strongly_connected_components(adj: dict) -> list[list]:
    """Iterative Tarjan over an adjacency dict (deterministic order)."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    components: list[list] = []
    counter = 0

    for start in sorted(adj, key=lambda n: n.name):
        if start in index:
            continue
        work = [(start, iter(sorted(adj[start], key=lambda n: n.name)))]
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack.add(start)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(sorted(adj[nxt], key=lambda n: n.name))))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    n = stack.pop()
                    on_stack.discard(n)
                    comp.append(n)
                    if n == node:
                        break
                components.append(sorted(comp, key=lambda n: n.name))
    return components


def validate_context(ctx: Context) -> ValidationReport:
    """Check all schema invariants; violations are data, not faults."""
    report = ValidationReport()

    for name in sorted(ctx.attributes):
        if name in RESERVED_ATTRS and name != TERMINAL_ATTR:
            report.add("reserved-name", f"attribute name {name!r} is reserved", (name,))

    for node in sorted(ctx.nodes, key=lambda n: n.name):
        seen = set()
        for f in node.factors:
            if f in seen:
                report.add(
                    "duplicate-factors",
                    f"declared node {node.name} repeats factor {f!r}",
                    (node.name,),
                )
            seen.add(f)
            if f not in ctx.attributes:
                report.add("unknown-attribute", f"node {node.name} uses unregistered attribute {f!r}", (f,))

    for e in sorted(ctx.edges, key=lambda e: e.key):
        if e.kind is not EdgeKind.PLAIN:
            report.add(
                "stored-special-edge",
                f"edge {e.key} has kind {e.kind.value}; special edges are synthesized, not stored",
                (e.key,),
            )
        for endpoint in (e.source, e.target):
            if not ctx.has_node(endpoint):
                report.add("unknown-node", f"edge {e.key} references unknown node {endpoint.name}", (e.key,))

    # No isolated nodes: every attribute must occur in some plain edge
    # endpoint, except attributes folded away by cycle coalescing.
    used = set()
    for e in ctx.edges:
        used.update(e.source.factors)
        used.update(e.target.factors)
    folded = {
        f
        for members in ctx.node_classes.values()
        for m in members
        for f in m.factors
    }
    for name in sorted(ctx.attributes):
        if name == TERMINAL_ATTR:
            continue
        if name not in used and name not in folded:
            report.add("isolated-node", f"attribute {name!r} appears in no edge", (name,))

    adj = _plain_adjacency(ctx)
    self_loops = {e.source for e in ctx.edges if e.source == e.target}
    for comp in strongly_connected_components(adj):
        if len(comp) > 1 or comp[0] in self_loops:
            report.add(
                "cycle",
                "cycle among nodes: " + ", ".join(n.name for n in comp),
                tuple(n.name for n in comp),
            )
    if any(v.code == "cycle" for v in report):
        return report  # root accounting is meaningless on a cyclic graph

    roots = ctx.roots()
    if len(roots) == 0 and ctx.nodes:
        report.add("no-root", "no node without incoming edges", ())
    elif len(roots) > 1:
        report.add(
            "multiple-roots",
            "more than one root: " + ", ".join(n.name for n in roots),
            tuple(n.name for n in roots),
        )
    return report


def coalesce_cycles(ctx: Context) -> Context:
    """Collapse every plain-edge cycle to its lexicographically least node.

    Intra-class edges are dropped; the class membership is retained on the
    result so folded nodes stay inspectable.
    """
    adj = _plain_adjacency(ctx)
    self_loops = {e.source for e in ctx.edges if e.source == e.target}
    mapping: dict[NodeRef, NodeRef] = {}
    classes: dict[NodeRef, frozenset[NodeRef]] = dict(ctx.node_classes)
    for comp in strongly_connected_components(adj):
        rep = min(comp, key=lambda n: n.name)
        for n in comp:
            mapping[n] = rep
        if len(comp) > 1 or rep in self_loops:
            classes[rep] = frozenset(comp) | classes.get(rep, frozenset())

    new_edges = set()
    for e in ctx.edges:
        src, tgt = mapping.get(e.source, e.source), mapping.get(e.target, e.target)
        if src == tgt:
            continue  # intra-class edge (including self loops)
        new_edges.add(Edge(src, e.label, tgt, e.kind))

    new_nodes = {mapping.get(n, n) for n in ctx.nodes}
    return Context(
        ctx.attributes.values(),
        new_nodes,
        new_edges,
        ctx.constraints,
        node_classes=classes,
        coalesced={n: mapping.get(n, n) for n in ctx.nodes},
    )


def join_contexts(c1: Context, c2: Context) -> Context:
    """Put two schemas under a fresh product root with projections to both."""
    r1, r2 = c1.root(), c2.root()
    s1, s2 = set(r1.factors), set(r2.factors)
    if s1 <= s2 or s2 <= s1:
        raise RootCollision(
            f"cannot join: root {r1.name} and root {r2.name} overlap as products"
        )
    attrs = dict(c1.attributes)
    for name, spec in c2.attributes.items():
        if name in attrs and attrs[name] != spec:
            raise SchemaError(
                f"attribute {name!r} declared with different domains in the two schemas"
            )
        attrs[name] = spec
    new_root = NodeRef.product([r1, r2])
    return Context(
        attrs.values(),
        set(c1.nodes) | set(c2.nodes) | {new_root},
        set(c1.edges) | set(c2.edges),
        tuple(c1.constraints) + tuple(c2.constraints),
        node_classes={**c1.node_classes, **c2.node_classes},
    )
