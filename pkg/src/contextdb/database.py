"""Instances: finite value sets per simple node, total finite functions per edge.

Product-node extents are derived from the factor extents and iterated lazily,
never stored or materialized as sets. Instances are immutable snapshots; every
load yields a fresh one identified by a content hash.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import _kernels as kernels
from .context import Context, Edge, EdgeKind, NodeRef, TERMINAL, ValidationReport, node_from_name
from .errors import InstanceError
from .values import UNIT, check_value, sort_key, value_from_json, value_to_json


@dataclass(frozen=True)
class FiniteFunction:
    """A total finite function between two node extents."""

    domain_node: NodeRef
    target_node: NodeRef
    map: dict

    def __call__(self, x):
        return self.map[x]

    def keys(self):
        return self.map.keys()

    def range(self) -> set:
        return set(self.map.values())

    def sorted_keys(self) -> list:
        return sorted(self.map, key=sort_key)

    def __len__(self):
        return len(self.map)


@dataclass(frozen=True)
class Partition:
    """Disjoint nonempty blocks covering a carrier subset of a node extent."""

    base_node: NodeRef
    blocks: frozenset[frozenset]

    @property
    def carrier(self) -> frozenset:
        return frozenset(x for b in self.blocks for x in b)

    def block_of(self, x):
        for b in self.blocks:
            if x in b:
                return b
        raise KeyError(x)

    def refines(self, other: "Partition") -> bool:
        """Every block here fits inside a block of ``other``."""
        lookup = {}
        for b in other.blocks:
            for x in b:
                lookup[x] = b
        for b in self.blocks:
            it = iter(b)
            first = lookup.get(next(it))
            if first is None:
                return False
            if any(lookup.get(x) is not first for x in it):
                return False
        return True


class DatabaseInstance:
    """Immutable assignment of extents and edge functions over a schema."""

    def __init__(self, context: Context, node_values: dict, edge_functions: dict):
        self.context = context
        self.node_values: dict[NodeRef, frozenset] = {
            n: frozenset(vs) for n, vs in node_values.items()
        }
        fns = {}
        for edge, fn in edge_functions.items():
            if not isinstance(fn, FiniteFunction):
                fn = FiniteFunction(edge.source, edge.target, dict(fn))
            fns[edge] = fn
        self.edge_functions: dict[Edge, FiniteFunction] = fns

    # -- extents ---------------------------------------------------------------

    def extent(self, node: NodeRef) -> frozenset:
        """Extent of a simple or terminal node (product extents are virtual)."""
        if node.is_terminal:
            return frozenset({UNIT})
        if node.is_product:
            raise InstanceError(
                f"extent of product node {node.name} is virtual; iterate it instead"
            )
        return self.node_values.get(node, frozenset())

    def extent_iter(self, node: NodeRef):
        """Iterate a node extent in sorted order (lazily for products)."""
        if node.is_product:
            factor_sets = [
                sorted(self.extent(NodeRef((f,))), key=sort_key) for f in node.factors
            ]
            return itertools.product(*factor_sets)
        return iter(sorted(self.extent(node), key=sort_key))

    def extent_size(self, node: NodeRef) -> int:
        if node.is_product:
            size = 1
            for f in node.factors:
                size *= len(self.extent(NodeRef((f,))))
            return size
        return len(self.extent(node))

    def extent_contains(self, node: NodeRef, value) -> bool:
        if node.is_product:
            if not isinstance(value, tuple) or len(value) != len(node.factors):
                return False
            return all(
                v in self.extent(NodeRef((f,))) for f, v in zip(node.factors, value)
            )
        return value in self.extent(node)

    # -- edge functions ----------------------------------------------------------

    def edge_function(self, edge: Edge) -> FiniteFunction:
        if edge.kind is EdgeKind.PLAIN:
            try:
                return self.edge_functions[edge]
            except KeyError:
                raise InstanceError(f"no function stored for edge {edge.key}") from None
        if edge.kind is EdgeKind.IDENTITY:
            return FiniteFunction(
                edge.source, edge.source, {x: x for x in self.extent_iter(edge.source)}
            )
        if edge.kind is EdgeKind.TERMINAL:
            return FiniteFunction(
                edge.source, TERMINAL, {x: UNIT for x in self.extent_iter(edge.source)}
            )
        if edge.kind is EdgeKind.PROJECTION:
            sel = projection_selector(edge.source, edge.target)
            return FiniteFunction(
                edge.source, edge.target, {x: sel(x) for x in self.extent_iter(edge.source)}
            )
        raise InstanceError(f"unhandled edge kind {edge.kind}")

    # -- serialization -------------------------------------------------------------

    def to_json(self) -> dict:
        nodes = {
            n.name: [value_to_json(v) for v in sorted(vs, key=sort_key)]
            for n, vs in sorted(self.node_values.items(), key=lambda kv: kv[0].name)
        }
        edges = {
            e.key: [
                [value_to_json(k), value_to_json(v)]
                for k, v in sorted(fn.map.items(), key=lambda kv: sort_key(kv[0]))
            ]
            for e, fn in sorted(self.edge_functions.items(), key=lambda kv: kv[0].key)
        }
        return {"nodes": nodes, "edges": edges}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @staticmethod
    def from_json(doc: dict, context: Context) -> "DatabaseInstance":
        node_values = {}
        for name, values in doc.get("nodes", {}).items():
            node = node_from_name(name)
            base = context.attributes[node.factors[0]].base if node.is_simple else None
            node_values[node] = frozenset(value_from_json(v, base) for v in values)
        edge_functions = {}
        for key, pairs in doc.get("edges", {}).items():
            edge = _edge_by_key(context, key)
            tgt = edge.target
            base = context.attributes[tgt.factors[0]].base if tgt.is_simple else None
            edge_functions[edge] = FiniteFunction(
                edge.source,
                edge.target,
                {value_from_json(k): value_from_json(v, base) for k, v in pairs},
            )
        return DatabaseInstance(context, node_values, edge_functions)

    @staticmethod
    def load(path, context: Context) -> "DatabaseInstance":
        return DatabaseInstance.from_json(
            json.loads(Path(path).read_text(encoding="utf-8")), context
        )

    def snapshot_id(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()


def _edge_by_key(context: Context, key: str) -> Edge:
    label, _, rest = key.partition("@")
    if rest:
        src_name, _, tgt_name = rest.partition(">")
        src, tgt = node_from_name(src_name), node_from_name(tgt_name)
        for e in context.edges_by_label(label):
            if e.source == src and e.target == tgt:
                return e
        raise InstanceError(f"context has no edge {key}")
    candidates = context.edges_by_label(label)
    if len(candidates) == 1:
        return candidates[0]
    raise InstanceError(f"edge key {key!r} is missing or ambiguous in the context")


def projection_selector(source: NodeRef, target: NodeRef):
    """Component selector for a projection between canonical product tuples.

    Repeated factor names are matched by occurrence: the k-th occurrence in
    the target takes the k-th occurrence in the source.
    """
    positions: dict[str, list[int]] = {}
    for i, f in enumerate(source.factors):
        positions.setdefault(f, []).append(i)
    taken: dict[str, int] = {}
    idxs = []
    for f in target.factors:
        occ = taken.get(f, 0)
        try:
            idxs.append(positions[f][occ])
        except (KeyError, IndexError):
            raise InstanceError(
                f"{target.name} is not a sub-product of {source.name}"
            ) from None
        taken[f] = occ + 1
    if len(target.factors) == 1:
        i = idxs[0]
        return lambda x: x[i]
    sel = tuple(idxs)
    return lambda x: tuple(x[i] for i in sel)


# -- operations ---------------------------------------------------------------------


def validate_instance(db: DatabaseInstance) -> ValidationReport:
    """Totality and domain checks for every stored edge function."""
    report = ValidationReport()
    ctx = db.context

    for node in sorted(ctx.nodes, key=lambda n: n.name):
        if not node.is_simple:
            continue
        base = ctx.attributes[node.factors[0]].base
        for v in sorted(db.node_values.get(node, ()), key=sort_key):
            if not check_value(v, base):
                report.add(
                    "bad-domain",
                    f"value {v!r} is not in the {base} domain of {node.name}",
                    (node.name, v),
                )

    for edge in sorted(ctx.edges, key=lambda e: e.key):
        fn = db.edge_functions.get(edge)
        if fn is None:
            report.add("missing-edge-function", f"no function stored for edge {edge.key}", (edge.key,))
            continue
        dom, tgt = edge.source, edge.target
        expected = db.extent_size(dom)
        if len(fn.map) != expected or any(
            not db.extent_contains(dom, k) for k in fn.map
        ):
            missing = expected - len(fn.map)
            report.add(
                "not-total",
                f"edge {edge.key} is not a total function on {dom.name} "
                f"({len(fn.map)} of {expected} keys)",
                (edge.key, missing),
            )
        if tgt.is_simple:
            base = ctx.attributes[tgt.factors[0]].base
            for k, v in fn.map.items():
                if not check_value(v, base):
                    report.add(
                        "bad-domain",
                        f"edge {edge.key} maps {k!r} to {v!r}, outside the {base} domain of {tgt.name}",
                        (edge.key, k),
                    )
                    break
        for k, v in fn.map.items():
            if not db.extent_contains(tgt, v):
                report.add(
                    "bad-image",
                    f"edge {edge.key} maps {k!r} to {v!r}, not in the extent of {tgt.name}",
                    (edge.key, k),
                )
                break
    return report


def partition_of(fn: FiniteFunction) -> Partition:
    """Blocks are the nonempty preimages of the function's range values."""
    groups: dict = {}
    for k, v in fn.map.items():
        groups.setdefault(v, []).append(k)
    return Partition(fn.domain_node, frozenset(frozenset(b) for b in groups.values()))


def preimage(fn: FiniteFunction, targets) -> set:
    return kernels.preimage_keys(fn.map, set(targets))


# -- construction helpers ----------------------------------------------------------


def instance_from_maps(context: Context, node_values: dict, edge_maps: dict) -> DatabaseInstance:
    """Build an instance from name-keyed extents and label-keyed edge maps."""
    nodes = {node_from_name(name): set(vs) for name, vs in node_values.items()}
    edges = {}
    for label, mapping in edge_maps.items():
        edge = _edge_by_key(context, label)
        edges[edge] = FiniteFunction(edge.source, edge.target, dict(mapping))
    return DatabaseInstance(context, nodes, edges)


def load_edge_csv(path, context: Context, edge_key: str) -> tuple[Edge, FiniteFunction]:
    """Two-column CSV (x,y) for one edge; values coerced per the domains."""
    edge = _edge_by_key(context, edge_key)

    def coerce(text: str, node: NodeRef):
        if not node.is_simple:
            raise InstanceError(f"CSV import supports simple endpoints only, got {node.name}")
        base = context.attributes[node.factors[0]].base
        if base == "integer":
            return int(text)
        if base == "float":
            return float(text)
        return text

    mapping = {}
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.reader(f):
            if not row:
                continue
            x, y = row[0], row[1]
            mapping[coerce(x, edge.source)] = coerce(y, edge.target)
    return edge, FiniteFunction(edge.source, edge.target, mapping)
