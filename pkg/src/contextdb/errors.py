"""Exception hierarchy.

Every engine error carries a stable ``code`` (used by the HTTP layer and the
CLI) and an optional structured ``payload``.
"""

from __future__ import annotations

from typing import Any


class ContextDbError(Exception):
    """Base class for all engine errors."""

    code = "error"

    def __init__(self, message: str, payload: Any = None):
        super().__init__(message)
        self.payload = payload

    def to_json(self) -> dict:
        return {"code": self.code, "message": str(self), "payload": self.payload}


class SchemaError(ContextDbError):
    code = "schema"


class RootCollision(SchemaError):
    code = "root-collision"


class InstanceError(ContextDbError):
    code = "instance"


class QuerySyntaxError(ContextDbError):
    """Raised by the parser; ``position`` is a 0-based offset into the text."""

    code = "syntax"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})", {"position": position})
        self.position = position


class UnknownEdge(ContextDbError):
    code = "unknown-edge"

    def __init__(self, label: str):
        super().__init__(f"unknown edge label {label!r}", {"label": label})
        self.label = label


class AmbiguousEdge(ContextDbError):
    code = "ambiguous-edge"

    def __init__(self, label: str, candidates):
        names = ", ".join(sorted(candidates))
        super().__init__(
            f"edge label {label!r} is ambiguous; qualify as one of: {names}",
            {"label": label, "candidates": sorted(candidates)},
        )


class UnknownNode(ContextDbError):
    code = "unknown-node"

    def __init__(self, name: str):
        super().__init__(f"unknown node {name!r}", {"node": name})


class QueryTypeError(ContextDbError):
    code = "type"


class KeyMismatch(QueryTypeError):
    code = "key-mismatch"

    def __init__(self, sources):
        names = ", ".join(sources)
        super().__init__(f"expressions have different sources: {names}", {"sources": list(sources)})


class PredicateTypeError(QueryTypeError):
    code = "predicate-type"


class EvalError(ContextDbError):
    code = "eval"


class OpNotApplicable(ContextDbError):
    code = "op-not-applicable"

    def __init__(self, op: str, target: str):
        super().__init__(
            f"aggregate {op!r} is not applicable to values of {target}",
            {"op": op, "target": target},
        )


class NotTreeQuery(ContextDbError):
    code = "not-tree"

    def __init__(self, message: str, parallel_pair=None):
        super().__init__(message, {"parallel": parallel_pair})


class NotAssociative(ContextDbError):
    code = "not-associative"

    def __init__(self, op: str):
        super().__init__(
            f"aggregate {op!r} is not associative; nested rewriting refused",
            {"op": op},
        )


class NoMatch(ContextDbError):
    code = "no-match"


class EqualityViolation(ContextDbError):
    code = "equality-violation"

    def __init__(self, lhs: str, rhs: str, witnesses):
        super().__init__(
            f"parallel expressions {lhs} and {rhs} disagree on keys {sorted(witnesses, key=repr)[:10]}",
            {"lhs": lhs, "rhs": rhs, "witnesses": list(witnesses)[:10]},
        )
        self.witnesses = list(witnesses)[:10]


class NotRefined(ContextDbError):
    code = "not-refined"


class KeyViolation(ContextDbError):
    code = "key-violation"

    def __init__(self, duplicates):
        super().__init__(f"duplicate key values: {duplicates}", {"duplicates": duplicates})
        self.duplicates = duplicates


class UnbackedEdge(ContextDbError):
    code = "unbacked-edge"

    def __init__(self, label: str):
        super().__init__(f"edge {label!r} has no relational backing", {"label": label})


class NoCandidateKey(ContextDbError):
    code = "no-candidate-key"


class DomainMismatch(ContextDbError):
    code = "domain-mismatch"


class DivisionByZero(ContextDbError):
    code = "division-by-zero"

    def __init__(self, key):
        super().__init__(f"division by zero at key {key!r}", {"key": key})
