"""Concrete query syntax.

Grammar (whitespace-insensitive)::

    expr  := pair
    pair  := prod ("&" prod)*
    prod  := comp ("*" comp)*
    comp  := atom ("o" atom)*
    atom  := LABEL | LABEL "@" NODE ">" NODE
           | "id" "(" NODE ")" | "tau" "(" NODE ")"
           | "pi" "[" NODE "]" "(" NODE ")"
           | "(" expr ")"
           | atom "/" restr
    restr := "{" literal ("," literal)* "}"
           | "[" pred ("&&" pred)* "]"
    pred  := expr CMP (literal | expr)        CMP in = != < <= > >=
    NODE  := LABEL ("*" LABEL)* | "T"

``g o f`` applies ``f`` first. A bare label is an error when several edges
share it; qualify as ``label@Source>Target``. Traversal queries are either a
bare expression or ``Q(KEY; E1; E2; ...)``; analytic queries are
``analytic(G; M; OP)``.
"""

from __future__ import annotations

import re

from .context import Context, NodeRef, node_from_name
from .errors import (
    AmbiguousEdge,
    KeyMismatch,
    QuerySyntaxError,
    QueryTypeError,
    UnknownEdge,
    UnknownNode,
)
from .expr import (
    Comparison,
    Compose,
    EdgeRef,
    Expression,
    Identity,
    Literal,
    Pair,
    Predicate,
    ProductExpr,
    Projection,
    Restrict,
    Terminal,
    TraversalQueryAst,
    ValueSet,
    source,
    target,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<float>-?\d+\.\d+)
  | (?P<int>-?\d+)
  | (?P<string>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
  | (?P<ident>[A-Za-z_$£][A-Za-z0-9_$£]*)
  | (?P<punct>&&|!=|<=|>=|[()\[\]{}/&*,;@><=])
    """,
    re.VERBOSE,
)


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos

    def __repr__(self):
        return f"{self.kind}:{self.text}@{self.pos}"


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, ctx: Context):
        self.text = text
        self.ctx = ctx
        self.tokens = _tokenize(text)
        self.i = 0

    # -- token plumbing ---------------------------------------------------

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.cur.text == text and self.cur.kind in ("punct", "ident"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Token:
        if self.cur.text != text:
            raise QuerySyntaxError(f"expected {text!r}, found {self.cur.text!r}", self.cur.pos)
        return self.advance()

    def expect_ident(self) -> _Token:
        if self.cur.kind != "ident":
            raise QuerySyntaxError(f"expected a name, found {self.cur.text!r}", self.cur.pos)
        return self.advance()

    # -- grammar ------------------------------------------------------------

    def parse_expression(self) -> Expression:
        expr = self.pair()
        return expr

    def pair(self) -> Expression:
        members = [self.prod()]
        while self.accept("&"):
            members.append(self.prod())
        if len(members) == 1:
            return members[0]
        expr = Pair(tuple(members))
        source(expr)  # raises KeyMismatch on inconsistent sources
        return expr

    def prod(self) -> Expression:
        members = [self.comp()]
        while self.accept("*"):
            members.append(self.comp())
        if len(members) == 1:
            return members[0]
        return ProductExpr(tuple(members))

    def comp(self) -> Expression:
        expr = self.atom()
        while self.cur.kind == "ident" and self.cur.text == "o":
            pos = self.cur.pos
            self.advance()
            inner = self.atom()
            t_in, s_out = target(inner), source(expr)
            if t_in != s_out:
                raise QueryTypeError(
                    f"cannot compose at position {pos}: target of inner is "
                    f"{t_in.name} but source of outer is {s_out.name}"
                )
            expr = Compose(expr, inner)
        return expr

    def atom(self) -> Expression:
        tok = self.cur
        if tok.text == "(":
            self.advance()
            expr = self.parse_expression()
            self.expect(")")
        elif tok.kind == "ident" and tok.text == "id" and self.tokens[self.i + 1].text == "(":
            self.advance()
            self.expect("(")
            expr = Identity(self.node())
            self.expect(")")
        elif tok.kind == "ident" and tok.text == "tau" and self.tokens[self.i + 1].text == "(":
            self.advance()
            self.expect("(")
            expr = Terminal(self.node())
            self.expect(")")
        elif tok.kind == "ident" and tok.text == "pi" and self.tokens[self.i + 1].text == "[":
            self.advance()
            self.expect("[")
            prod_node = self.node()
            self.expect("]")
            self.expect("(")
            sub = self.node()
            self.expect(")")
            if not prod_node.sub_product(sub):
                raise QueryTypeError(
                    f"{sub.name} is not a proper sub-product of {prod_node.name}"
                )
            expr = Projection(prod_node, sub)
        elif tok.kind == "ident":
            expr = self.edge_ref()
        else:
            raise QuerySyntaxError(f"expected an expression, found {tok.text!r}", tok.pos)
        while self.cur.text == "/" and self.tokens[self.i + 1].text in ("{", "["):
            self.advance()
            expr = Restrict(expr, self.restriction(source(expr)))
        return expr

    def node(self) -> NodeRef:
        names = [self.expect_ident().text]
        while self.accept("*"):
            names.append(self.expect_ident().text)
        node = node_from_name("*".join(names)) if len(names) == 1 else NodeRef(tuple(names))
        if not self.ctx.usable_node(node):
            raise UnknownNode(node.name)
        return node

    def edge_ref(self) -> EdgeRef:
        label = self.expect_ident().text
        if self.accept("@"):
            src = self.node()
            self.expect(">")
            tgt = self.node()
            for e in self.ctx.edges_by_label(label):
                if e.source == src and e.target == tgt:
                    return EdgeRef(e, qualified=True)
            raise UnknownEdge(f"{label}@{src.name}>{tgt.name}")
        candidates = self.ctx.edges_by_label(label)
        if not candidates:
            raise UnknownEdge(label)
        if len(candidates) > 1:
            raise AmbiguousEdge(label, [e.key for e in candidates])
        return EdgeRef(candidates[0])

    def restriction(self, restricted: NodeRef):
        if self.accept("{"):
            values = [self.literal().value]
            while self.accept(","):
                values.append(self.literal().value)
            self.expect("}")
            return ValueSet(frozenset(values))
        self.expect("[")
        comparisons = [self.comparison(restricted)]
        while self.accept("&&"):
            comparisons.append(self.comparison(restricted))
        self.expect("]")
        return Predicate(tuple(comparisons))

    def comparison(self, restricted: NodeRef) -> Comparison:
        lhs = self.parse_expression()
        if source(lhs) != restricted:
            raise QueryTypeError(
                f"predicate operand {self.text!r} must start at the restricted node "
                f"{restricted.name}, not {source(lhs).name}"
            )
        op_tok = self.advance()
        if op_tok.text not in ("=", "!=", "<", "<=", ">", ">="):
            raise QuerySyntaxError(f"expected a comparison operator, found {op_tok.text!r}", op_tok.pos)
        if self.cur.kind in ("int", "float", "string"):
            rhs = self.literal()
        else:
            rhs = self.parse_expression()
            if source(rhs) != restricted:
                raise QueryTypeError(
                    f"predicate operand must start at the restricted node {restricted.name}"
                )
        return Comparison(lhs, op_tok.text, rhs)

    def literal(self) -> Literal:
        tok = self.advance()
        if tok.kind == "int":
            return Literal(int(tok.text))
        if tok.kind == "float":
            return Literal(float(tok.text))
        if tok.kind == "string":
            body = tok.text[1:-1]
            return Literal(body.replace('\\"', '"').replace("\\'", "'"))
        raise QuerySyntaxError(f"expected a literal, found {tok.text!r}", tok.pos)

    def finish(self) -> None:
        if self.cur.kind != "eof":
            raise QuerySyntaxError(f"trailing input {self.cur.text!r}", self.cur.pos)


def parse_expression(text: str, ctx: Context) -> Expression:
    p = _Parser(text, ctx)
    expr = p.parse_expression()
    p.finish()
    return expr


def parse_traversal(text: str, ctx: Context) -> TraversalQueryAst:
    """``Q(KEY; E1; E2; ...)`` or a bare (possibly paired) expression."""
    p = _Parser(text, ctx)
    if p.cur.kind == "ident" and p.cur.text == "Q" and p.tokens[p.i + 1].text == "(":
        p.advance()
        p.expect("(")
        key = p.node()
        exprs = []
        while p.accept(";"):
            exprs.append(p.parse_expression())
        p.expect(")")
        p.finish()
        if not exprs:
            raise QuerySyntaxError("a traversal query needs at least one expression", 0)
        bad = sorted({source(e).name for e in exprs if source(e) != key})
        if bad:
            raise KeyMismatch([key.name] + bad)
        return TraversalQueryAst(key, tuple(exprs))
    expr = p.parse_expression()
    p.finish()
    if isinstance(expr, Pair):
        return TraversalQueryAst(source(expr), expr.members)
    return TraversalQueryAst(source(expr), (expr,))


def parse_analytic(text: str, ctx: Context):
    """``analytic(G; M; OP)``; returns an AnalyticQueryAst."""
    from .analytic import make_analytic  # deferred: analytic imports expr only

    p = _Parser(text, ctx)
    if not (p.cur.kind == "ident" and p.cur.text == "analytic"):
        raise QuerySyntaxError("expected 'analytic(...)'", p.cur.pos)
    p.advance()
    p.expect("(")
    start = p.cur.pos
    depth = 0
    parts, part_start = [], start
    while not (p.cur.kind == "eof"):
        tok = p.cur
        if tok.text == "(" or tok.text == "[" or tok.text == "{":
            depth += 1
        elif tok.text == ")" or tok.text == "]" or tok.text == "}":
            if depth == 0 and tok.text == ")":
                parts.append(p.text[part_start : tok.pos])
                p.advance()
                break
            depth -= 1
        elif tok.text == ";" and depth == 0:
            parts.append(p.text[part_start : tok.pos])
            p.advance()
            part_start = p.cur.pos
            continue
        p.advance()
    else:
        raise QuerySyntaxError("unterminated analytic(...)", start)
    p.finish()
    if len(parts) != 3:
        raise QuerySyntaxError("analytic takes exactly three parts: grouping; measuring; op", start)
    g = parse_traversal(parts[0].strip(), ctx)
    m = parse_traversal(parts[1].strip(), ctx)
    return make_analytic(g, m, parts[2].strip(), ctx)
