"""Minimal SELECT grammar used by gateway rules.

    stmt       := "SELECT" proj "FROM" quoted_topic_filter ["WHERE" expr]
    proj       := "*" | ident {"," ident}
    expr       := term {("AND"|"OR") term}
    term       := ["NOT"] (comparison | "(" expr ")")
    comparison := ident op literal
    op         := "=" | "!=" | "<" | "<=" | ">" | ">="
    literal    := number | quoted string | "true" | "false"

Errors carry the byte offset where parsing failed.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union


class SelectSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvaluationError(ValueError):
    """Predicate referenced a field the message does not carry, or compared
    incompatible types."""


@dataclass(frozen=True)
class Comparison:
    field: str
    op: str
    literal: Union[int, float, str, bool]


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # "AND" | "OR"
    left: "Expr"
    right: "Expr"


Expr = Union[Comparison, Not, BoolOp]


@dataclass(frozen=True)
class SelectStatement:
    projection: Optional[tuple[str, ...]]  # None means *
    topic_filter: str
    where: Optional[Expr]


_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<number>-?\d+(?:\.\d+)?)
      | (?P<string>'[^']*'|"[^"]*")
      | (?P<op><=|>=|!=|=|<|>)
      | (?P<punct>[*,()])
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    )""",
    re.VERBOSE,
)

_KEYWORDS = {"SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "TRUE", "FALSE"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            off = len(text) - len(stripped)
            raise SelectSyntaxError(f"unexpected character {stripped[0]!r}", off)
        kind = m.lastgroup
        tok = m.group(kind)
        off = m.end() - len(tok)
        if kind == "ident" and tok.upper() in _KEYWORDS:
            kind = "keyword"
            tok = tok.upper()
        tokens.append(_Token(kind, tok, off))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect_keyword(self, kw: str) -> _Token:
        t = self.peek()
        if t.kind != "keyword" or t.text != kw:
            raise SelectSyntaxError(f"expected {kw}", t.offset)
        return self.next()

    def parse(self) -> SelectStatement:
        self.expect_keyword("SELECT")
        projection = self.parse_projection()
        self.expect_keyword("FROM")
        t = self.peek()
        if t.kind != "string":
            raise SelectSyntaxError("expected quoted topic filter", t.offset)
        topic_filter = self.next().text[1:-1]
        where = None
        if self.peek().kind == "keyword" and self.peek().text == "WHERE":
            self.next()
            where = self.parse_expr()
        t = self.peek()
        if t.kind != "eof":
            raise SelectSyntaxError(f"trailing input {t.text!r}", t.offset)
        return SelectStatement(projection, topic_filter, where)

    def parse_projection(self) -> Optional[tuple[str, ...]]:
        t = self.peek()
        if t.kind == "punct" and t.text == "*":
            self.next()
            return None
        fields = []
        while True:
            t = self.peek()
            if t.kind != "ident":
                raise SelectSyntaxError("expected field name", t.offset)
            fields.append(self.next().text)
            t = self.peek()
            if t.kind == "punct" and t.text == ",":
                self.next()
                continue
            break
        return tuple(fields)

    def parse_expr(self) -> Expr:
        left = self.parse_term()
        while self.peek().kind == "keyword" and self.peek().text in ("AND", "OR"):
            op = self.next().text
            right = self.parse_term()
            left = BoolOp(op, left, right)
        return left

    def parse_term(self) -> Expr:
        t = self.peek()
        if t.kind == "keyword" and t.text == "NOT":
            self.next()
            return Not(self.parse_term())
        if t.kind == "punct" and t.text == "(":
            self.next()
            inner = self.parse_expr()
            close = self.peek()
            if close.kind != "punct" or close.text != ")":
                raise SelectSyntaxError("expected )", close.offset)
            self.next()
            return inner
        return self.parse_comparison()

    def parse_comparison(self) -> Comparison:
        t = self.peek()
        if t.kind != "ident":
            raise SelectSyntaxError("expected field name", t.offset)
        field = self.next().text
        t = self.peek()
        if t.kind != "op":
            raise SelectSyntaxError("expected comparison operator", t.offset)
        op = self.next().text
        return Comparison(field, op, self.parse_literal())

    def parse_literal(self) -> Union[int, float, str, bool]:
        t = self.peek()
        if t.kind == "number":
            self.next()
            return float(t.text) if "." in t.text else int(t.text)
        if t.kind == "string":
            self.next()
            return t.text[1:-1]
        if t.kind == "keyword" and t.text in ("TRUE", "FALSE"):
            self.next()
            return t.text == "TRUE"
        raise SelectSyntaxError("expected literal", t.offset)


def parse_select(text: str) -> SelectStatement:
    return _Parser(text).parse()


_OPS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _eval_comparison(c: Comparison, message: dict) -> bool:
    if c.field not in message:
        raise EvaluationError(f"message has no field {c.field!r}")
    value = message[c.field]
    lit = c.literal
    numeric = isinstance(value, (int, float)) and not isinstance(value, bool)
    lit_numeric = isinstance(lit, (int, float)) and not isinstance(lit, bool)
    if numeric != lit_numeric or isinstance(value, str) != isinstance(lit, str) \
            or isinstance(value, bool) != isinstance(lit, bool):
        if c.op in ("=", "!="):
            return c.op == "!="
        raise EvaluationError(
            f"cannot compare field {c.field!r} ({type(value).__name__}) with "
            f"{type(lit).__name__} literal"
        )
    return _OPS[c.op](value, lit)


def evaluate_where(expr: Optional[Expr], message: dict) -> bool:
    if expr is None:
        return True
    if isinstance(expr, Comparison):
        return _eval_comparison(expr, message)
    if isinstance(expr, Not):
        return not evaluate_where(expr.operand, message)
    if isinstance(expr, BoolOp):
        if expr.op == "AND":
            return evaluate_where(expr.left, message) and evaluate_where(expr.right, message)
        return evaluate_where(expr.left, message) or evaluate_where(expr.right, message)
    raise TypeError(f"unknown expression node {expr!r}")


def project(stmt: SelectStatement, message: dict) -> dict:
    """Apply the projection; output carries exactly the projected fields."""
    if stmt.projection is None:
        return dict(message)
    out = {}
    for f in stmt.projection:
        if f not in message:
            raise EvaluationError(f"message has no field {f!r}")
        out[f] = message[f]
    return out
