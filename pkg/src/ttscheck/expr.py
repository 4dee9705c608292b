"""Expression language shared by guards, actions and event predicates.

Atoms are bare identifiers resolved against the declaring model: boolean or
bounded-integer variables, places (meaning "place holds a token") and, in
predicate position only, transition names.  Operators: `!`, `&`, `|`,
comparisons (`=`, `!=`, `<`, `<=`, `>`, `>=`) and integer `+`/`-`.
Actions are `;`-separated assignments, optionally guarded with
`if <cond> then <assign>`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Union

Value = Union[bool, int]


class ExprError(ValueError):
    """Raised on syntax or scoping errors, with a human-readable position."""


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:/\d+|\.\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|<=|>=|!=|=>|<|>|=|\+|-|!|&|\||\(|\)|\[|\]|\{|\}|,|;)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "num" | "name" | "op" | "end"
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ExprError(f"unexpected character {text[i]!r} at column {i + 1}")
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup or "op", m.group(), i))
        i = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class Unary:
    op: str  # "!" | "-"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # "|", "&", "=", "!=", "<", "<=", ">", ">=", "+", "-"
    left: "Expr"
    right: "Expr"


Expr = Union[Lit, Name, Unary, Binary]


@dataclass(frozen=True)
class Assign:
    """`target := expr`, optionally guarded by `cond` (None = unconditional)."""

    target: str
    expr: Expr
    cond: Optional[Expr] = None


# ---------------------------------------------------------------------------
# Parser (precedence climbing: | < & < ! < comparison < additive < atom)

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            raise ExprError(f"expected {text!r} but found {tok.text!r} at column {tok.pos + 1}")
        return tok

    def at_end(self) -> bool:
        return self.peek().kind == "end"

    # expression grammar ----------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.peek().text == "|":
            self.next()
            left = Binary("|", left, self.parse_and())
        return left

    def parse_and(self) -> Expr:
        left = self.parse_not()
        while self.peek().text == "&":
            self.next()
            left = Binary("&", left, self.parse_not())
        return left

    def parse_not(self) -> Expr:
        if self.peek().text == "!":
            self.next()
            return Unary("!", self.parse_not())
        return self.parse_cmp()

    def parse_cmp(self) -> Expr:
        left = self.parse_add()
        if self.peek().text in ("=", "!=", "<", "<=", ">", ">="):
            op = self.next().text
            return Binary(op, left, self.parse_add())
        return left

    def parse_add(self) -> Expr:
        left = self.parse_atom()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            left = Binary(op, left, self.parse_atom())
        return left

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.text == "(":
            self.next()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if tok.text == "-":
            self.next()
            return Unary("-", self.parse_atom())
        if tok.kind == "num":
            self.next()
            if "/" in tok.text or "." in tok.text:
                raise ExprError(f"non-integer literal {tok.text!r} not allowed in expressions")
            return Lit(int(tok.text))
        if tok.kind == "name":
            self.next()
            if tok.text == "true":
                return Lit(True)
            if tok.text == "false":
                return Lit(False)
            return Name(tok.text)
        raise ExprError(f"unexpected token {tok.text!r} at column {tok.pos + 1}")

    # actions ---------------------------------------------------------------

    def parse_assign(self) -> Assign:
        cond = None
        if self.peek().text == "if":
            self.next()
            cond = self.parse_expr()
            self.expect("then")
        target = self.next()
        if target.kind != "name":
            raise ExprError(f"expected assignment target, found {target.text!r}")
        self.expect(":=")
        return Assign(target.text, self.parse_expr(), cond)

    def parse_actions(self) -> tuple[Assign, ...]:
        if self.at_end():
            return ()
        out = [self.parse_assign()]
        while self.peek().text == ";":
            self.next()
            if self.at_end():
                break
            out.append(self.parse_assign())
        return tuple(out)


def parse_expr(text: str) -> Expr:
    p = _Parser(tokenize(text))
    e = p.parse_expr()
    if not p.at_end():
        tok = p.peek()
        raise ExprError(f"trailing input {tok.text!r} at column {tok.pos + 1}")
    return e


def parse_actions(text: str) -> tuple[Assign, ...]:
    p = _Parser(tokenize(text))
    acts = p.parse_actions()
    if not p.at_end():
        tok = p.peek()
        raise ExprError(f"trailing input {tok.text!r} at column {tok.pos + 1}")
    return acts


# ---------------------------------------------------------------------------
# Evaluation

@dataclass
class EvalContext:
    """Name resolution environment for expression evaluation.

    `transition` is the fired transition's name when evaluating an event
    predicate, else None (guards never mention transitions).
    """

    marking: dict
    store: dict
    transition: Optional[str] = None


def eval_expr(e: Expr, ctx: EvalContext) -> Value:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Name):
        if e.ident in ctx.store:
            return ctx.store[e.ident]
        if e.ident in ctx.marking:
            return ctx.marking[e.ident] >= 1
        # transition-name atom: true iff it names the fired transition
        return ctx.transition is not None and e.ident == ctx.transition
    if isinstance(e, Unary):
        v = eval_expr(e.operand, ctx)
        return (not v) if e.op == "!" else -v
    if isinstance(e, Binary):
        if e.op == "&":
            return bool(eval_expr(e.left, ctx)) and bool(eval_expr(e.right, ctx))
        if e.op == "|":
            return bool(eval_expr(e.left, ctx)) or bool(eval_expr(e.right, ctx))
        lv, rv = eval_expr(e.left, ctx), eval_expr(e.right, ctx)
        if e.op == "=":
            return lv == rv
        if e.op == "!=":
            return lv != rv
        if e.op == "<":
            return lv < rv
        if e.op == "<=":
            return lv <= rv
        if e.op == ">":
            return lv > rv
        if e.op == ">=":
            return lv >= rv
        if e.op == "+":
            return lv + rv
        if e.op == "-":
            return lv - rv
    raise AssertionError(f"unhandled expression node {e!r}")


def free_names(e: Expr) -> set[str]:
    if isinstance(e, Lit):
        return set()
    if isinstance(e, Name):
        return {e.ident}
    if isinstance(e, Unary):
        return free_names(e.operand)
    if isinstance(e, Binary):
        return free_names(e.left) | free_names(e.right)
    raise AssertionError(f"unhandled expression node {e!r}")


def action_names(acts: tuple[Assign, ...]) -> tuple[set[str], set[str]]:
    """Return (read names, written names) of an action sequence."""
    read: set[str] = set()
    written: set[str] = set()
    for a in acts:
        read |= free_names(a.expr)
        if a.cond is not None:
            read |= free_names(a.cond)
        written.add(a.target)
    return read, written


# ---------------------------------------------------------------------------
# Pretty printing (used by model/pattern serializers and diagnostics)

_PREC = {"|": 1, "&": 2, "!": 3, "=": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5}


def format_expr(e: Expr, parent_prec: int = 0) -> str:
    if isinstance(e, Lit):
        if e.value is True:
            return "true"
        if e.value is False:
            return "false"
        return str(e.value)
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, Unary):
        inner = format_expr(e.operand, _PREC.get("!", 3))
        text = f"{e.op}{inner}"
        return text
    if isinstance(e, Binary):
        prec = _PREC[e.op]
        left = format_expr(e.left, prec)
        right = format_expr(e.right, prec + 1)
        text = f"{left} {e.op} {right}"
        if prec < parent_prec:
            return f"({text})"
        return text
    raise AssertionError(f"unhandled expression node {e!r}")


def format_actions(acts: tuple[Assign, ...]) -> str:
    parts = []
    for a in acts:
        if a.cond is not None:
            parts.append(f"if {format_expr(a.cond)} then {a.target} := {format_expr(a.expr)}")
        else:
            parts.append(f"{a.target} := {format_expr(a.expr)}")
    return "; ".join(parts)


# ---------------------------------------------------------------------------
# Rational literals shared by interval/trace parsers

def parse_rational(text: str) -> Fraction:
    text = text.strip()
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ExprError(f"bad rational literal {text!r}") from exc


def format_rational(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def iter_subexprs(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, Unary):
        yield from iter_subexprs(e.operand)
    elif isinstance(e, Binary):
        yield from iter_subexprs(e.left)
        yield from iter_subexprs(e.right)
