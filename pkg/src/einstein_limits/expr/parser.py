"""Infix expression parser.

Grammar::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right-associative, binds tighter than '*'
    atom    := NUMBER | RATIONAL | IDENT | IDENT '(' expr ')' | '(' expr ')'

``RATIONAL`` is ``INT/INT`` written without whitespace, e.g. ``4/3``.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Container, Iterable, List, NamedTuple, Optional

from .nodes import FUNCTIONS, Add, Const, Coordinate, Expr, Mul, Neg, Parameter, Pow


class ParseError(ValueError):
    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


class Token(NamedTuple):
    kind: str
    text: str
    offset: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<rational>\d+/\d+(?![\d.eE]))
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


_INT_RE = re.compile(r"\d+")


def _binds_tighter(tokens: List[Token]) -> bool:
    if not tokens:
        return False
    if tokens[-1].text in ("/", "^"):
        return True
    return tokens[-1].text == "-" and len(tokens) > 1 and tokens[-2].text == "^"


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind == "rational" and _binds_tighter(tokens):
            # x/4/3 means (x/4)/3 and x^2/10 means (x^2)/10
            m = _INT_RE.match(text, pos)
            kind = "number"
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, coordinates: Container[str], positive: Container[str]):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0
        self.coordinates = coordinates
        self.positive = positive

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind != "op":
            what = "end of input" if self.tok.kind == "eof" else repr(self.tok.text)
            raise ParseError(f"expected {text!r}, found {what}", self.tok.offset, self.text)
        return self.advance()

    def error(self, message: str):
        raise ParseError(message, self.tok.offset, self.text)

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r}")
        return e

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            rhs = self.term()
            terms.append(rhs if op == "+" else Neg(rhs))
        return terms[0] if len(terms) == 1 else Add(terms)

    def term(self) -> Expr:
        factors = [self.unary()]
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            rhs = self.unary()
            factors.append(rhs if op == "*" else Pow(rhs, Const(-1)))
        return factors[0] if len(factors) == 1 else Mul(factors)

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "rational":
            self.advance()
            p, q = t.text.split("/")
            if int(q) == 0:
                raise ParseError("zero denominator in rational literal", t.offset, self.text)
            return Const(Fraction(int(p), int(q)))
        if t.kind == "number":
            self.advance()
            if re.fullmatch(r"\d+", t.text):
                return Const(int(t.text))
            return Const(float(t.text))
        if t.kind == "ident":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                cls = FUNCTIONS.get(t.text)
                if cls is None:
                    raise ParseError(f"unknown function {t.text!r}", t.offset, self.text)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return cls(arg)
            cls = Coordinate if t.text in self.coordinates else Parameter
            return cls(t.text, positive=t.text in self.positive)
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "eof":
            self.error("unexpected end of input")
        self.error(f"unexpected {t.text!r}")


def parse(
    text: str,
    coordinates: Optional[Iterable[str]] = None,
    positive: Optional[Iterable[str]] = None,
) -> Expr:
    """Parse ``text`` into a raw expression tree.

    Identifiers listed in ``coordinates`` become :class:`Coordinate` leaves,
    all others :class:`Parameter` leaves.  Names in ``positive`` are flagged
    as positive, which lets the simplifier distribute fractional powers and
    split logarithms over them.
    """
    return _Parser(text, frozenset(coordinates or ()), frozenset(positive or ())).parse()
