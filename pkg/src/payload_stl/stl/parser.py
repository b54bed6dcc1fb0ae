"""Recursive-descent parser for the textual spec format.

Grammar (whitespace-insensitive, times in seconds)::

    formula   := unary ('and' unary)*
    unary     := 'not' unary | primary
    primary   := 'true' | '(' formula ')' | temporal | predicate
    temporal  := ('F' | 'G') interval '(' formula ')'
               | 'U' interval '(' formula ',' formula ')'
    interval  := '[' number ',' number ']'
    predicate := 'ball' '(' 'r0' ',' vector [',' 'inf'] ')' '<=' number
               | 'box' '(' 'r0' ',' number ')'
               | 'affine' '(' 'r0' ',' vector ',' number ')'
    vector    := '[' number ',' number ',' number ']'

``box(r0, S)`` is the cuboid of side 2S centred at the origin; ``affine``
holds when ``a . r0 + c >= 0``. ``&``/``&&`` and ``!``/``~`` are accepted
as spellings of ``and``/``not``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .formula import (
    Affine,
    Always,
    And,
    Ball,
    Eventually,
    Formula,
    Not,
    Pred,
    TrueF,
    Until,
    check_fragment,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass
class Token:
    kind: str  # NUM, ID, OP, EOF
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|&&|[\[\](),&!~])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "ws":
            nl = s.count("\n")
            if nl:
                line += nl
                line_start = pos + s.rfind("\n") + 1
        else:
            tokens.append(Token(kind.upper(), s, line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.column)

    def accept(self, *texts: str) -> Token | None:
        if self.tok.text in texts and self.tok.kind in ("ID", "OP"):
            tok = self.tok
            self.i += 1
            return tok
        return None

    def expect(self, *texts: str) -> Token:
        tok = self.accept(*texts)
        if tok is None:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {' or '.join(repr(t) for t in texts)}, found {found!r}")
        return tok

    def number(self) -> float:
        tok = self.tok
        if tok.kind != "NUM":
            raise self.error(f"expected a number, found {tok.text or 'end of input'!r}")
        self.i += 1
        return float(tok.text)

    def vector(self) -> tuple[float, float, float]:
        self.expect("[")
        xs = [self.number()]
        while self.accept(","):
            xs.append(self.number())
        close = self.expect("]")
        if len(xs) != 3:
            raise self.error(f"expected 3 components, got {len(xs)}", close)
        return tuple(xs)

    def interval(self) -> tuple[float, float]:
        open_tok = self.expect("[")
        a = self.number()
        self.expect(",")
        b = self.number()
        self.expect("]")
        if not 0 <= a <= b:
            raise self.error(f"interval must satisfy 0 <= a <= b, got [{a}, {b}]", open_tok)
        return a, b

    # grammar ---------------------------------------------------------------

    def formula(self) -> Formula:
        node = self.unary()
        while self.accept("and", "&", "&&"):
            node = And(node, self.unary())
        return node

    def unary(self) -> Formula:
        if self.accept("not", "!", "~"):
            return Not(self.unary())
        return self.primary()

    def primary(self) -> Formula:
        tok = self.tok
        if self.accept("true"):
            return TrueF()
        if self.accept("("):
            node = self.formula()
            self.expect(")")
            return node
        if self.accept("F", "G"):
            a, b = self.interval()
            self.expect("(")
            child = self.formula()
            self.expect(")")
            return Eventually(a, b, child) if tok.text == "F" else Always(a, b, child)
        if self.accept("U"):
            a, b = self.interval()
            self.expect("(")
            left = self.formula()
            self.expect(",")
            right = self.formula()
            self.expect(")")
            return Until(a, b, left, right)
        if self.accept("ball"):
            self.expect("(")
            self.expect("r0")
            self.expect(",")
            center = self.vector()
            norm = "euclidean"
            if self.accept(","):
                self.expect("inf")
                norm = "infinity"
            self.expect(")")
            self.expect("<=")
            radius_tok = self.tok
            radius = self.number()
            if radius <= 0:
                raise self.error("radius must be positive", radius_tok)
            return Pred(Ball(center, radius, norm))
        if self.accept("box"):
            self.expect("(")
            self.expect("r0")
            self.expect(",")
            side_tok = self.tok
            half = self.number()
            if half <= 0:
                raise self.error("box half-side must be positive", side_tok)
            self.expect(")")
            return Pred(Ball((0.0, 0.0, 0.0), half, "infinity"))
        if self.accept("affine"):
            self.expect("(")
            self.expect("r0")
            self.expect(",")
            a = self.vector()
            self.expect(",")
            c = self.number()
            self.expect(")")
            return Pred(Affine(a, c))
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")


def parse_spec(text: str, strict: bool = True) -> Formula:
    """Parse spec text into a formula tree.

    With ``strict`` (the default) the result must also lie in the supported
    fragment; otherwise any well-formed tree is returned.
    """
    p = _Parser(text)
    node = p.formula()
    if p.tok.kind != "EOF":
        raise p.error(f"unexpected trailing input {p.tok.text!r}")
    if strict:
        check_fragment(node)
    return node
