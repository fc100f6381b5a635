"""
Recursive descent parser for coefficient formulas.

Grammar, lowest precedence first:

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := number | 'x' | 't' | ident '(' expr ')' | '(' expr ')'

'^' is right associative and binds tighter than unary minus, so
"-x^2" is -(x^2) and "x^3^2" is x^9. There is no implicit
multiplication: "2x" is a syntax error.
"""

import re
import math
from typing import NamedTuple

from modules.expr.errors import ExprSyntaxError, UnknownIdentifierError
from modules.expr.nodes import FUNCTIONS, VARIABLES, Num, Var, Neg, BinOp, Call

TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)


class Token(NamedTuple):
    kind: str
    text: str
    pos: int


def tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        match = TOKEN_RE.match(source, pos)
        if match is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        if match.lastgroup != "ws":
            tokens.append(Token(match.lastgroup, match.group(), pos))
        pos = match.end()
    tokens.append(Token("eof", "", len(source)))
    return tokens


class Parser:
    def __init__(self, source):
        self.source = source
        self.tokens = tokenize(source)
        self.index = 0

    @property
    def current(self):
        return self.tokens[self.index]

    def advance(self):
        token = self.current
        self.index += 1
        return token

    def expect(self, text):
        token = self.current
        if token.text != text:
            found = repr(token.text) if token.kind != "eof" else "end of input"
            raise ExprSyntaxError(f"unexpected {found}", token.pos, expected=repr(text))
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.current.kind != "eof":
            raise ExprSyntaxError(
                f"unexpected {self.current.text!r}", self.current.pos,
                expected="operator or end of input"
            )
        return node

    def expr(self):
        node = self.term()
        while self.current.text in ("+", "-"):
            op = self.advance().text
            right = self.term()
            node = BinOp(op, node, right, (node.span[0], right.span[1]))
        return node

    def term(self):
        node = self.unary()
        while self.current.text in ("*", "/"):
            op = self.advance().text
            right = self.unary()
            node = BinOp(op, node, right, (node.span[0], right.span[1]))
        return node

    def unary(self):
        if self.current.text == "-":
            start = self.advance().pos
            operand = self.unary()
            return Neg(operand, (start, operand.span[1]))
        return self.power()

    def power(self):
        base = self.primary()
        if self.current.text == "^":
            self.advance()
            exponent = self.unary()
            return BinOp("^", base, exponent, (base.span[0], exponent.span[1]))
        return base

    def primary(self):
        token = self.current
        if token.kind == "number":
            self.advance()
            value = float(token.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"number {token.text} out of range", token.pos)
            return Num(value, (token.pos, token.pos + len(token.text)))
        if token.kind == "ident":
            self.advance()
            if token.text in VARIABLES:
                return Var(token.text, (token.pos, token.pos + len(token.text)))
            if token.text not in FUNCTIONS:
                raise UnknownIdentifierError(token.text, token.pos)
            self.expect("(")
            arg = self.expr()
            close = self.expect(")")
            return Call(token.text, arg, (token.pos, close.pos + 1))
        if token.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if token.kind == "eof" else repr(token.text)
        raise ExprSyntaxError(f"unexpected {found}", token.pos, expected="number, variable, function or '('")


def parse(source):
    if not isinstance(source, str):
        raise ExprSyntaxError(f"formula must be text, got {type(source).__name__}", 0)
    return Parser(source).parse()


def derivative(expr, var="x"):
    return expr.derivative(var)


def compile_formula(source):
    """Parse a formula and return it as a vectorised f(x, t)."""
    return parse(source).as_function()
