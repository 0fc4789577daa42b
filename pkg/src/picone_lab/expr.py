"""A tiny arithmetic grammar for coefficient expressions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | VAR | 'pi' | FUNC '(' expr ')' | '(' expr ')'

``FUNC`` is one of ``cos``, ``sin``, ``exp``, ``log``. Exponentiation is right
associative and binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.
Expressions are compiled once and evaluated on numpy arrays.
"""

import re

import numpy as np

from .errors import DomainError, ExpressionError

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)

FUNCTIONS = ("cos", "sin", "exp", "log")


def _tokenize(text):
    pos = 0
    tokens = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionError(f"unexpected character {text[pos:].strip()[:1]!r} at position {pos} in {text!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, variable):
        self.text = text
        self.variable = variable
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, msg):
        _, value, pos = self.peek()
        raise ExpressionError(f"{msg} at position {pos} (found {value or 'end of input'!r}) in {self.text!r}")

    def expect(self, value):
        if self.peek()[1] != value:
            self.fail(f"expected {value!r}")
        self.take()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail("unexpected token")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = (op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return ("neg", self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return ("^", base, self.unary())
        return base

    def atom(self):
        kind, value, _ = self.peek()
        if kind == "num":
            self.take()
            return ("num", float(value))
        if kind == "name":
            self.take()
            if value == self.variable:
                return ("var",)
            if value == "pi":
                return ("num", np.pi)
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("call", value, arg)
            self.i -= 1
            self.fail(f"unknown name {value!r}")
        if value == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        self.fail("expected a number, variable, function or '('")


def _offending(mask, x):
    idx = np.flatnonzero(np.broadcast_to(mask, np.shape(x) if np.ndim(x) else mask.shape))
    first = int(idx[0]) if idx.size else None
    xv = None
    if first is not None and np.ndim(x):
        xv = float(np.asarray(x).ravel()[first])
    return first, xv


class Expression:
    """A compiled coefficient expression in one variable."""

    def __init__(self, text, variable="x"):
        if not isinstance(text, str):
            text = repr(float(text))
        self.text = text
        self.variable = variable
        self._tree = _Parser(text, variable).parse()

    def __repr__(self):
        return f"Expression({self.text!r})"

    @property
    def is_constant(self):
        def walk(node):
            if node[0] == "var":
                return False
            return all(walk(c) for c in node[1:] if isinstance(c, tuple))

        return walk(self._tree)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = self._eval(self._tree, x)
        out = np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()
        bad = ~np.isfinite(out)
        if bad.any():
            node, xv = _offending(bad, x)
            raise DomainError(f"expression {self.text!r} is not finite at node {node} (x={xv!r})", node=node, x=xv)
        return out if out.ndim else float(out)

    def _eval(self, node, x):
        tag = node[0]
        if tag == "num":
            return node[1]
        if tag == "var":
            return x
        if tag == "neg":
            return -self._eval(node[1], x)
        if tag == "call":
            arg = np.asarray(self._eval(node[2], x), dtype=float)
            if node[1] == "log":
                bad = arg <= 0
                if np.any(bad):
                    n, xv = _offending(np.asarray(bad), x)
                    raise DomainError(f"log of a non-positive value in {self.text!r} at node {n} (x={xv!r})", node=n, x=xv)
                return np.log(arg)
            return getattr(np, node[1])(arg)
        left = np.asarray(self._eval(node[1], x), dtype=float)
        right = np.asarray(self._eval(node[2], x), dtype=float)
        if tag == "+":
            return left + right
        if tag == "-":
            return left - right
        if tag == "*":
            return left * right
        if tag == "/":
            bad = right == 0
            if np.any(bad):
                n, xv = _offending(np.asarray(bad), x)
                raise DomainError(f"division by zero in {self.text!r} at node {n} (x={xv!r})", node=n, x=xv)
            return left / right
        if tag == "^":
            return np.power(left, right)
        raise AssertionError(tag)


def parse(text, variable="x"):
    return Expression(text, variable)


def constant(text):
    """Evaluate a constant expression such as ``-pi/2``."""
    e = text if isinstance(text, Expression) else Expression(text)
    if not e.is_constant:
        raise ExpressionError(f"expected a constant expression, got {e.text!r}")
    return float(e(0.0))
