"""Minimal arithmetic expression language for config strings.

Grammar (``^`` and ``**`` are both power, right associative)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom (("^" | "**") unary)?
    atom   := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

Functions: ``ln`` (alias ``log``), ``exp``, ``sqrt``.  Constants: ``pi``,
``e``.  Any other name is a free variable bound at evaluation time, e.g.
``s, t`` for nonlinearities, ``x, y`` for coefficient fields and ``s_F,
S_F, lambda`` for parameter specs.

Evaluation is numpy-vectorized and works on complex input, which the
nonlinearity module uses for complex-step derivatives.
"""
import re

import numpy as np

__all__ = ["Expression", "ExpressionError", "parse"]


class ExpressionError(ValueError):
    pass


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)

_FUNCTIONS = {
    "ln": np.log,
    "log": np.log,
    "exp": np.exp,
    "sqrt": np.sqrt,
}
_CONSTANTS = {"pi": np.pi, "e": np.e}


def _tokenize(text):
    pos = 0
    tokens = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = len(text) - len(text[pos:].lstrip())
            raise ExpressionError(f"unexpected character {text[col]!r} at column {col + 1} in {text!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.names = set()

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            self.fail(f"expected {value!r}")
        self.i += 1
        return tok

    def fail(self, msg):
        kind, val, col = self.peek()
        where = "end of input" if kind == "end" else repr(val)
        raise ExpressionError(f"{msg} at column {col + 1} ({where}) in {self.text!r}")

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail("unexpected token")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def unary(self):
        op = self.peek()[1]
        if op == "-":
            self.take()
            return ("neg", self.unary())
        if op == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return ("pow", base, self.unary())
        return base

    def atom(self):
        kind, val, _ = self.peek()
        if kind == "num":
            self.take()
            return ("num", float(val))
        if kind == "name":
            self.take()
            if self.peek()[1] == "(":
                if val not in _FUNCTIONS:
                    self.fail(f"unknown function {val!r}")
                self.take("(")
                arg = self.expr()
                self.take(")")
                return ("call", val, arg)
            if val in _FUNCTIONS:
                self.fail(f"function {val!r} needs an argument")
            if val in _CONSTANTS:
                return ("num", _CONSTANTS[val])
            self.names.add(val)
            return ("var", val)
        if val == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        self.fail("expected a number, name or '('")


_BINARY = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}


def _power(a, b):
    # integer exponents go through repeated multiplication so negative
    # bases stay real
    if np.ndim(b) == 0 and float(np.real(b)) == int(np.real(b)) and np.imag(b) == 0:
        return a ** int(np.real(b))
    return a ** b


def _evaluate(node, env):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        return env[node[1]]
    if kind == "neg":
        return -_evaluate(node[1], env)
    if kind == "call":
        return _FUNCTIONS[node[1]](_evaluate(node[2], env))
    if kind == "pow":
        return _power(_evaluate(node[1], env), _evaluate(node[2], env))
    return _BINARY[kind](_evaluate(node[1], env), _evaluate(node[2], env))


class Expression:
    """A parsed expression; call with keyword bindings for its variables."""

    def __init__(self, text):
        parser = _Parser(text)
        self.text = text
        self._tree = parser.parse()
        self.variables = frozenset(parser.names)

    def __call__(self, **env):
        missing = self.variables - env.keys()
        if missing:
            raise ExpressionError(
                f"unbound variable(s) {', '.join(sorted(missing))} in {self.text!r}")
        with np.errstate(all="ignore"):
            return _evaluate(self._tree, env)

    def check_variables(self, allowed):
        extra = self.variables - set(allowed)
        if extra:
            raise ExpressionError(
                f"unknown variable(s) {', '.join(sorted(extra))} in {self.text!r}; "
                f"allowed: {', '.join(sorted(allowed))}")
        return self

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse(text):
    return Expression(text)
