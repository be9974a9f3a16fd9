"""Arithmetic expression parser for user-defined fields and shift shapes.

Grammar: numbers, identifiers, binary + - * / ^ (with ^ right-associative and
binding tighter than unary minus), 1-argument functions, parentheses. The
variables a given expression may use are fixed by the caller: fields see
``x`` and ``lambda``, shift shapes see ``s``, coefficient curves see
``lambda`` alone. ``pi`` and ``e`` are predefined constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import ExpressionError

__all__ = [
    "parse",
    "compile_expression",
    "free_variables",
    "parse_expression",
    "field_from_expression",
    "shape_from_expression",
    "coefficient_from_expression",
    "FUNCTIONS",
    "CONSTANTS",
]

FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "tanh": math.tanh,
    "cosh": math.cosh,
    "sinh": math.sinh,
    "sqrt": math.sqrt,
    "exp": math.exp,
    "log": math.log,
    "abs": abs,
}

CONSTANTS = {"pi": math.pi, "e": math.e}


# AST nodes: ("num", v) | ("var", name) | ("neg", a) | ("bin", op, a, b) | ("call", name, a)


@dataclass(frozen=True)
class _Token:
    kind: str  # num ident op lparen rparen end
    text: str
    column: int  # 1-based
    value: float = 0.0


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        col = i + 1
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    while k < n and text[k].isdigit():
                        k += 1
                    j = k
            lit = text[i:j]
            try:
                val = float(lit)
            except ValueError:
                raise ExpressionError(f"bad number literal {lit!r}", col)
            tokens.append(_Token("num", lit, col, val))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], col))
            i = j
        elif ch in "+-*/^":
            tokens.append(_Token("op", ch, col))
            i += 1
        elif ch == "(":
            tokens.append(_Token("lparen", ch, col))
            i += 1
        elif ch == ")":
            tokens.append(_Token("rparen", ch, col))
            i += 1
        elif ch == ",":
            tokens.append(_Token("comma", ch, col))
            i += 1
        else:
            raise ExpressionError(f"unexpected character {ch!r}", col)
    tokens.append(_Token("end", "", n + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ExpressionError(f"expected {what}", tok.column)
        return self.advance()

    # sum := product (('+'|'-') product)*
    def parse_sum(self):
        node = self.parse_product()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = ("bin", op, node, self.parse_product())
        return node

    # product := unary (('*'|'/') unary)*
    def parse_product(self):
        node = self.parse_unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = ("bin", op, node, self.parse_unary())
        return node

    # unary := '-' unary | power
    def parse_unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return ("neg", self.parse_unary())
        if tok.kind == "op" and tok.text == "+":
            self.advance()
            return self.parse_unary()
        return self.parse_power()

    # power := atom ('^' unary)?   (right-assoc, binds above unary minus on the exponent)
    def parse_power(self):
        base = self.parse_atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            return ("bin", "^", base, self.parse_unary())
        return base

    def parse_atom(self):
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return ("num", tok.value)
        if tok.kind == "ident":
            self.advance()
            if self.peek().kind == "lparen":
                if tok.text not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {tok.text!r}", tok.column)
                self.advance()
                arg = self.parse_sum()
                if self.peek().kind == "comma":
                    raise ExpressionError(
                        f"function {tok.text!r} takes exactly 1 argument", self.peek().column
                    )
                self.expect("rparen", "')'")
                return ("call", tok.text, arg)
            return ("var", tok.text)
        if tok.kind == "lparen":
            self.advance()
            node = self.parse_sum()
            self.expect("rparen", "')'")
            return node
        raise ExpressionError("expected a number, name, or '('", tok.column)

    def parse(self):
        node = self.parse_sum()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected {tok.text!r}", tok.column)
        return node


def parse(text: str):
    """Parse to an AST; raises ExpressionError with a 1-based column."""
    if not text or not text.strip():
        raise ExpressionError("empty expression", 1)
    return _Parser(_tokenize(text)).parse()


def free_variables(node) -> set[str]:
    kind = node[0]
    if kind == "num":
        return set()
    if kind == "var":
        return set() if node[1] in CONSTANTS else {node[1]}
    if kind == "neg":
        return free_variables(node[1])
    if kind == "bin":
        return free_variables(node[2]) | free_variables(node[3])
    if kind == "call":
        return free_variables(node[2])
    raise AssertionError(node)


def _eval(node, env: dict[str, float]) -> float:
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        name = node[1]
        if name in env:
            return env[name]
        return CONSTANTS[name]
    if kind == "neg":
        return -_eval(node[1], env)
    if kind == "bin":
        op, a, b = node[1], _eval(node[2], env), _eval(node[3], env)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return a / b
        return a ** b
    if kind == "call":
        return FUNCTIONS[node[1]](_eval(node[2], env))
    raise AssertionError(node)


def compile_expression(text: str, variables: tuple[str, ...]) -> Callable[..., float]:
    """Compile to a positional callable over the given variables.

    Any identifier that is not a declared variable, a constant, or a function
    name is rejected up front.
    """
    ast = parse(text)
    unknown = free_variables(ast) - set(variables)
    if unknown:
        # report the first unknown name's column by re-scanning tokens
        for tok in _tokenize(text):
            if tok.kind == "ident" and tok.text in unknown:
                raise ExpressionError(f"unknown identifier {tok.text!r}", tok.column)
        raise ExpressionError(f"unknown identifier {sorted(unknown)[0]!r}", 1)

    names = list(variables)

    def fn(*args: float) -> float:
        return _eval(ast, dict(zip(names, args)))

    fn.expression = text  # type: ignore[attr-defined]
    return fn


def field_from_expression(text: str, state_domain: tuple[float, float], name: str | None = None):
    """Build a ScalarField from an expression in x and lambda (finite differences for d/dx)."""
    from .dynamics import ScalarField

    fn = compile_expression(text, ("x", "lambda"))
    return ScalarField(
        rhs=lambda x, lam: fn(x, lam),
        name=name or f"expr:{text}",
        state_domain=state_domain,
    )


def shape_from_expression(text: str) -> Callable[[float], float]:
    """Build a shift shape L(s) from an expression in s."""
    fn = compile_expression(text, ("s",))
    return lambda s: fn(s)


def coefficient_from_expression(text: str) -> Callable[[float], float]:
    """Build a coefficient curve over lambda (used by the energy-balance analyzer)."""
    fn = compile_expression(text, ("lambda",))
    return lambda lam: fn(lam)


def parse_expression(text: str, state_domain: tuple[float, float] = (-10.0, 10.0)):
    """Dispatch on free variables: {x, lambda} makes a field, {s} a shift shape.

    Returns a ScalarField or a plain callable shape; mixing x/lambda with s is
    rejected.
    """
    ast = parse(text)
    vars_used = free_variables(ast)
    unknown = vars_used - {"x", "lambda", "s"}
    if unknown:
        for tok in _tokenize(text):
            if tok.kind == "ident" and tok.text in unknown:
                raise ExpressionError(f"unknown identifier {tok.text!r}", tok.column)
    if "s" in vars_used and (vars_used & {"x", "lambda"}):
        raise ExpressionError("expression mixes state variables with shift time 's'", 1)
    if "s" in vars_used:
        return shape_from_expression(text)
    return field_from_expression(text, state_domain)
