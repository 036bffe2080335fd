"""Scalar expression language: parsing, evaluation, symbolic differentiation.

Every scalar quantity the engine consumes (Hamiltonians, constraint
functions, force components, metric entries, potentials) is written in a
small infix language over the chart variables ``q1..qn``, ``p1..pn``, ``z``:

    expr   :=  term  (('+'|'-') term)*
    term   :=  unary (('*'|'/') unary)*
    unary  :=  '-' unary | power
    power  :=  atom ('^' unary)?          # right associative
    atom   :=  NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus, which binds tighter than ``*``/``/``,
which bind tighter than ``+``/``-``.  Whitespace is ignored.  Supported
functions: sin, cos, exp, log, sqrt, tanh.  Numeric literals are decimal
doubles.

Expressions are immutable after parsing; evaluation and differentiation are
pure, so values may be shared freely across threads.  Differentiation is
symbolic (AST rewriting); finite differences appear only in tests as an
independent oracle.
"""

import math
import re
from dataclasses import dataclass

from .errors import DomainError, ParseError, UnknownVariable

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")

_VAR_RE = re.compile(r"^(?:([qp])([1-9][0-9]*)|z)$")


def variable_names(n):
    """Chart variable names in canonical order: q1..qn, p1..pn, z."""
    return tuple(f"q{i}" for i in range(1, n + 1)) + tuple(
        f"p{i}" for i in range(1, n + 1)
    ) + ("z",)


def _check(value, offset):
    if not math.isfinite(value):
        raise DomainError("overflow", offset)
    return value


class Expr:
    """Base class for AST nodes.  Nodes are never mutated after creation."""

    __slots__ = ()

    def eval(self, env):
        raise NotImplementedError

    def diff(self, var):
        raise NotImplementedError

    def variables(self):
        out = set()
        self._collect(out)
        return out

    def _collect(self, out):
        pass


@dataclass(frozen=True)
class Num(Expr):
    value: float
    offset: int = 0

    def eval(self, env):
        return self.value

    def diff(self, var):
        return Num(0.0)

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str
    offset: int = 0

    def eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise UnknownVariable(self.name, self.offset) from None

    def diff(self, var):
        return Num(1.0) if self.name == var else Num(0.0)

    def _collect(self, out):
        out.add(self.name)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr
    offset: int = 0

    def eval(self, env):
        return -self.arg.eval(env)

    def diff(self, var):
        return neg(self.arg.diff(var))

    def _collect(self, out):
        self.arg._collect(out)

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    offset: int = 0

    def eval(self, env):
        a = self.left.eval(env)
        b = self.right.eval(env)
        op = self.op
        if op == "+":
            return _check(a + b, self.offset)
        if op == "-":
            return _check(a - b, self.offset)
        if op == "*":
            return _check(a * b, self.offset)
        if op == "/":
            if b == 0.0:
                raise DomainError("division_by_zero", self.offset)
            return _check(a / b, self.offset)
        # op == "^"
        if a < 0.0 and b != int(b):
            raise DomainError("pow_domain", self.offset)
        if a == 0.0 and b < 0.0:
            raise DomainError("division_by_zero", self.offset)
        try:
            return _check(a ** b, self.offset)
        except OverflowError:
            raise DomainError("overflow", self.offset) from None

    def diff(self, var):
        da = self.left.diff(var)
        db = self.right.diff(var)
        op = self.op
        if op == "+":
            return add(da, db)
        if op == "-":
            return sub(da, db)
        if op == "*":
            return add(mul(da, self.right), mul(self.left, db))
        if op == "/":
            return div(
                sub(mul(da, self.right), mul(self.left, db)),
                mul(self.right, self.right),
            )
        # d(a^b): exponent rule when b is constant w.r.t. var, else general form
        if isinstance(db, Num) and db.value == 0.0:
            return mul(
                mul(self.right, power(self.left, sub(self.right, Num(1.0)))), da
            )
        return mul(
            power(self.left, self.right),
            add(mul(db, Call("log", self.left)), div(mul(self.right, da), self.left)),
        )

    def _collect(self, out):
        self.left._collect(out)
        self.right._collect(out)

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr
    offset: int = 0

    def eval(self, env):
        x = self.arg.eval(env)
        f = self.func
        if f == "sin":
            return math.sin(x)
        if f == "cos":
            return math.cos(x)
        if f == "tanh":
            return math.tanh(x)
        if f == "exp":
            try:
                return _check(math.exp(x), self.offset)
            except OverflowError:
                raise DomainError("overflow", self.offset) from None
        if f == "log":
            if x <= 0.0:
                raise DomainError("log_domain", self.offset)
            return math.log(x)
        # sqrt
        if x < 0.0:
            raise DomainError("sqrt_domain", self.offset)
        return math.sqrt(x)

    def diff(self, var):
        da = self.arg.diff(var)
        f = self.func
        if f == "sin":
            outer = Call("cos", self.arg)
        elif f == "cos":
            outer = neg(Call("sin", self.arg))
        elif f == "exp":
            outer = self
        elif f == "tanh":
            outer = sub(Num(1.0), mul(self, self))
        elif f == "log":
            return div(da, self.arg)
        else:  # sqrt
            return div(da, mul(Num(2.0), self))
        return mul(outer, da)

    def _collect(self, out):
        self.arg._collect(out)

    def __str__(self):
        return f"{self.func}({self.arg})"


# ---------------------------------------------------------------------------
# Smart constructors.  Used when building derived expressions (derivatives,
# induced Hamiltonians): they fold literal identities so nested derivatives
# stay small.  The parser uses the raw node constructors so the AST mirrors
# the source text.


def add(a, b):
    if isinstance(a, Num) and a.value == 0.0:
        return b
    if isinstance(b, Num) and b.value == 0.0:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def sub(a, b):
    if isinstance(b, Num) and b.value == 0.0:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if isinstance(a, Num) and a.value == 0.0:
        return neg(b)
    return BinOp("-", a, b)


def mul(a, b):
    if isinstance(a, Num):
        if a.value == 0.0:
            return Num(0.0)
        if a.value == 1.0:
            return b
        if isinstance(b, Num):
            return Num(a.value * b.value)
    if isinstance(b, Num):
        if b.value == 0.0:
            return Num(0.0)
        if b.value == 1.0:
            return a
    return BinOp("*", a, b)


def div(a, b):
    if isinstance(a, Num) and a.value == 0.0:
        return Num(0.0)
    if isinstance(b, Num) and b.value == 1.0:
        return a
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
        return Num(a.value / b.value)
    return BinOp("/", a, b)


def power(a, b):
    if isinstance(b, Num):
        if b.value == 1.0:
            return a
        if b.value == 0.0:
            return Num(1.0)
    return BinOp("^", a, b)


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def const(value):
    return Num(float(value))


# ---------------------------------------------------------------------------
# Lexer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            # skip over whitespace-only tail
            rest = text[pos:]
            if rest.strip() == "":
                break
            raise ParseError(f"unexpected character {rest.strip()[0]!r}", pos + len(rest) - len(rest.lstrip()))
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens, n):
        self.tokens = tokens
        self.n = n
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected '{op}'", off)
        return self.advance()

    def parse_expr(self):
        node = self.parse_term()
        while True:
            kind, val, off = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                rhs = self.parse_term()
                node = BinOp(val, node, rhs, off)
            else:
                return node

    def parse_term(self):
        node = self.parse_unary()
        while True:
            kind, val, off = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                rhs = self.parse_unary()
                node = BinOp(val, node, rhs, off)
            else:
                return node

    def parse_unary(self):
        kind, val, off = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.parse_unary(), off)
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        kind, val, off = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            exponent = self.parse_unary()
            return BinOp("^", base, exponent, off)
        return base

    def parse_atom(self):
        kind, val, off = self.advance()
        if kind == "num":
            return Num(float(val), off)
        if kind == "ident":
            nxt_kind, nxt_val, _ = self.peek()
            if nxt_kind == "op" and nxt_val == "(":
                if val not in FUNCTIONS:
                    raise ParseError(f"unknown function '{val}'", off)
                self.advance()
                arg = self.parse_expr()
                self.expect_op(")")
                return Call(val, arg, off)
            m = _VAR_RE.match(val)
            if m is None:
                raise UnknownVariable(val, off)
            if m.group(1) is not None and int(m.group(2)) > self.n:
                raise UnknownVariable(val, off)
            return Var(val, off)
        if kind == "op" and val == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ParseError("unexpected token" if kind != "end" else "unexpected end of input", off)


def parse(text, n):
    """Parse ``text`` into an Expr over the chart of half-dimension ``n``.

    Raises ParseError (with character offset) on malformed input and
    UnknownVariable for identifiers outside {q1..qn, p1..pn, z}.
    """
    if n < 1:
        raise ValueError("chart half-dimension must be >= 1")
    parser = _Parser(_tokenize(text), n)
    node = parser.parse_expr()
    kind, _, off = parser.peek()
    if kind != "end":
        raise ParseError("trailing input", off)
    return node


def diff(expr, var):
    """Symbolic partial derivative of ``expr`` with respect to variable name ``var``."""
    return expr.diff(var)


def evaluate(expr, env):
    """Evaluate ``expr`` in the binding ``env`` (variable name -> float)."""
    return expr.eval(env)


def printer(expr):
    """Canonical fully parenthesized rendering; parse(printer(e)) evaluates like e."""
    return str(expr)
