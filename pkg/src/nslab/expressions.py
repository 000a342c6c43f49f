"""Expression language for scalar fields on phase space.

Grammar (EBNF)::

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'

Precedence: ``^`` binds tighter than unary minus, which binds tighter
than ``*``/``/``, which bind tighter than ``+``/``-``.  Identifiers are
the chart variables of the owning object (``x1..xn``, ``p1..pn`` on
phase space, ``y1..ym`` for surface parameters, plus context-specific
names such as ``v``, ``w`` or ``nu``) and the function names below.

Functions: sqrt, sin, cos, tan, exp, log, abs, atan2(a,b), pow(a,b).

Parsed expressions are immutable; evaluation is side-effect-free and
deterministic.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import taylor
from .errors import (
    EvaluationDomainError,
    ExpressionSyntaxError,
    UnknownIdentifierError,
    VariableIndexError,
)

FUNCTIONS = {
    "sqrt": 1,
    "sin": 1,
    "cos": 1,
    "tan": 1,
    "exp": 1,
    "log": 1,
    "abs": 1,
    "atan2": 2,
    "pow": 2,
}

_INDEXED = re.compile(r"^([xpy])([0-9]+)$")


# ----------------------------------------------------------------------
# AST
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    span: tuple = field(compare=False)


@dataclass(frozen=True)
class Num(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str
    slot: int


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class Bin(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Call(Node):
    fn: str
    args: tuple


class Expression:
    """An immutable parsed expression over a fixed ordered variable list."""

    def __init__(self, text, variables, root):
        self.text = text
        self.variables = tuple(variables)
        self.root = root

    def __repr__(self):
        return f"Expression({self.text!r}, vars={self.variables})"

    def __call__(self, values):
        return evaluate(self, values)

    def snippet(self, node):
        return self.text[node.span[0]:node.span[1]]


# ----------------------------------------------------------------------
# tokenizer / parser
# ----------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ExpressionSyntaxError(
                f"unexpected character {text[pos]!r}", pos
            )
        start = m.start("num") if m.group("num") else (
            m.start("ident") if m.group("ident") else m.start("op"))
        kind = "num" if m.group("num") else ("ident" if m.group("ident") else "op")
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.variables = tuple(variables)
        self.slots = {name: i for i, name in enumerate(self.variables)}
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, val, off = self.next()
        if kind != "op" or val != op:
            raise ExpressionSyntaxError(f"expected {op!r}, found {val!r}", off)

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected trailing input {val!r}", off)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, off = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.term()
                node = Bin((node.span[0], rhs.span[1]), val, node, rhs)
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, val, off = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.unary()
                node = Bin((node.span[0], rhs.span[1]), val, node, rhs)
            else:
                return node

    def unary(self):
        kind, val, off = self.peek()
        if kind == "op" and val == "-":
            self.next()
            arg = self.unary()
            return Neg((off, arg.span[1]), arg)
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, off = self.peek()
        if kind == "op" and val == "^":
            self.next()
            exponent = self.unary()
            return Bin((base.span[0], exponent.span[1]), "^", base, exponent)
        return base

    def atom(self):
        kind, val, off = self.next()
        if kind == "num":
            return Num((off, off + len(val)), float(val))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect_op("(")
                args = [self.expr()]
                while self.peek()[:2] == ("op", ","):
                    self.next()
                    args.append(self.expr())
                self.expect_op(")")
                end = self.tokens[self.pos - 1][2] + 1
                if len(args) != FUNCTIONS[val]:
                    raise ExpressionSyntaxError(
                        f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", off
                    )
                return Call((off, end), val, tuple(args))
            if val in self.slots:
                return Var((off, off + len(val)), val, self.slots[val])
            m = _INDEXED.match(val)
            if m is not None and any(v.startswith(m.group(1)) for v in self.slots):
                raise VariableIndexError(
                    f"variable {val!r} exceeds the available index range", off
                )
            raise UnknownIdentifierError(f"unknown identifier {val!r}", off)
        raise ExpressionSyntaxError(f"unexpected token {val!r}", off)


def phase_variables(n):
    return tuple(f"x{i+1}" for i in range(n)) + tuple(f"p{i+1}" for i in range(n))


def parse(text, variables):
    """Parse `text` over an explicit ordered variable list."""
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return Expression(text, variables, _Parser(text, variables).parse())


def parse_expression(text, n):
    """Parse an expression over the 2n phase-space variables x1..xn, p1..pn."""
    if n < 2:
        raise ValueError("phase-space dimension must be at least 2")
    return parse(text, phase_variables(n))


# ----------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------

class _FloatAlgebra:
    @staticmethod
    def num(v):
        return float(v)

    @staticmethod
    def pow(a, b):
        if float(b).is_integer():
            if a == 0.0 and b < 0:
                raise EvaluationDomainError("zero raised to a negative power")
            return a ** int(b)
        if a <= 0.0:
            raise EvaluationDomainError("non-integer power of non-positive base")
        return a ** b

    sqrt = staticmethod(lambda u: math.sqrt(u))
    sin = staticmethod(math.sin)
    cos = staticmethod(math.cos)
    tan = staticmethod(math.tan)
    exp = staticmethod(math.exp)
    abs = staticmethod(abs)

    @staticmethod
    def log(u):
        if u <= 0.0:
            raise EvaluationDomainError("log of non-positive value")
        return math.log(u)

    @staticmethod
    def atan2(a, b):
        if a == 0.0 and b == 0.0:
            raise EvaluationDomainError("atan2 at the origin")
        return math.atan2(a, b)

    @staticmethod
    def div(a, b):
        if b == 0.0:
            raise EvaluationDomainError("division by zero")
        return a / b


class _SeriesAlgebra:
    def __init__(self, template):
        self.template = template

    def num(self, v):
        c = self.template.ctx.constant(
            np.broadcast_to(v, self.template.coef.shape[:-1])
        )
        c.trust = self.template.trust
        return c

    @staticmethod
    def pow(a, b):
        if isinstance(b, taylor.TaylorSeries):
            nonconst = np.any(b.coef[..., 1:] != 0.0)
            if not nonconst:
                b = b.value()
                scalar = float(b) if np.ndim(b) == 0 else None
                if scalar is not None or np.all(b == b.flat[0]):
                    return a.powc(scalar if scalar is not None else float(b.flat[0]))
            return (b * a.log()).exp()
        return a.powc(float(b))

    sqrt = staticmethod(lambda u: u.sqrt())
    sin = staticmethod(lambda u: u.sin())
    cos = staticmethod(lambda u: u.cos())
    tan = staticmethod(lambda u: u.tan())
    exp = staticmethod(lambda u: u.exp())
    log = staticmethod(lambda u: u.log())
    abs = staticmethod(lambda u: u.absolute())
    atan2 = staticmethod(taylor.atan2_series)

    @staticmethod
    def div(a, b):
        return a / b


def _eval(node, env, alg, expr):
    try:
        if isinstance(node, Num):
            return alg.num(node.value)
        if isinstance(node, Var):
            return env[node.slot]
        if isinstance(node, Neg):
            return -_eval(node.arg, env, alg, expr)
        if isinstance(node, Bin):
            a = _eval(node.left, env, alg, expr)
            b = _eval(node.right, env, alg, expr)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if node.op == "/":
                return alg.div(a, b)
            return alg.pow(a, b)
        if isinstance(node, Call):
            args = [_eval(a, env, alg, expr) for a in node.args]
            if node.fn == "pow":
                return alg.pow(*args)
            return getattr(alg, node.fn)(*args)
    except EvaluationDomainError as err:
        if err.snippet is None:
            raise EvaluationDomainError(
                str(err), expr.snippet(node), node.span[0]
            ) from None
        raise
    raise TypeError(f"unhandled node {node!r}")


def evaluate(expr, values):
    """Plain float evaluation; `values` follows expr.variables order."""
    env = [float(v) for v in values]
    if len(env) != len(expr.variables):
        raise ValueError("wrong number of variable values")
    return _eval(expr.root, env, _FloatAlgebra, expr)


def evaluate_series(expr, env):
    """Evaluate over TaylorSeries inputs (one per variable, shared context)."""
    if len(env) != len(expr.variables):
        raise ValueError("wrong number of variable series")
    return _eval(expr.root, env, _SeriesAlgebra(env[0]), expr)


# ----------------------------------------------------------------------
# jets
# ----------------------------------------------------------------------

class Jet:
    """Value plus exact mixed partials up to a total order.

    Partials are keyed by multi-index over the expression's variables;
    keying by multi-index makes permutation symmetry of mixed partials
    hold identically.  The zero multi-index entry equals the value.
    """

    def __init__(self, variables, order, value, partials):
        self.variables = tuple(variables)
        self.order = order
        self.value = value
        self.partials = partials

    def partial(self, index):
        """Look up a partial by multi-index tuple or {name: order} mapping."""
        if isinstance(index, dict):
            mi = [0] * len(self.variables)
            for name, k in index.items():
                mi[self.variables.index(name)] = k
            index = tuple(mi)
        return self.partials[tuple(index)]

    def d(self, **orders):
        return self.partial(orders)


def jet_from_series(series, variables):
    parts = {}
    ctx = series.ctx
    for i, m in enumerate(ctx.monomials):
        if sum(m) > series.trust:
            continue
        parts[m] = float(series.coef[..., i] * ctx.factorials[i])
    return Jet(variables, series.trust, parts[(0,) * ctx.nvars], parts)


def evaluate_jet(expr, q, order):
    """Exact mixed partials of `expr` at `q` up to `order` (0..3).

    `q` is a PhasePoint for phase-space expressions or any sequence of
    variable values matching expr.variables.
    """
    if order < 0 or order > 3:
        raise ValueError("jet order must be between 0 and 3")
    values = _point_values(expr, q)
    ctx = taylor.context(len(expr.variables), order)
    env = [ctx.variable(i, values[i]) for i in range(len(values))]
    series = evaluate_series(expr, env)
    return jet_from_series(series, expr.variables)


def _point_values(expr, q):
    if hasattr(q, "x") and hasattr(q, "p"):
        values = list(np.concatenate([q.x, q.p]))
    else:
        values = [float(v) for v in q]
    if len(values) != len(expr.variables):
        raise ValueError(
            f"expected {len(expr.variables)} variable values, got {len(values)}"
        )
    return values


def finite_difference_probe(expr, q, multi_index, step):
    """Central-difference estimate of one mixed partial (order <= 3).

    Serves as the independent numerical oracle for the jet evaluator.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    values = _point_values(expr, q)
    if isinstance(multi_index, dict):
        mi = [0] * len(expr.variables)
        for name, k in multi_index.items():
            mi[expr.variables.index(name)] = k
        multi_index = mi
    multi_index = list(multi_index)
    if sum(multi_index) > 3:
        raise ValueError("finite-difference probe supports total order <= 3")

    def probe(vals, mi):
        for v, k in enumerate(mi):
            if k > 0:
                lower = list(mi)
                lower[v] -= 1
                hi = list(vals)
                hi[v] += step
                lo = list(vals)
                lo[v] -= step
                return (probe(hi, lower) - probe(lo, lower)) / (2.0 * step)
        return evaluate(expr, vals)

    return probe(values, multi_index)


# ----------------------------------------------------------------------
# AST utilities (symbolic derivative and substitution)
# ----------------------------------------------------------------------

_NOSPAN = (0, 0)


def _num(v):
    return Num(_NOSPAN, float(v))


def _mul(a, b):
    return Bin(_NOSPAN, "*", a, b)


def _derive(node, slot):
    if isinstance(node, Num):
        return _num(0.0)
    if isinstance(node, Var):
        return _num(1.0 if node.slot == slot else 0.0)
    if isinstance(node, Neg):
        return Neg(_NOSPAN, _derive(node.arg, slot))
    if isinstance(node, Bin):
        da = _derive(node.left, slot)
        db = _derive(node.right, slot)
        a, b = node.left, node.right
        if node.op in "+-":
            return Bin(_NOSPAN, node.op, da, db)
        if node.op == "*":
            return Bin(_NOSPAN, "+", _mul(da, b), _mul(a, db))
        if node.op == "/":
            num = Bin(_NOSPAN, "-", _mul(da, b), _mul(a, db))
            return Bin(_NOSPAN, "/", num, Bin(_NOSPAN, "^", b, _num(2)))
        # a^b: general form via log; constant exponent handled directly
        if isinstance(b, Num):
            scaled = _mul(_num(b.value), Bin(_NOSPAN, "^", a, _num(b.value - 1)))
            return _mul(scaled, da)
        logterm = Bin(_NOSPAN, "+",
                      _mul(db, Call(_NOSPAN, "log", (a,))),
                      Bin(_NOSPAN, "/", _mul(b, da), a))
        return _mul(Bin(_NOSPAN, "^", a, b), logterm)
    if isinstance(node, Call):
        u = node.args[0]
        du = _derive(u, slot)
        if node.fn == "sqrt":
            return Bin(_NOSPAN, "/", du, _mul(_num(2), node))
        if node.fn == "sin":
            return _mul(Call(_NOSPAN, "cos", (u,)), du)
        if node.fn == "cos":
            return Neg(_NOSPAN, _mul(Call(_NOSPAN, "sin", (u,)), du))
        if node.fn == "tan":
            sec2 = Bin(_NOSPAN, "+", _num(1), Bin(_NOSPAN, "^", node, _num(2)))
            return _mul(sec2, du)
        if node.fn == "exp":
            return _mul(node, du)
        if node.fn == "log":
            return Bin(_NOSPAN, "/", du, u)
        if node.fn == "abs":
            return _mul(Bin(_NOSPAN, "/", u, node), du)
        if node.fn == "pow":
            return _derive(Bin(_NOSPAN, "^", node.args[0], node.args[1]), slot)
        if node.fn == "atan2":
            a, b = node.args
            da, db = _derive(a, slot), _derive(b, slot)
            num = Bin(_NOSPAN, "-", _mul(b, da), _mul(a, db))
            den = Bin(_NOSPAN, "+",
                      Bin(_NOSPAN, "^", a, _num(2)),
                      Bin(_NOSPAN, "^", b, _num(2)))
            return Bin(_NOSPAN, "/", num, den)
    raise TypeError(f"unhandled node {node!r}")


def derivative(expr, name):
    """Exact symbolic derivative with respect to one named variable."""
    slot = expr.variables.index(name)
    root = _derive(expr.root, slot)
    return Expression(f"d({expr.text})/d{name}", expr.variables, root)


def _subst(node, slot, replacement, slot_map):
    if isinstance(node, Num):
        return node
    if isinstance(node, Var):
        if node.slot == slot:
            return replacement
        return Var(_NOSPAN, node.name, slot_map[node.slot])
    if isinstance(node, Neg):
        return Neg(_NOSPAN, _subst(node.arg, slot, replacement, slot_map))
    if isinstance(node, Bin):
        return Bin(_NOSPAN, node.op,
                   _subst(node.left, slot, replacement, slot_map),
                   _subst(node.right, slot, replacement, slot_map))
    if isinstance(node, Call):
        return Call(_NOSPAN, node.fn,
                    tuple(_subst(a, slot, replacement, slot_map) for a in node.args))
    raise TypeError(f"unhandled node {node!r}")


def substitute(expr, name, replacement):
    """Replace a named variable by a whole expression.

    `replacement` must be an Expression; the result is defined over the
    replacement's variable list, so every other variable of `expr` must
    appear there under the same name.
    """
    slot = expr.variables.index(name)
    slot_map = {}
    for i, var in enumerate(expr.variables):
        if var == name:
            continue
        if var not in replacement.variables:
            raise ValueError(f"variable {var!r} missing from replacement context")
        slot_map[i] = replacement.variables.index(var)
    root = _subst(expr.root, slot, replacement.root, slot_map)
    text = f"{expr.text}[{name} := {replacement.text}]"
    return Expression(text, replacement.variables, root)
