"""Scalar fields over named coordinates: parse, evaluate, differentiate.

Expressions are immutable, hash-consed trees.  Structurally equal nodes are
the same Python object, so derivative results are memoized per node and the
large connection/curvature tables built on top of this module stay shared
DAGs instead of exploding trees.

Simplification is deliberately minimal: constant folding plus the trivial
identities ``x+0``, ``x*0``, ``x*1``, ``x^1``, ``x^0``, ``--x``.
"""
from __future__ import annotations

import math
import re
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Unary", "Binary", "Special",
    "ParseError", "UnknownIdentifierError", "DomainError", "UnboundVariableError",
    "const", "var", "parse", "evaluate", "evaluate_batch", "differentiate",
    "ZERO", "ONE", "exp", "ln", "sin", "cos", "tan", "tanh", "sqrt", "absval",
    "cosh", "sinh", "sech",
]

UNARY_OPS = ("neg", "exp", "ln", "sin", "cos", "tan", "tanh", "sqrt", "abs")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class DomainError(ArithmeticError):
    """Raised instead of producing NaN/inf (ln or sqrt of negatives, x/0, ...)."""

    def __init__(self, message: str, node: "Expr", point: Mapping[str, float]):
        super().__init__(f"{message} in {node} at {dict(point)}")
        self.node = node
        self.point = dict(point)


class UnboundVariableError(KeyError):
    pass


_INTERN: dict[tuple, "Expr"] = {}
_DIFF_CACHE: dict[tuple[int, str], "Expr"] = {}


class Expr:
    __slots__ = ("variables", "_hash", "__weakref__")

    children: tuple["Expr", ...] = ()

    # -- arithmetic sugar -------------------------------------------------
    def __add__(self, other):
        return binary("add", self, _coerce(other))

    def __radd__(self, other):
        return binary("add", _coerce(other), self)

    def __sub__(self, other):
        return binary("sub", self, _coerce(other))

    def __rsub__(self, other):
        return binary("sub", _coerce(other), self)

    def __mul__(self, other):
        return binary("mul", self, _coerce(other))

    def __rmul__(self, other):
        return binary("mul", _coerce(other), self)

    def __truediv__(self, other):
        return binary("div", self, _coerce(other))

    def __rtruediv__(self, other):
        return binary("div", _coerce(other), self)

    def __pow__(self, other):
        return binary("pow", self, _coerce(other))

    def __rpow__(self, other):
        return binary("pow", _coerce(other), self)

    def __neg__(self):
        return unary("neg", self)

    def __pos__(self):
        return self

    # interned: identity is equality
    def __eq__(self, other):
        return self is other

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Expr({self})"

    @property
    def is_const(self) -> bool:
        return False

    def diff(self, name: str) -> "Expr":
        return differentiate(self, name)

    def __call__(self, point: Mapping[str, float]) -> float:
        return evaluate(self, point)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)
        self.variables = frozenset()
        self._hash = hash(("const", self.value))

    @property
    def is_const(self) -> bool:
        return True

    def __str__(self):
        v = self.value
        if v == int(v) and abs(v) < 1e15:
            s = str(int(v))
        else:
            s = repr(v)
        return f"({s})" if v < 0 else s


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self.variables = frozenset((name,))
        self._hash = hash(("var", name))

    def __str__(self):
        return self.name


class Unary(Expr):
    __slots__ = ("op", "arg", "children")

    def __init__(self, op: str, arg: Expr):
        self.op = op
        self.arg = arg
        self.children = (arg,)
        self.variables = arg.variables
        self._hash = hash((op, id(arg)))

    def __str__(self):
        if self.op == "neg":
            return f"(-{self.arg})"
        return f"{self.op}({self.arg})"


_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


class Binary(Expr):
    __slots__ = ("op", "left", "right", "children")

    def __init__(self, op: str, left: Expr, right: Expr):
        self.op = op
        self.left = left
        self.right = right
        self.children = (left, right)
        self.variables = left.variables | right.variables
        self._hash = hash((op, id(left), id(right)))

    def __str__(self):
        return f"({self.left} {_SYMBOL[self.op]} {self.right})"


class Special(Expr):
    """Extension node for fields that are not closed-form (e.g. v-integrals).

    Subclasses set ``children`` and ``variables`` and implement
    ``partial(name)`` (derivative as an Expr), ``eval_scalar(values)`` taking
    the evaluated children, and optionally ``eval_batch(values, points)``.
    Instances are not interned; identity equality still holds.
    """

    __slots__ = ()

    def partial(self, name: str) -> Expr:
        raise NotImplementedError

    def eval_scalar(self, child_values: Sequence[float], point: Mapping[str, float]) -> float:
        raise NotImplementedError

    def eval_batch(self, child_values: Sequence[np.ndarray], points: Mapping[str, np.ndarray]) -> np.ndarray:
        n = len(next(iter(points.values())))
        out = np.empty(n)
        for k in range(n):
            pt = {name: float(arr[k]) for name, arr in points.items()}
            out[k] = self.eval_scalar([float(c[k]) for c in child_values], pt)
        return out


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return const(float(x))
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


def _intern(key: tuple, factory) -> Expr:
    node = _INTERN.get(key)
    if node is None:
        node = factory()
        _INTERN[key] = node
    return node


def const(value: float) -> Const:
    value = float(value)
    if value == 0.0:
        value = 0.0  # fold -0.0
    return _intern(("const", value), lambda: Const(value))


def var(name: str) -> Var:
    return _intern(("var", name), lambda: Var(name))


ZERO = const(0.0)
ONE = const(1.0)


def _fold_unary(op: str, x: float) -> float | None:
    try:
        return _SCALAR_UNARY[op](x)
    except (ValueError, OverflowError, ZeroDivisionError):
        return None


def unary(op: str, arg: Expr) -> Expr:
    if op not in UNARY_OPS:
        raise ValueError(f"unknown unary op {op}")
    if isinstance(arg, Const):
        folded = _fold_unary(op, arg.value)
        if folded is not None and math.isfinite(folded):
            return const(folded)
    if op == "neg" and isinstance(arg, Unary) and arg.op == "neg":
        return arg.arg
    return _intern((op, id(arg)), lambda: Unary(op, arg))


def binary(op: str, left: Expr, right: Expr) -> Expr:
    if op not in BINARY_OPS:
        raise ValueError(f"unknown binary op {op}")
    lc = left.value if isinstance(left, Const) else None
    rc = right.value if isinstance(right, Const) else None
    if lc is not None and rc is not None:
        try:
            folded = _SCALAR_BINARY[op](lc, rc)
        except (ValueError, OverflowError, ZeroDivisionError):
            folded = None
        if folded is not None and math.isfinite(folded):
            return const(folded)
    if op == "add":
        if lc == 0.0:
            return right
        if rc == 0.0:
            return left
    elif op == "sub":
        if rc == 0.0:
            return left
        if lc == 0.0:
            return unary("neg", right)
    elif op == "mul":
        if lc == 0.0 or rc == 0.0:
            return ZERO
        if lc == 1.0:
            return right
        if rc == 1.0:
            return left
        if lc == -1.0:
            return unary("neg", right)
        if rc == -1.0:
            return unary("neg", left)
    elif op == "div":
        if lc == 0.0 and rc != 0.0:
            return ZERO
        if rc == 1.0:
            return left
    elif op == "pow":
        if rc == 1.0:
            return left
        if rc == 0.0:
            return ONE
        if lc == 1.0:
            return ONE
    return _intern((op, id(left), id(right)), lambda: Binary(op, left, right))


# -- function helpers ------------------------------------------------------
def exp(x) -> Expr:
    return unary("exp", _coerce(x))


def ln(x) -> Expr:
    return unary("ln", _coerce(x))


def sin(x) -> Expr:
    return unary("sin", _coerce(x))


def cos(x) -> Expr:
    return unary("cos", _coerce(x))


def tan(x) -> Expr:
    return unary("tan", _coerce(x))


def tanh(x) -> Expr:
    return unary("tanh", _coerce(x))


def sqrt(x) -> Expr:
    return unary("sqrt", _coerce(x))


def absval(x) -> Expr:
    return unary("abs", _coerce(x))


def cosh(x) -> Expr:
    x = _coerce(x)
    return (exp(x) + exp(-x)) / 2.0


def sinh(x) -> Expr:
    x = _coerce(x)
    return (exp(x) - exp(-x)) / 2.0


def sech(x) -> Expr:
    return 1.0 / cosh(x)


# -- evaluation ---------------------------------------------------------------
def _ln(x: float) -> float:
    if x <= 0.0:
        raise ValueError("ln of non-positive argument")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x < 0.0:
        raise ValueError("sqrt of negative argument")
    return math.sqrt(x)


def _div(a: float, b: float) -> float:
    if b == 0.0:
        raise ZeroDivisionError("division by zero")
    return a / b


def _pow(a: float, b: float) -> float:
    if a == 0.0 and b < 0.0:
        raise ZeroDivisionError("zero to a negative power")
    if a < 0.0 and b != int(b):
        raise ValueError("negative base with non-integer exponent")
    r = math.pow(a, b)
    return r


_SCALAR_UNARY = {
    "neg": lambda x: -x,
    "exp": math.exp,
    "ln": _ln,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "tanh": math.tanh,
    "sqrt": _sqrt,
    "abs": abs,
}

_SCALAR_BINARY = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": _div,
    "pow": _pow,
}


def _postorder(roots: Iterable[Expr]) -> list[Expr]:
    """Nodes reachable from ``roots`` with children before parents, each once."""
    seen: set[int] = set()
    order: list[Expr] = []
    for root in roots:
        if id(root) in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for child in node.children:
                if id(child) not in seen:
                    stack.append((child, False))
    return order


def evaluate(e: Expr, point: Mapping[str, float]) -> float:
    """Evaluate ``e`` at a point (coordinate name -> value) in IEEE double."""
    values: dict[int, float] = {}
    for node in _postorder([e]):
        try:
            if isinstance(node, Const):
                val = node.value
            elif isinstance(node, Var):
                try:
                    val = float(point[node.name])
                except KeyError:
                    raise UnboundVariableError(node.name) from None
            elif isinstance(node, Unary):
                val = _SCALAR_UNARY[node.op](values[id(node.arg)])
            elif isinstance(node, Binary):
                val = _SCALAR_BINARY[node.op](values[id(node.left)], values[id(node.right)])
            else:
                val = node.eval_scalar([values[id(c)] for c in node.children], point)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise DomainError(str(exc), node, point) from None
        if not math.isfinite(val):
            raise DomainError("non-finite result", node, point)
        values[id(node)] = val
    return values[id(e)]


def _batch_check(bad: np.ndarray, message: str, node: Expr, points: Mapping[str, np.ndarray]):
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise DomainError(message, node, {n: float(a[k]) for n, a in points.items()})


def evaluate_batch(exprs: Sequence[Expr], points: Mapping[str, np.ndarray]) -> list[np.ndarray]:
    """Evaluate many expressions at many points at once (vectorized over points).

    ``points`` maps each coordinate name to a 1-D array; all arrays share one
    length.  Shared subexpressions are evaluated once.
    """
    arrays = {k: np.asarray(v, dtype=float) for k, v in points.items()}
    n = len(next(iter(arrays.values()))) if arrays else 1
    values: dict[int, np.ndarray] = {}
    with np.errstate(all="ignore"):
        for node in _postorder(exprs):
            if isinstance(node, Const):
                val = np.full(n, node.value)
            elif isinstance(node, Var):
                if node.name not in arrays:
                    raise UnboundVariableError(node.name)
                val = arrays[node.name]
            elif isinstance(node, Unary):
                x = values[id(node.arg)]
                op = node.op
                if op == "neg":
                    val = -x
                elif op == "ln":
                    _batch_check(x <= 0.0, "ln of non-positive argument", node, arrays)
                    val = np.log(x)
                elif op == "sqrt":
                    _batch_check(x < 0.0, "sqrt of negative argument", node, arrays)
                    val = np.sqrt(x)
                elif op == "abs":
                    val = np.abs(x)
                else:
                    val = getattr(np, op)(x)
            elif isinstance(node, Binary):
                a = values[id(node.left)]
                b = values[id(node.right)]
                op = node.op
                if op == "add":
                    val = a + b
                elif op == "sub":
                    val = a - b
                elif op == "mul":
                    val = a * b
                elif op == "div":
                    _batch_check(b == 0.0, "division by zero", node, arrays)
                    val = a / b
                else:
                    _batch_check((a == 0.0) & (b < 0.0), "zero to a negative power", node, arrays)
                    _batch_check((a < 0.0) & (b != np.round(b)), "negative base with non-integer exponent",
                                 node, arrays)
                    val = np.power(a, b)
            else:
                val = np.asarray(node.eval_batch([values[id(c)] for c in node.children], arrays), dtype=float)
            _batch_check(~np.isfinite(val), "non-finite result", node, arrays)
            values[id(node)] = val
    return [values[id(e)] for e in exprs]


# -- differentiation --------------------------------------------------------
def _diff_node(node: Expr, name: str, d: dict[int, Expr]) -> Expr:
    def dd(child: Expr) -> Expr:
        return d.get(id(child), ZERO)

    if isinstance(node, Var):
        return ONE if node.name == name else ZERO
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Unary):
        x = node.arg
        dx = dd(x)
        if dx is ZERO:
            return ZERO
        op = node.op
        if op == "neg":
            return -dx
        if op == "exp":
            return node * dx
        if op == "ln":
            return dx / x
        if op == "sin":
            return cos(x) * dx
        if op == "cos":
            return -(sin(x) * dx)
        if op == "tan":
            return (ONE + node * node) * dx
        if op == "tanh":
            return (ONE - node * node) * dx
        if op == "sqrt":
            return dx / (2.0 * node)
        if op == "abs":
            # sign(x) = x/|x|: evaluation at x == 0 raises DomainError
            return (x / node) * dx
    if isinstance(node, Binary):
        a, b = node.left, node.right
        da, db = dd(a), dd(b)
        op = node.op
        if op == "add":
            return da + db
        if op == "sub":
            return da - db
        if op == "mul":
            return da * b + a * db
        if op == "div":
            if db is ZERO:
                return da / b
            return (da * b - a * db) / (b * b)
        if op == "pow":
            if isinstance(b, Const):
                return (b.value * a ** (b.value - 1.0)) * da
            # general case a^b (b' ln a + b a'/a)
            return node * (db * ln(a) + b * da / a)
    if isinstance(node, Special):
        return node.partial(name)
    raise TypeError(f"cannot differentiate {node!r}")


def differentiate(e: Expr, name: str) -> Expr:
    """Exact symbolic partial derivative d e / d name (memoized per node)."""
    if name not in e.variables:
        return ZERO
    key = (id(e), name)
    hit = _DIFF_CACHE.get(key)
    if hit is not None:
        return hit
    d: dict[int, Expr] = {}
    for node in _postorder([e]):
        if name not in node.variables:
            continue
        k = (id(node), name)
        cached = _DIFF_CACHE.get(k)
        if cached is None:
            cached = _diff_node(node, name, d)
            _DIFF_CACHE[k] = cached
        d[id(node)] = cached
    return d[id(e)]


# -- parser -------------------------------------------------------------------
_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)

_FUNCTIONS = {
    "exp": exp, "ln": ln, "log": ln, "sin": sin, "cos": cos, "tan": tan,
    "tanh": tanh, "sqrt": sqrt, "abs": absval,
    "cosh": cosh, "sinh": sinh, "sech": sech,
}
_CONSTANTS = {"pi": math.pi}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    raw = text.encode("utf-8")
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            if rest.strip() == "":
                break
            bad = pos + (len(rest) - len(rest.lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", len(text[:bad].encode("utf-8")))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), len(text[:start].encode("utf-8"))))
        pos = m.end()
    tokens.append(("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str, coords: Iterable[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.coords = set(coords)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, off = self.take()
        if text != value or kind != "op":
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", off)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text in ("-", "+"):
            self.take()
            operand = self.unary()
            return -operand if text == "-" else operand
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        kind, text, _ = self.peek()
        if kind == "op" and text in ("^", "**"):
            self.take()
            return base ** self.unary()  # right-associative
        return base

    def primary(self) -> Expr:
        kind, text, off = self.take()
        if kind == "num":
            return const(float(text))
        if kind == "id":
            if self.peek()[1] == "(" and self.peek()[0] == "op" and text not in self.coords:
                fn = _FUNCTIONS.get(text)
                if fn is None:
                    raise UnknownIdentifierError(text, off)
                self.take()
                arg = self.expr()
                self.expect(")")
                return fn(arg)
            if text in self.coords:
                return var(text)
            if text in _CONSTANTS:
                return const(_CONSTANTS[text])
            raise UnknownIdentifierError(text, off)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {text or 'end of input'!r}", off)


def parse(text: str, coords: Iterable[str]) -> Expr:
    """Parse infix text over the declared coordinate names.

    Precedence: ``^`` binds tighter than unary minus, which binds tighter than
    ``* /``, then ``+ -``.  ``^`` (or ``**``) is right-associative.
    """
    return _Parser(text, coords).parse()
