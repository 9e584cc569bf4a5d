"""Coordinate-expression language: parser, printer, symbolic partial derivatives.

Nodes are interned (hash-consed), so structurally equal expressions are the
same object; equality is identity and common subexpressions are shared when
several expressions are compiled together.

Grammar (``^`` binds tighter than unary minus)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := primary ("^" ["-"] int)?
    primary := number | ident | func "(" expr ")" | "(" expr ")"
"""
from __future__ import annotations

import math
import re
import weakref

import numpy as np

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh")
CONSTANTS = {"pi": math.pi}
MAX_COORDS = 9


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, position, text=""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class UnknownIdentifierError(ExprError):
    pass


class ArityError(ExprError):
    pass


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------

_INTERN: "weakref.WeakValueDictionary[tuple, Expression]" = weakref.WeakValueDictionary()


class Expression:
    __slots__ = ("args", "_dcache", "_fn", "__weakref__")
    kind = "expr"

    def __new__(cls, *args):
        key = (cls,) + tuple(a if not isinstance(a, Expression) else id(a) for a in args)
        node = _INTERN.get(key)
        if node is not None and node.args == args:
            return node
        node = object.__new__(cls)
        node.args = args
        node._dcache = {}
        node._fn = None
        _INTERN[key] = node
        return node

    def __reduce__(self):
        return (type(self), self.args)

    # structure --------------------------------------------------------
    @property
    def children(self):
        return tuple(a for a in self.args if isinstance(a, Expression))

    def variables(self):
        seen, out, stack = set(), set(), [self]
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen.add(id(node))
            if isinstance(node, Var):
                out.add(node.index)
            stack.extend(node.children)
        return out

    def size(self):
        seen, stack = set(), [self]
        while stack:
            node = stack.pop()
            if id(node) not in seen:
                seen.add(id(node))
                stack.extend(node.children)
        return len(seen)

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(map(repr, self.args))})"

    def __str__(self):
        return to_string(self)

    # arithmetic sugar (simplifying constructors) ----------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return power(self, k)

    # evaluation -------------------------------------------------------
    def evaluate(self, point):
        if self._fn is None:
            self._fn = compile_exprs([self])
        x = np.asarray(point, dtype=float)
        return float(self._fn(x)[0])

    def __call__(self, point):
        return self.evaluate(point)

    def diff(self, i):
        return differentiate(self, i)


class Num(Expression):
    __slots__ = ()

    @property
    def value(self):
        return self.args[0]


class Var(Expression):
    __slots__ = ()

    @property
    def index(self):
        return self.args[0]


class Neg(Expression):
    __slots__ = ()


class Add(Expression):
    __slots__ = ()


class Sub(Expression):
    __slots__ = ()


class Mul(Expression):
    __slots__ = ()


class Div(Expression):
    __slots__ = ()


class Pow(Expression):
    """``base ^ k`` with an integer exponent ``k``."""

    __slots__ = ()


class Func(Expression):
    """``name(arg)`` for one of :data:`FUNCTIONS`."""

    __slots__ = ()

    @property
    def name(self):
        return self.args[0]


def num(value) -> Num:
    value = float(value)
    if value == 0.0:
        value = 0.0  # fold -0.0
    return Num(value)


ZERO = num(0.0)
ONE = num(1.0)


def as_expr(value):
    if isinstance(value, Expression):
        return value
    if isinstance(value, str):
        return parse(value)
    return num(value)


def _is_num(e, value=None):
    return isinstance(e, Num) and (value is None or e.value == value)


def add(a, b):
    if _is_num(a) and _is_num(b):
        return num(a.value + b.value)
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.args[0])
    return Add(a, b)


def sub(a, b):
    if _is_num(a) and _is_num(b):
        return num(a.value - b.value)
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return neg(b)
    if a is b:
        return ZERO
    if isinstance(b, Neg):
        return add(a, b.args[0])
    return Sub(a, b)


def neg(a):
    if _is_num(a):
        return num(-a.value)
    if isinstance(a, Neg):
        return a.args[0]
    return Neg(a)


def mul(a, b):
    if _is_num(a) and _is_num(b):
        return num(a.value * b.value)
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a, -1.0):
        return neg(b)
    if _is_num(b, -1.0):
        return neg(a)
    if isinstance(a, Neg) and isinstance(b, Neg):
        return mul(a.args[0], b.args[0])
    if isinstance(a, Neg):
        return neg(mul(a.args[0], b))
    if isinstance(b, Neg):
        return neg(mul(a, b.args[0]))
    if _is_num(b) and not _is_num(a):
        a, b = b, a
    if _is_num(a) and isinstance(b, Mul) and _is_num(b.args[0]):
        return mul(num(a.value * b.args[0].value), b.args[1])
    if a is b:
        return power(a, 2)
    return Mul(a, b)


def div(a, b):
    if _is_num(b, 0.0):
        raise ZeroDivisionError("division by literal zero")
    if _is_num(a) and _is_num(b):
        return num(a.value / b.value)
    if _is_num(a, 0.0):
        return ZERO
    if _is_num(b, 1.0):
        return a
    if isinstance(a, Neg):
        return neg(div(a.args[0], b))
    if isinstance(b, Neg):
        return neg(div(a, b.args[0]))
    if a is b:
        return ONE
    return Div(a, b)


def power(a, k):
    k = int(k)
    if k == 0:
        return ONE
    if k == 1:
        return a
    if _is_num(a):
        return num(a.value ** k)
    if isinstance(a, Pow):
        return power(a.args[0], a.args[1] * k)
    return Pow(a, k)


def func(name, a):
    if name not in FUNCTIONS:
        raise UnknownIdentifierError(f"unknown function {name!r}")
    if _is_num(a):
        return num(_SCALAR_FUNCS[name](a.value))
    return Func(name, a)


_SCALAR_FUNCS = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp,
    "log": math.log, "sqrt": math.sqrt, "sinh": math.sinh, "cosh": math.cosh,
}


def var(i) -> Var:
    if not 0 <= i < 64:
        raise ExprError(f"coordinate index {i} out of range")
    return Var(int(i))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
                    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))")


def _tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[start]!r}", start, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, aliases, dim):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.aliases = aliases or {}
        self.dim = dim

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            raise ExprSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", pos, self.text)

    def parse(self):
        if not self.text.strip():
            raise ExprSyntaxError("empty expression", 0, self.text)
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos, self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            kind, text, _ = self.peek()
            # A minus directly on a literal (not raised to a power) is a negative literal.
            if kind == "num" and self.tokens[self.i + 1][1] != "^":
                self.take()
                return num(-float(text))
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, text, pos = self.take()
            if kind != "num" or not re.fullmatch(r"\d+", text):
                raise ExprSyntaxError("exponent must be an integer literal", pos, self.text)
            return Pow(base, sign * int(text))
        return base

    def primary(self):
        kind, text, pos = self.take()
        if kind == "num":
            return num(float(text))
        if kind == "ident":
            if text in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ArityError(f"function {text!r} requires one argument (position {pos})")
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            return self.identifier(text, pos)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", pos, self.text)

    def identifier(self, name, pos):
        if name in self.aliases:
            idx = self.aliases[name]
        elif re.fullmatch(r"x[1-9]", name):
            idx = int(name[1:]) - 1
        elif name in CONSTANTS:
            return num(CONSTANTS[name])
        else:
            raise UnknownIdentifierError(f"unknown identifier {name!r} at position {pos}")
        if self.dim is not None and idx >= self.dim:
            raise UnknownIdentifierError(
                f"coordinate {name!r} (index {idx + 1}) exceeds chart dimension {self.dim}")
        return Var(idx)


def parse(text: str, aliases=None, dim=None) -> Expression:
    """Parse ``text`` into an expression tree (no simplification).

    ``aliases`` maps extra identifiers to 0-based coordinate indices.
    """
    if "," in text:
        pos = text.index(",")
        raise ArityError(f"unexpected ',' at position {pos}: functions take one argument")
    return _Parser(text, aliases, dim).parse()


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(e):
    if isinstance(e, Num):
        return 3 if e.value < 0 else 5
    return _PREC.get(type(e), 5)


def to_string(e: Expression, names=None) -> str:
    def name_of(i):
        if names is not None:
            return names[i]
        return f"x{i + 1}"

    def go(node, min_prec):
        p = _prec(node)
        if isinstance(node, Num):
            s = repr(node.value)
            if s.endswith(".0"):
                s = s[:-2]
            s = s.replace("inf", "1e999")
        elif isinstance(node, Var):
            s = name_of(node.index)
        elif isinstance(node, Func):
            s = f"{node.name}({go(node.args[1], 0)})"
        elif isinstance(node, Neg):
            inner = node.args[0]
            s = "-" + (f"({go(inner, 0)})" if isinstance(inner, Num) else go(inner, 3))
        elif isinstance(node, Pow):
            s = f"{go(node.args[0], 5)}^{node.args[1]}"
        else:
            a, b = node.args
            op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(node)]
            s = f"{go(a, p)} {op} {go(b, p + 1)}" if op in "+-" else f"{go(a, p)}{op}{go(b, p + 1)}"
        return f"({s})" if p < min_prec else s

    return go(e, 0)


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

def differentiate(e: Expression, i: int) -> Expression:
    """Exact partial derivative with respect to coordinate ``i`` (0-based)."""
    cached = e._dcache.get(i)
    if cached is not None:
        return cached
    if isinstance(e, Num):
        d = ZERO
    elif isinstance(e, Var):
        d = ONE if e.index == i else ZERO
    elif i not in e.variables():
        d = ZERO
    elif isinstance(e, Neg):
        d = neg(differentiate(e.args[0], i))
    elif isinstance(e, Add):
        d = add(differentiate(e.args[0], i), differentiate(e.args[1], i))
    elif isinstance(e, Sub):
        d = sub(differentiate(e.args[0], i), differentiate(e.args[1], i))
    elif isinstance(e, Mul):
        a, b = e.args
        d = add(mul(differentiate(a, i), b), mul(a, differentiate(b, i)))
    elif isinstance(e, Div):
        a, b = e.args
        da, db = differentiate(a, i), differentiate(b, i)
        d = sub(div(da, b), div(mul(a, db), power(b, 2)))
    elif isinstance(e, Pow):
        base, k = e.args
        d = mul(mul(num(k), power(base, k - 1)), differentiate(base, i))
    elif isinstance(e, Func):
        name, u = e.args
        du = differentiate(u, i)
        outer = {
            "sin": lambda: func("cos", u),
            "cos": lambda: neg(func("sin", u)),
            "tan": lambda: div(ONE, power(func("cos", u), 2)),
            "exp": lambda: e,
            "log": lambda: div(ONE, u),
            "sqrt": lambda: div(ONE, mul(num(2.0), e)),
            "sinh": lambda: func("cosh", u),
            "cosh": lambda: func("sinh", u),
        }[name]()
        d = mul(outer, du)
    else:  # pragma: no cover
        raise ExprError(f"cannot differentiate {e!r}")
    e._dcache[i] = d
    return d


def simplify(e: Expression) -> Expression:
    """Rebuild ``e`` bottom-up through the simplifying constructors."""
    if isinstance(e, (Num, Var)):
        return e
    if isinstance(e, Func):
        return func(e.name, simplify(e.args[1]))
    if isinstance(e, Pow):
        return power(simplify(e.args[0]), e.args[1])
    if isinstance(e, Neg):
        return neg(simplify(e.args[0]))
    a, b = (simplify(x) for x in e.args)
    return {Add: add, Sub: sub, Mul: mul, Div: div}[type(e)](a, b)


# ---------------------------------------------------------------------------
# Compilation to straight-line numpy code
# ---------------------------------------------------------------------------

_NP_FUNCS = {name: f"np.{name}" for name in FUNCTIONS}


def compile_exprs(exprs):
    """Compile expressions into ``f(x) -> array`` evaluated with numpy.

    ``x`` has the coordinates on its first axis (shape ``(n,)`` or ``(n, ...)``);
    the result has shape ``(len(exprs),) + x.shape[1:]``.  Shared subtrees are
    evaluated once.
    """
    exprs = [as_expr(e) for e in exprs]
    names = {}
    lines = []
    nvars = 0

    def emit(root):
        nonlocal nvars
        stack = [(root, False)]
        while stack:
            node, ready = stack.pop()
            if id(node) in names:
                continue
            if not ready:
                stack.append((node, True))
                for c in node.children:
                    if id(c) not in names:
                        stack.append((c, False))
                continue
            if isinstance(node, Num):
                code = repr(node.value) if math.isfinite(node.value) else f"float({str(node.value)!r})"
            elif isinstance(node, Var):
                nvars = max(nvars, node.index + 1)
                code = f"x[{node.index}]"
            else:
                ch = [names[id(c)] for c in node.children]
                if isinstance(node, Neg):
                    code = f"-{ch[0]}"
                elif isinstance(node, Add):
                    code = f"{ch[0]} + {ch[1]}"
                elif isinstance(node, Sub):
                    code = f"{ch[0]} - {ch[1]}"
                elif isinstance(node, Mul):
                    code = f"{ch[0]} * {ch[1]}"
                elif isinstance(node, Div):
                    code = f"{ch[0]} / {ch[1]}"
                elif isinstance(node, Pow):
                    k = node.args[1]
                    code = f"{ch[0]} ** {k}" if k > 0 else f"1.0 / {ch[0]} ** {-k}"
                else:
                    code = f"{_NP_FUNCS[node.name]}({ch[0]})"
            name = f"t{len(names)}"
            names[id(node)] = name
            lines.append(f"    {name} = {code}")

    for e in exprs:
        emit(e)
    body = "\n".join(lines)
    outs = ", ".join(names[id(e)] for e in exprs)
    src = (
        "def _compiled(x):\n"
        f"{body}\n"
        f"    out = np.empty(({len(exprs)},) + np.shape(x)[1:])\n"
        f"    for k, v in enumerate(({outs},)):\n"
        "        out[k] = v\n"
        "    return out\n"
    )
    scope = {"np": np}
    with np.errstate(all="ignore"):
        exec(compile(src, "<hololab.expr>", "exec"), scope)
    fn = scope["_compiled"]
    fn.nvars = nvars
    fn.exprs = tuple(exprs)

    def wrapped(x):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return fn(np.asarray(x, dtype=float))

    wrapped.nvars = nvars
    return wrapped


def evaluate(e, point):
    return as_expr(e).evaluate(point)


def central_difference(e, i, point, h=1e-6):
    p = np.array(point, dtype=float)
    hi, lo = p.copy(), p.copy()
    hi[i] += h
    lo[i] -= h
    return (evaluate(e, hi) - evaluate(e, lo)) / (2 * h)
