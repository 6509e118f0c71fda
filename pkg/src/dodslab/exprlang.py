"""Small expression language for scalar fields of named variables.

Grammar (also documented in docs/grammar.md):

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , [ "^" , unary ] ;           (* right associative *)
    atom    = NUMBER | NAME | NAME "(" expr {"," expr} ")" | "(" expr ")" ;

"^" binds tighter than unary minus, so -x^2 parses as -(x^2).  There is no
implicit multiplication and whitespace is insignificant.  Known functions:
exp, log, sin, cos, tan, atan, atan2, sqrt, abs, sign.  Named constants pi
and e fold to literals at parse time.

Evaluation is plain IEEE double arithmetic.  In unchecked mode non-finite
values propagate; in checked mode domain violations raise DomainError.
Power with a negative base requires a (near-)integer exponent, detected by
|e - round(e)| < 1e-12; 0 raised to a negative power is always a domain
error.  Forward-mode automatic differentiation is provided through dual
numbers (first order) and truncated Taylor triples (second order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, ExprSyntaxError, UnboundVariable, UnknownIdentifier

__all__ = [
    "Expr", "Num", "Var", "Neg", "BinOp", "Call",
    "parse", "evaluate", "unparse", "substitute", "variables_of",
    "Dual", "Dual2", "diff_eval", "diff2_eval", "gradient",
    "compile_scalar",
    "num", "var", "add", "sub", "mul", "div", "powx", "neg", "call",
]

FUNCTION_ARITY = {
    "exp": 1, "log": 1, "sin": 1, "cos": 1, "tan": 1,
    "atan": 1, "atan2": 2, "sqrt": 1, "abs": 1, "sign": 1,
}

CONSTANTS = {"pi": math.pi, "e": math.e}

_INT_EXP_TOL = 1e-12


# ---------------------------------------------------------------------------
# AST


class Expr:
    """Base class for AST nodes.  Nodes are immutable after construction."""

    __slots__ = ()


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * / ^
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple


# Convenience constructors used when building expressions programmatically.

def num(v):
    return Num(float(v))


def var(name):
    return Var(name)


def add(a, b):
    return BinOp("+", a, b)


def sub(a, b):
    return BinOp("-", a, b)


def mul(a, b):
    return BinOp("*", a, b)


def div(a, b):
    return BinOp("/", a, b)


def powx(a, b):
    return BinOp("^", a, b)


def neg(a):
    return Neg(a)


def call(func, *args):
    if func not in FUNCTION_ARITY:
        raise UnknownIdentifier(func)
    if len(args) != FUNCTION_ARITY[func]:
        raise ExprSyntaxError(f"{func} expects {FUNCTION_ARITY[func]} argument(s)", 0)
    return Call(func, tuple(args))


# ---------------------------------------------------------------------------
# Tokenizer


_OPS = "+-*/^(),"


def _tokenize(source):
    tokens = []  # (kind, value, offset)
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPS:
            tokens.append((c, c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                value = float(text)
            except ValueError:
                raise ExprSyntaxError(f"bad number literal {text!r}", i)
            tokens.append(("num", value, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("name", source[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(("end", None, n))
    return tokens


# ---------------------------------------------------------------------------
# Parser (precedence climbing)

_BIN_BP = {"+": (10, 11), "-": (10, 11), "*": (20, 21), "/": (20, 21), "^": (40, 40)}
_UNARY_BP = 30  # between * / and ^, so -x^2 == -(x^2) and -x*y == (-x)*y


class _Parser:
    def __init__(self, tokens, variables):
        self.tokens = tokens
        self.pos = 0
        self.variables = frozenset(variables)

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.advance()
        if tok[0] != kind:
            raise ExprSyntaxError(f"expected {kind!r}, found {tok[0]!r}", tok[2])
        return tok

    def parse_expr(self, min_bp=0):
        lhs = self.parse_atom()
        while True:
            kind, _, offset = self.peek()
            if kind not in _BIN_BP:
                break
            lbp, rbp = _BIN_BP[kind]
            if lbp < min_bp:
                break
            self.advance()
            # "^" is right associative: recurse with the same binding power;
            # the exponent is allowed to start with a unary minus.
            rhs = self.parse_expr(rbp)
            lhs = BinOp(kind, lhs, rhs)
        return lhs

    def parse_atom(self):
        kind, value, offset = self.advance()
        if kind == "num":
            return Num(value)
        if kind == "-":
            return Neg(self.parse_expr(_UNARY_BP))
        if kind == "(":
            inner = self.parse_expr(0)
            self.expect(")")
            return inner
        if kind == "name":
            if self.peek()[0] == "(":
                if value not in FUNCTION_ARITY:
                    raise UnknownIdentifier(value, offset)
                self.advance()
                args = [self.parse_expr(0)]
                while self.peek()[0] == ",":
                    self.advance()
                    args.append(self.parse_expr(0))
                self.expect(")")
                if len(args) != FUNCTION_ARITY[value]:
                    raise ExprSyntaxError(
                        f"{value} expects {FUNCTION_ARITY[value]} argument(s),"
                        f" got {len(args)}", offset)
                return Call(value, tuple(args))
            if value in self.variables:
                return Var(value)
            if value in CONSTANTS:
                return Num(CONSTANTS[value])
            raise UnknownIdentifier(value, offset)
        raise ExprSyntaxError(f"unexpected token {kind!r}", offset)


def parse(source, variables=()):
    """Parse ``source`` into an Expr.  Every name must be a declared variable,
    a known function, or the constants pi / e."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    parser = _Parser(_tokenize(source), variables)
    expr = parser.parse_expr(0)
    kind, _, offset = parser.peek()
    if kind != "end":
        raise ExprSyntaxError(f"trailing input starting with {kind!r}", offset)
    return expr


# ---------------------------------------------------------------------------
# Numeric kernels shared by interpreted and compiled evaluation.
# checked=True turns domain violations into DomainError instead of IEEE
# specials; both paths produce bit-identical values when no error fires.


def _k_div(a, b, checked):
    if b == 0.0:
        if checked:
            raise DomainError("division by zero")
        if a == 0.0 or a != a:
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def _k_log(x, checked):
    if x > 0.0:
        return math.log(x)
    if checked:
        raise DomainError(f"log of non-positive value {x}")
    return -math.inf if x == 0.0 else math.nan


def _k_sqrt(x, checked):
    if x >= 0.0:
        return math.sqrt(x)
    if checked:
        raise DomainError(f"sqrt of negative value {x}")
    return math.nan


def _k_pow(b, e, checked):
    if not (math.isfinite(b) and math.isfinite(e)):
        if checked:
            raise DomainError(f"non-finite operand in power: {b} ^ {e}")
        try:
            return float(b) ** float(e)
        except (OverflowError, ValueError, ZeroDivisionError):
            return math.nan
    r = round(e)
    if abs(e - r) < _INT_EXP_TOL:
        if b == 0.0 and r < 0:
            raise DomainError("0 raised to a negative power")
        try:
            return float(b) ** int(r)
        except OverflowError:
            return math.inf if (b > 1 or (b < -1 and int(r) % 2 == 0)) else -math.inf
    if b < 0.0:
        raise DomainError(
            f"negative base {b} with non-integer exponent {e}")
    if b == 0.0 and e < 0:
        raise DomainError("0 raised to a negative power")
    return b ** e


def _k_tan(x):
    return math.tan(x)


def _sign(x):
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


# ---------------------------------------------------------------------------
# Dual numbers (first order forward AD)


class Dual:
    """Value plus derivative along one seeded direction."""

    __slots__ = ("value", "partial")

    def __init__(self, value, partial=0.0):
        self.value = value
        self.partial = partial

    def __repr__(self):
        return f"Dual({self.value}, {self.partial})"

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        o = _as_dual(other)
        return Dual(self.value + o.value, self.partial + o.partial)

    __radd__ = __add__

    def __sub__(self, other):
        o = _as_dual(other)
        return Dual(self.value - o.value, self.partial - o.partial)

    def __rsub__(self, other):
        o = _as_dual(other)
        return Dual(o.value - self.value, o.partial - self.partial)

    def __mul__(self, other):
        o = _as_dual(other)
        return Dual(self.value * o.value,
                    self.value * o.partial + self.partial * o.value)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _as_dual(other)
        v = _k_div(self.value, o.value, False)
        d = _k_div(self.partial * o.value - self.value * o.partial,
                   o.value * o.value, False)
        return Dual(v, d)

    def __rtruediv__(self, other):
        return _as_dual(other).__truediv__(self)

    def __neg__(self):
        return Dual(-self.value, -self.partial)


def _as_dual(x):
    return x if isinstance(x, Dual) else Dual(float(x), 0.0)


class Dual2:
    """Truncated Taylor triple (f, f', f'') along one direction."""

    __slots__ = ("value", "d1", "d2")

    def __init__(self, value, d1=0.0, d2=0.0):
        self.value = value
        self.d1 = d1
        self.d2 = d2

    def __repr__(self):
        return f"Dual2({self.value}, {self.d1}, {self.d2})"

    def __add__(self, other):
        o = _as_dual2(other)
        return Dual2(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __sub__(self, other):
        o = _as_dual2(other)
        return Dual2(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2)

    def __rsub__(self, other):
        o = _as_dual2(other)
        return Dual2(o.value - self.value, o.d1 - self.d1, o.d2 - self.d2)

    def __mul__(self, other):
        o = _as_dual2(other)
        return Dual2(self.value * o.value,
                     self.value * o.d1 + self.d1 * o.value,
                     self.value * o.d2 + 2.0 * self.d1 * o.d1 + self.d2 * o.value)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _as_dual2(other)
        v = _k_div(self.value, o.value, False)
        d1 = _k_div(self.d1 - v * o.d1, o.value, False)
        d2 = _k_div(self.d2 - 2.0 * d1 * o.d1 - v * o.d2, o.value, False)
        return Dual2(v, d1, d2)

    def __rtruediv__(self, other):
        return _as_dual2(other).__truediv__(self)

    def __neg__(self):
        return Dual2(-self.value, -self.d1, -self.d2)


def _as_dual2(x):
    return x if isinstance(x, Dual2) else Dual2(float(x), 0.0, 0.0)


def _chain1(x, f, df):
    """Lift a scalar function with known derivative to Dual."""
    return Dual(f, df * x.partial)


def _chain2(x, f, df, d2f):
    """Lift to Dual2 via f(g), f'(g)g', f''(g)g'^2 + f'(g)g''."""
    return Dual2(f, df * x.d1, d2f * x.d1 * x.d1 + df * x.d2)


# Per-function evaluation for each numeric type.  ``checked`` only matters
# for the plain-float path; dual paths follow unchecked float semantics on
# the value part (deriving through a domain edge raises either way through
# the kernels used on .value).

def _fn_eval(name, args, checked):
    if any(isinstance(a, Dual2) for a in args):
        return _FN_DUAL2[name](*[_as_dual2(a) for a in args])
    if any(isinstance(a, Dual) for a in args):
        return _FN_DUAL[name](*[_as_dual(a) for a in args])
    return _FN_FLOAT[name](*args, checked)


_FN_FLOAT = {
    "exp": lambda x, c: math.exp(x) if x < 709.0 else math.inf,
    "log": lambda x, c: _k_log(x, c),
    "sin": lambda x, c: math.sin(x),
    "cos": lambda x, c: math.cos(x),
    "tan": lambda x, c: _k_tan(x),
    "atan": lambda x, c: math.atan(x),
    "atan2": lambda y, x, c: math.atan2(y, x),
    "sqrt": lambda x, c: _k_sqrt(x, c),
    "abs": lambda x, c: abs(x),
    "sign": lambda x, c: _sign(x),
}


def _dual_exp(x):
    v = math.exp(x.value) if x.value < 709.0 else math.inf
    return _chain1(x, v, v)


def _dual_log(x):
    return _chain1(x, _k_log(x.value, False), _k_div(1.0, x.value, False))


def _dual_sqrt(x):
    v = _k_sqrt(x.value, False)
    return _chain1(x, v, _k_div(0.5, v, False))


def _dual_atan2(y, x):
    y, x = _as_dual(y), _as_dual(x)
    r2 = x.value * x.value + y.value * y.value
    return Dual(math.atan2(y.value, x.value),
                _k_div(x.value * y.partial - y.value * x.partial, r2, False))


_FN_DUAL = {
    "exp": _dual_exp,
    "log": _dual_log,
    "sin": lambda x: _chain1(x, math.sin(x.value), math.cos(x.value)),
    "cos": lambda x: _chain1(x, math.cos(x.value), -math.sin(x.value)),
    "tan": lambda x: _chain1(x, math.tan(x.value),
                             1.0 + math.tan(x.value) ** 2),
    "atan": lambda x: _chain1(x, math.atan(x.value),
                              1.0 / (1.0 + x.value * x.value)),
    "atan2": _dual_atan2,
    "sqrt": _dual_sqrt,
    "abs": lambda x: _chain1(x, abs(x.value), _sign(x.value)),
    "sign": lambda x: _chain1(x, _sign(x.value), 0.0),
}


def _dual2_exp(x):
    v = math.exp(x.value) if x.value < 709.0 else math.inf
    return _chain2(x, v, v, v)


def _dual2_log(x):
    iv = _k_div(1.0, x.value, False)
    return _chain2(x, _k_log(x.value, False), iv, -iv * iv)


def _dual2_sqrt(x):
    v = _k_sqrt(x.value, False)
    dv = _k_div(0.5, v, False)
    return _chain2(x, v, dv, _k_div(-0.25, v * x.value, False))


def _dual2_atan2(y, x):
    y, x = _as_dual2(y), _as_dual2(x)
    # atan2(y, x) composed as atan(y/x) with quadrant fix in the value only;
    # derivatives of atan2 and atan(y/x) agree away from x = 0.
    r2 = x.value * x.value + y.value * y.value
    v = math.atan2(y.value, x.value)
    num1 = x.value * y.d1 - y.value * x.d1
    d1 = _k_div(num1, r2, False)
    dnum = x.value * y.d2 - y.value * x.d2
    dr2 = 2.0 * (x.value * x.d1 + y.value * y.d1)
    d2 = _k_div(dnum * r2 - num1 * dr2, r2 * r2, False)
    return Dual2(v, d1, d2)


_FN_DUAL2 = {
    "exp": _dual2_exp,
    "log": _dual2_log,
    "sin": lambda x: _chain2(x, math.sin(x.value), math.cos(x.value),
                             -math.sin(x.value)),
    "cos": lambda x: _chain2(x, math.cos(x.value), -math.sin(x.value),
                             -math.cos(x.value)),
    "tan": lambda x: _chain2(x, math.tan(x.value), 1.0 + math.tan(x.value) ** 2,
                             2.0 * math.tan(x.value) * (1.0 + math.tan(x.value) ** 2)),
    "atan": lambda x: _chain2(x, math.atan(x.value),
                              1.0 / (1.0 + x.value * x.value),
                              -2.0 * x.value / (1.0 + x.value * x.value) ** 2),
    "atan2": _dual2_atan2,
    "sqrt": _dual2_sqrt,
    "abs": lambda x: _chain2(x, abs(x.value), _sign(x.value), 0.0),
    "sign": lambda x: _chain2(x, _sign(x.value), 0.0, 0.0),
}


def _pow_any(b, e, checked):
    """Power for float/Dual/Dual2 operands with the language's semantics."""
    if isinstance(b, Dual) or isinstance(e, Dual):
        bd, ed = _as_dual(b), _as_dual(e)
        if not (math.isfinite(bd.value) and math.isfinite(ed.value)):
            raise DomainError("non-finite operand in power during AD")
        r = round(ed.value)
        if ed.partial == 0.0 and abs(ed.value - r) < _INT_EXP_TOL:
            n = int(r)
            if bd.value == 0.0 and n < 0:
                raise DomainError("0 raised to a negative power")
            try:
                v = float(bd.value) ** n
                dv = 0.0 if n == 0 else n * (float(bd.value) ** (n - 1)) * bd.partial
            except OverflowError:
                raise DomainError("overflow in power during AD")
            return Dual(v, dv)
        if bd.value <= 0.0:
            raise DomainError(
                f"negative or zero base {bd.value} with non-integer exponent")
        return _dual_exp(ed * _dual_log(bd))
    if isinstance(b, Dual2) or isinstance(e, Dual2):
        bd, ed = _as_dual2(b), _as_dual2(e)
        if not (math.isfinite(bd.value) and math.isfinite(ed.value)):
            raise DomainError("non-finite operand in power during AD")
        r = round(ed.value)
        if ed.d1 == 0.0 and ed.d2 == 0.0 and abs(ed.value - r) < _INT_EXP_TOL:
            n = int(r)
            if bd.value == 0.0 and n < 0:
                raise DomainError("0 raised to a negative power")
            try:
                v = float(bd.value) ** n
                d1 = 0.0 if n == 0 else n * float(bd.value) ** (n - 1)
                d2 = 0.0 if n in (0, 1) else n * (n - 1) * float(bd.value) ** (n - 2)
            except OverflowError:
                raise DomainError("overflow in power during AD")
            return _chain2(bd, v, d1, d2)
        if bd.value <= 0.0:
            raise DomainError(
                f"negative or zero base {bd.value} with non-integer exponent")
        return _dual2_exp(ed * _dual2_log(bd))
    return _k_pow(b, e, checked)


def _div_any(a, b, checked):
    if isinstance(a, (Dual, Dual2)) or isinstance(b, (Dual, Dual2)):
        return a / b if isinstance(a, (Dual, Dual2)) else \
            (_as_dual(a) / b if isinstance(b, Dual) else _as_dual2(a) / b)
    return _k_div(a, b, checked)


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(expr, env, checked=False):
    """Evaluate ``expr`` with variable bindings from ``env``.

    ``env`` values may be floats, Dual, or Dual2; the result has the widest
    type present.  In checked mode (floats only) domain violations and
    non-finite results raise DomainError.
    """
    result = _eval(expr, env, checked)
    if checked and isinstance(result, float) and not math.isfinite(result):
        raise DomainError(f"non-finite result {result}")
    return result


def _eval(node, env, checked):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundVariable(f"no value bound for variable {node.name!r}")
    if isinstance(node, Neg):
        return -_eval(node.operand, env, checked)
    if isinstance(node, BinOp):
        a = _eval(node.left, env, checked)
        b = _eval(node.right, env, checked)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return _div_any(a, b, checked)
        return _pow_any(a, b, checked)
    if isinstance(node, Call):
        args = [_eval(a, env, checked) for a in node.args]
        return _fn_eval(node.func, args, checked)
    raise TypeError(f"not an Expr node: {node!r}")


def diff_eval(expr, env, direction):
    """Forward-mode value and exact partial with respect to ``direction``."""
    dual_env = {k: Dual(float(v), 1.0 if k == direction else 0.0)
                for k, v in env.items()}
    if direction not in env:
        raise UnboundVariable(f"direction {direction!r} is not bound in env")
    out = evaluate(expr, dual_env)
    out = _as_dual(out)
    return out.value, out.partial


def gradient(expr, env, wrt):
    """Partials with respect to each name in ``wrt`` (list of floats)."""
    return [diff_eval(expr, env, name)[1] for name in wrt]


def diff2_eval(expr, env, direction):
    """Value, first and second derivative along ``direction``."""
    env2 = {k: Dual2(float(v), 1.0 if k == direction else 0.0, 0.0)
            for k, v in env.items()}
    if direction not in env:
        raise UnboundVariable(f"direction {direction!r} is not bound in env")
    out = _as_dual2(evaluate(expr, env2))
    return out.value, out.d1, out.d2


# ---------------------------------------------------------------------------
# Structural helpers


def variables_of(expr):
    """Set of variable names referenced by the expression."""
    out = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Neg):
            stack.append(node.operand)
        elif isinstance(node, BinOp):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Call):
            stack.extend(node.args)
    return out


def substitute(expr, mapping):
    """Replace variables by numbers or other Exprs; returns a new Expr."""
    if isinstance(expr, Var):
        if expr.name in mapping:
            repl = mapping[expr.name]
            return repl if isinstance(repl, Expr) else Num(float(repl))
        return expr
    if isinstance(expr, Neg):
        return Neg(substitute(expr.operand, mapping))
    if isinstance(expr, BinOp):
        return BinOp(expr.op, substitute(expr.left, mapping),
                     substitute(expr.right, mapping))
    if isinstance(expr, Call):
        return Call(expr.func, tuple(substitute(a, mapping) for a in expr.args))
    return expr


_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40, "neg": 30}


def unparse(expr):
    """Render back to source text that reparses to an equivalent AST."""
    return _unparse(expr, 0)


def _unparse(node, parent_prec):
    if isinstance(node, Num):
        v = node.value
        if v < 0 or (v == 0 and math.copysign(1.0, v) < 0):
            text = repr(v)
            return f"({text})" if parent_prec > 0 else text
        return repr(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = _unparse(node.operand, _PREC["neg"])
        text = f"-{inner}"
        return f"({text})" if parent_prec > _PREC["neg"] else text
    if isinstance(node, BinOp):
        prec = _PREC[node.op]
        if node.op == "^":
            left = _unparse(node.left, prec + 1)
            right = _unparse(node.right, prec)
        else:
            left = _unparse(node.left, prec)
            right = _unparse(node.right, prec + 1)
        text = f"{left} {node.op} {right}"
        return f"({text})" if prec < parent_prec else text
    if isinstance(node, Call):
        args = ", ".join(_unparse(a, 0) for a in node.args)
        return f"{node.func}({args})"
    raise TypeError(f"not an Expr node: {node!r}")


# ---------------------------------------------------------------------------
# Compilation to a plain Python callable (unchecked float semantics).  Used
# on solver hot paths; shares the numeric kernels so results are bit-for-bit
# identical with the interpreter.


def compile_scalar(expr, argnames):
    """Compile to ``f(*args) -> float`` with positional ``argnames``."""
    argnames = list(argnames)
    missing = variables_of(expr) - set(argnames)
    if missing:
        raise UnboundVariable(f"expression uses undeclared argument(s) {sorted(missing)}")
    body = _emit(expr, {name: f"_a{i}" for i, name in enumerate(argnames)})
    params = ", ".join(f"_a{i}" for i in range(len(argnames)))
    source = f"def _compiled({params}):\n    return {body}\n"
    namespace = {
        "_div": lambda a, b: _k_div(a, b, False),
        "_pow": lambda a, b: _k_pow(a, b, False),
        "_log": lambda x: _k_log(x, False),
        "_sqrt": lambda x: _k_sqrt(x, False),
        "_exp": _FN_FLOAT["exp"],
        "_sign": _sign,
        "math": math,
    }
    exec(source, namespace)  # noqa: S102 - generated from a closed AST
    fn = namespace["_compiled"]
    fn.expr = expr
    fn.argnames = tuple(argnames)
    return fn


_EMIT_FN = {
    "exp": "_exp({0}, False)", "log": "_log({0})", "sqrt": "_sqrt({0})",
    "sin": "math.sin({0})", "cos": "math.cos({0})", "tan": "math.tan({0})",
    "atan": "math.atan({0})", "atan2": "math.atan2({0}, {1})",
    "abs": "abs({0})", "sign": "_sign({0})",
}


def _emit(node, names):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return names[node.name]
    if isinstance(node, Neg):
        return f"(-{_emit(node.operand, names)})"
    if isinstance(node, BinOp):
        a = _emit(node.left, names)
        b = _emit(node.right, names)
        if node.op == "/":
            return f"_div({a}, {b})"
        if node.op == "^":
            return f"_pow({a}, {b})"
        return f"({a} {node.op} {b})"
    if isinstance(node, Call):
        args = [_emit(a, names) for a in node.args]
        return _EMIT_FN[node.func].format(*args)
    raise TypeError(f"not an Expr node: {node!r}")
