"""Arithmetic expression language for problem maps.

Grammar (``^`` is right-associative, unary minus binds looser than ``^``)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | atom ('^' factor)?
    atom   := number | variable | function '(' expr ')' | '(' expr ')'

Variables are ``x1`` .. ``xn`` and, for time-dependent maps, ``t``.  The
constant ``pi`` is also accepted.  Functions: sin cos tan exp log sqrt abs.

Parsed trees are compiled to Python closures once, so evaluation is cheap
enough for ODE integration inside root finders.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .pairing import Norm, Space

__all__ = [
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "ExprSyntaxError",
    "EvalError",
    "FUNCTIONS",
    "parse",
    "to_text",
    "evaluate",
    "MapSpec",
    "eval_map",
    "call_map",
    "jacobian_fd",
    "operator_norm",
    "lipschitz_estimate",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")
CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # "x<k>" or "t"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvalError(ArithmeticError):
    def __init__(self, message: str, component: Optional[int] = None):
        where = f"component {component}: " if component is not None else ""
        super().__init__(where + message)
        self.component = component


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append((kind, m.group(), pos))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, dim: int, allow_t: bool):
        self.toks = _tokenize(text)
        self.i = 0
        self.dim = dim
        self.allow_t = allow_t

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            what = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {what}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.factor())
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in CONSTANTS:
                return Num(CONSTANTS[text])
            if text == "t":
                if not self.allow_t:
                    raise ExprSyntaxError("variable 't' needs a time-dependent map", pos)
                return Var("t")
            m = re.fullmatch(r"x([1-9]\d*)", text)
            if m is None:
                raise ExprSyntaxError(f"unknown identifier {text!r}", pos)
            if int(m.group(1)) > self.dim:
                raise ExprSyntaxError(f"variable {text} out of range for dimension {self.dim}", pos)
            return Var(text)
        if (kind, text) == ("op", "("):
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {what}", pos)


def parse(text: str, dim: int, time_dependent: bool = False) -> Expr:
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text, dim, time_dependent).parse()


# precedence levels: 1 additive, 2 multiplicative, 3 unary minus, 4 power, 5 atom
def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}[e.op]
    if isinstance(e, Neg):
        return 3
    return 5


def _num_text(v: float) -> str:
    s = repr(float(v))
    if s in ("inf", "nan"):
        raise ValueError(f"cannot print non-finite literal {s}")
    return s


def to_text(e: Expr) -> str:
    """Pretty-print with the minimal parentheses that re-parse to the same tree."""
    if isinstance(e, Num):
        if e.value < 0 or math.copysign(1.0, e.value) < 0:
            return f"(-{_num_text(-e.value)})"
        return _num_text(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.arg)
        return "-" + (inner if _prec(e.arg) >= 3 else f"({inner})")
    p = _prec(e)
    left, right = to_text(e.left), to_text(e.right)
    if e.op == "^":
        if _prec(e.left) < 5:
            left = f"({left})"
        if _prec(e.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(e.left) < p:
        left = f"({left})"
    # a factor may be a unary minus; a term never starts mid-sum
    if _prec(e.right) <= p and not (p == 2 and isinstance(e.right, Neg)):
        right = f"({right})"
    if p == 1 and isinstance(e.right, Neg):
        right = f"({right})"
    return f"{left} {e.op} {right}"


def _div(a, b):
    if b == 0:
        raise ZeroDivisionError("division by zero")
    return a / b


def _pow(a, b):
    return math.pow(a, b)


def _log(a):
    if a <= 0:
        raise ValueError("log of a non-positive number")
    return math.log(a)


def _sqrt(a):
    if a < 0:
        raise ValueError("sqrt of a negative number")
    return math.sqrt(a)


_NAMESPACE = {
    "__builtins__": {},
    "_div": _div,
    "_pow": _pow,
    "_sin": math.sin,
    "_cos": math.cos,
    "_tan": math.tan,
    "_exp": math.exp,
    "_log": _log,
    "_sqrt": _sqrt,
    "_abs": abs,
}


def _py(e: Expr) -> str:
    if isinstance(e, Num):
        return f"({float(e.value)!r})"
    if isinstance(e, Var):
        return "t" if e.name == "t" else f"x[{int(e.name[1:]) - 1}]"
    if isinstance(e, Neg):
        return f"(-{_py(e.arg)})"
    if isinstance(e, Call):
        return f"_{e.fn}({_py(e.arg)})"
    if e.op == "/":
        return f"_div({_py(e.left)}, {_py(e.right)})"
    if e.op == "^":
        return f"_pow({_py(e.left)}, {_py(e.right)})"
    return f"({_py(e.left)} {e.op} {_py(e.right)})"


def _compile(e: Expr) -> Callable:
    return eval(f"lambda x, t: {_py(e)}", dict(_NAMESPACE))


def evaluate(e: Expr, x: Sequence[float] = (), t: Optional[float] = None) -> float:
    """Evaluate a single tree by direct recursion (reference path, no compilation)."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if e.name == "t":
            if t is None:
                raise EvalError("t is not bound")
            return float(t)
        return float(x[int(e.name[1:]) - 1])
    try:
        if isinstance(e, Neg):
            return -evaluate(e.arg, x, t)
        if isinstance(e, Call):
            return _NAMESPACE["_" + e.fn](evaluate(e.arg, x, t))
        a, b = evaluate(e.left, x, t), evaluate(e.right, x, t)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            return _div(a, b)
        return _pow(a, b)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise EvalError(str(exc)) from None


class MapSpec:
    """An immutable vector field R^n -> R^m given by expression components.

    Instances are callable: ``m(x)`` or ``m(x, t)`` for time-dependent maps.
    """

    __slots__ = ("dim_in", "dim_out", "components", "time_dependent", "_fns")

    def __init__(self, components: Sequence[Expr], dim_in: int, time_dependent: bool = False):
        if dim_in < 1 or not components:
            raise ValueError("a map needs dim_in >= 1 and at least one component")
        for e in components:
            _check_vars(e, dim_in, time_dependent)
        object.__setattr__(self, "components", tuple(components))
        object.__setattr__(self, "dim_in", int(dim_in))
        object.__setattr__(self, "dim_out", len(components))
        object.__setattr__(self, "time_dependent", bool(time_dependent))
        object.__setattr__(self, "_fns", tuple(_compile(e) for e in components))

    def __setattr__(self, name, value):
        raise AttributeError("MapSpec is immutable")

    @classmethod
    def from_strings(cls, texts: Sequence[str], dim_in: int, time_dependent: bool = False) -> "MapSpec":
        return cls([parse(s, dim_in, time_dependent) for s in texts], dim_in, time_dependent)

    def texts(self) -> list[str]:
        return [to_text(e) for e in self.components]

    def __repr__(self):
        return f"MapSpec({self.texts()!r}, dim_in={self.dim_in}, time_dependent={self.time_dependent})"

    def __call__(self, x, t: Optional[float] = None) -> np.ndarray:
        return eval_map(self, x, t)


def _check_vars(e: Expr, dim: int, allow_t: bool):
    if isinstance(e, Var):
        if e.name == "t":
            if not allow_t:
                raise ValueError("t used in a map that is not time-dependent")
        elif int(e.name[1:]) > dim:
            raise ValueError(f"{e.name} exceeds dimension {dim}")
    elif isinstance(e, (Neg, Call)):
        _check_vars(e.arg, dim, allow_t)
    elif isinstance(e, BinOp):
        _check_vars(e.left, dim, allow_t)
        _check_vars(e.right, dim, allow_t)


def eval_map(m: MapSpec, x, t: Optional[float] = None) -> np.ndarray:
    xs = np.asarray(x, dtype=float).reshape(-1)
    if xs.size != m.dim_in:
        raise ValueError(f"expected {m.dim_in} inputs, got {xs.size}")
    if m.time_dependent and t is None:
        raise ValueError("time-dependent map needs t")
    if not m.time_dependent and t is not None:
        raise ValueError("t given to a map that is not time-dependent")
    xl = xs.tolist()
    tf = None if t is None else float(t)
    out = np.empty(m.dim_out)
    for k, fn in enumerate(m._fns):
        try:
            v = fn(xl, tf)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvalError(str(exc), k + 1) from None
        if not math.isfinite(v):
            raise EvalError("non-finite result", k + 1)
        out[k] = v
    return out


def call_map(f: Callable, x, t: Optional[float] = None) -> np.ndarray:
    """Evaluate a MapSpec or plain callable uniformly, returning a float vector."""
    if not isinstance(f, MapSpec):
        x = np.asarray(x, dtype=float)
    if t is None:
        return np.asarray(f(x), dtype=float).reshape(-1)
    return np.asarray(f(x, t), dtype=float).reshape(-1)


def jacobian_fd(f: Callable, x, t: Optional[float] = None, h: Optional[float] = None) -> np.ndarray:
    """Central-difference Jacobian; default step ``1e-6 * (1 + |x|_inf)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if h is None:
        h = 1e-6 * (1.0 + float(np.max(np.abs(x))))
    if not h > 0:
        raise ValueError("h must be positive")
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((call_map(f, x + e, t) - call_map(f, x - e, t)) / (2.0 * h))
    return np.stack(cols, axis=1)


def operator_norm(a: np.ndarray, space: Optional[Space] = None) -> float:
    """Induced matrix norm; l_inf (max row sum) when no space is given.

    For l_p with 1 < p < inf, p != 2, the Riesz-Thorin bound
    ``|A|_1^(1/p) |A|_inf^(1-1/p)`` is returned (an upper bound).
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    nrm = Norm.LINF if space is None else space.norm
    if nrm is Norm.LINF:
        return float(np.max(np.sum(np.abs(a), axis=1)))
    if nrm is Norm.L1:
        return float(np.max(np.sum(np.abs(a), axis=0)))
    if nrm is Norm.L2:
        return float(np.linalg.norm(a, 2))
    p = space.p
    one = float(np.max(np.sum(np.abs(a), axis=0)))
    inf = float(np.max(np.sum(np.abs(a), axis=1)))
    return one ** (1.0 / p) * inf ** (1.0 - 1.0 / p)


def lipschitz_estimate(
    m: Callable,
    domain,
    grid: int,
    inflation: float = 1.25,
    space: Optional[Space] = None,
    t: Optional[float] = None,
    override: Optional[float] = None,
) -> float:
    """Sampled Lipschitz ESTIMATE: ``inflation * max |J(x)|`` over a ``grid^n`` lattice.

    This is not a bound.  Pass ``override`` with a hand-proved constant to
    skip sampling entirely.
    """
    if override is not None:
        if override < 0:
            raise ValueError("Lipschitz constant must be non-negative")
        return float(override)
    if grid < 2:
        raise ValueError("grid must be >= 2")
    if inflation < 1:
        raise ValueError("inflation must be >= 1")
    from .geometry import lattice

    if grid ** domain.dim > 2_000_000:
        raise ValueError("lattice too large; lower grid or pass override")
    best = 0.0
    for p in lattice(domain, grid):
        best = max(best, operator_norm(jacobian_fd(m, p, t), space))
    return inflation * best
