"""Right-hand-side expressions f(y, u, Du) with exact first derivatives.

A small recursive-descent parser builds an immutable AST over the seven
variables y1, y2, y3, u, p1, p2, p3; `partial` differentiates the tree
symbolically (first order only) and runs a constant-folding pass so the
derivative trees stay cheap to evaluate on whole grids at once.

Grammar, loosest to tightest binding:

    expr   := term  (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # exponent must fold to an integer
    atom   := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'

Evaluation is vectorized: variables may be bound to scalars or to numpy
arrays of a common shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

VARIABLES = ("y1", "y2", "y3", "u", "p1", "p2", "p3")
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")

Number = Union[float, np.ndarray]


class FParseError(ValueError):
    """Syntax or identifier error; carries the byte offset into the source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class FEvalError(ValueError):
    """Domain error during evaluation; names the offending subexpression."""

    def __init__(self, message: str, subexpr: str, first_bad: int | None = None):
        super().__init__(f"{message} in '{subexpr}'")
        self.subexpr = subexpr
        self.first_bad = first_bad


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    child: "FExpr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "FExpr"
    right: "FExpr"


@dataclass(frozen=True)
class Pow:
    base: "FExpr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "FExpr"


FExpr = Union[Const, Var, Neg, BinOp, Pow, Call]


@dataclass(frozen=True)
class FPoint:
    """Evaluation point: physical coordinates y, value z, gradient p."""

    y: tuple[float, float, float]
    z: float
    p: tuple[float, float, float]

    def env(self) -> dict[str, float]:
        return {
            "y1": self.y[0],
            "y2": self.y[1],
            "y3": self.y[2],
            "u": self.z,
            "p1": self.p[0],
            "p2": self.p[1],
            "p3": self.p[2],
        }


# ---------------------------------------------------------------------------
# Tokenizer / parser


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0

    def _skip_ws(self) -> None:
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str:
        self._skip_ws()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def _expect(self, ch: str) -> None:
        if self._peek() != ch:
            raise FParseError(f"expected '{ch}'", self.pos)
        self.pos += 1

    def parse(self) -> FExpr:
        node = self._expr()
        if self._peek() != "":
            raise FParseError(f"unexpected character {self._peek()!r}", self.pos)
        return node

    def _expr(self) -> FExpr:
        node = self._term()
        while self._peek() in ("+", "-"):
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self._term())
        return node

    def _term(self) -> FExpr:
        node = self._unary()
        while self._peek() in ("*", "/"):
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self._unary())
        return node

    def _unary(self) -> FExpr:
        if self._peek() == "-":
            self.pos += 1
            child = self._unary()
            # fold a leading minus into numeric literals so that printing
            # a negative constant round-trips to the same tree
            if isinstance(child, Const):
                return Const(-child.value)
            return Neg(child)
        return self._power()

    def _power(self) -> FExpr:
        base = self._atom()
        if self._peek() == "^":
            self.pos += 1
            at = self.pos
            exponent = self._unary()
            exponent = fold(exponent)
            if not isinstance(exponent, Const) or exponent.value != int(exponent.value):
                raise FParseError("exponent must be an integer constant", at)
            return Pow(base, int(exponent.value))
        return base

    def _atom(self) -> FExpr:
        ch = self._peek()
        if ch == "(":
            self.pos += 1
            node = self._expr()
            self._expect(")")
            return node
        if ch.isdigit() or ch == ".":
            return self._number()
        if ch.isalpha() or ch == "_":
            return self._ident()
        if ch == "":
            raise FParseError("unexpected end of input", self.pos)
        raise FParseError(f"unexpected character {ch!r}", self.pos)

    def _number(self) -> FExpr:
        start = self.pos
        src = self.src
        while self.pos < len(src) and (src[self.pos].isdigit() or src[self.pos] == "."):
            self.pos += 1
        if self.pos < len(src) and src[self.pos] in "eE":
            probe = self.pos + 1
            if probe < len(src) and src[probe] in "+-":
                probe += 1
            if probe < len(src) and src[probe].isdigit():
                self.pos = probe
                while self.pos < len(src) and src[self.pos].isdigit():
                    self.pos += 1
        text = src[start : self.pos]
        try:
            return Const(float(text))
        except ValueError:
            raise FParseError(f"bad numeric literal {text!r}", start) from None

    def _ident(self) -> FExpr:
        start = self.pos
        src = self.src
        while self.pos < len(src) and (src[self.pos].isalnum() or src[self.pos] == "_"):
            self.pos += 1
        name = src[start : self.pos]
        if name in FUNCTIONS:
            self._expect("(")
            arg = self._expr()
            self._expect(")")
            return Call(name, arg)
        if name in VARIABLES:
            return Var(name)
        raise FParseError(f"unknown identifier {name!r}", start)


def parse(src: str) -> FExpr:
    if not src or not src.strip():
        raise FParseError("empty expression", 0)
    return _Parser(src).parse()


# ---------------------------------------------------------------------------
# Printing


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "pow": 4, "atom": 5}


def _prec(e: FExpr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    if isinstance(e, Pow):
        return _PREC["pow"]
    if isinstance(e, Const) and e.value < 0:
        return _PREC["neg"]
    return _PREC["atom"]


def to_string(e: FExpr) -> str:
    """Render with minimal parentheses; parse(to_string(e)) == e."""
    if isinstance(e, Const):
        v = e.value
        if v == int(v) and abs(v) < 1e16:
            return str(int(v))
        return repr(v)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        child = to_string(e.child)
        if _prec(e.child) < _PREC["neg"]:
            child = f"({child})"
        return f"-{child}"
    if isinstance(e, Pow):
        base = to_string(e.base)
        if _prec(e.base) < _PREC["atom"]:
            base = f"({base})"
        return f"{base}^{e.exponent}" if e.exponent >= 0 else f"{base}^({e.exponent})"
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    if isinstance(e, BinOp):
        lp, rp = _prec(e.left), _prec(e.right)
        mine = _PREC[e.op]
        left = to_string(e.left)
        right = to_string(e.right)
        if lp < mine:
            left = f"({left})"
        # all four operators parse left associative, so a right operand of
        # equal precedence needs parentheses to survive a round trip
        if rp <= mine or (e.op in "-*/" and rp == _PREC["neg"]):
            right = f"({right})"
        return f"{left} {e.op} {right}" if e.op in "+-" else f"{left}{e.op}{right}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Evaluation


def evaluate_env(e: FExpr, env: Mapping[str, Number]) -> Number:
    """Evaluate over an environment of scalars or same-shaped arrays."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise FEvalError("unbound variable", e.name) from None
    if isinstance(e, Neg):
        return -evaluate_env(e.child, env)
    if isinstance(e, Call):
        arg = evaluate_env(e.arg, env)
        return _apply_func(e, arg)
    if isinstance(e, Pow):
        base = evaluate_env(e.base, env)
        if e.exponent < 0:
            bad = _first_where(np.asarray(base) == 0.0)
            if bad is not None:
                raise FEvalError("zero base with negative exponent", to_string(e), bad)
            with np.errstate(divide="ignore"):
                return np.float_power(base, e.exponent) if isinstance(base, np.ndarray) else base ** e.exponent
        return base ** e.exponent
    if isinstance(e, BinOp):
        left = evaluate_env(e.left, env)
        right = evaluate_env(e.right, env)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        bad = _first_where(np.asarray(right) == 0.0)
        if bad is not None:
            raise FEvalError("division by zero", to_string(e), bad)
        return left / right
    raise TypeError(f"not an expression node: {e!r}")


def _apply_func(e: Call, arg: Number) -> Number:
    if e.func == "sin":
        return np.sin(arg)
    if e.func == "cos":
        return np.cos(arg)
    if e.func == "exp":
        return np.exp(arg)
    if e.func == "log":
        bad = _first_where(np.asarray(arg) <= 0.0)
        if bad is not None:
            raise FEvalError("log of non-positive value", to_string(e), bad)
        return np.log(arg)
    if e.func == "sqrt":
        bad = _first_where(np.asarray(arg) < 0.0)
        if bad is not None:
            raise FEvalError("sqrt of negative value", to_string(e), bad)
        return np.sqrt(arg)
    raise FEvalError("unknown function", e.func)


def _first_where(mask: np.ndarray) -> int | None:
    """Flat index of the first True entry, or None."""
    if mask.ndim == 0:
        return 0 if bool(mask) else None
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size else None


def evaluate(e: FExpr, at: FPoint) -> float:
    return float(evaluate_env(e, at.env()))


# ---------------------------------------------------------------------------
# Differentiation


def partial(e: FExpr, var: str) -> FExpr:
    """Exact first partial derivative with respect to one variable."""
    if var not in VARIABLES:
        raise ValueError(f"unknown variable {var!r}")
    return fold(_diff(e, var))


def _diff(e: FExpr, var: str) -> FExpr:
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0) if e.name == var else Const(0.0)
    if isinstance(e, Neg):
        return Neg(_diff(e.child, var))
    if isinstance(e, BinOp):
        du = _diff(e.left, var)
        dv = _diff(e.right, var)
        if e.op == "+":
            return BinOp("+", du, dv)
        if e.op == "-":
            return BinOp("-", du, dv)
        if e.op == "*":
            return BinOp("+", BinOp("*", du, e.right), BinOp("*", e.left, dv))
        num = BinOp("-", BinOp("*", du, e.right), BinOp("*", e.left, dv))
        return BinOp("/", num, Pow(e.right, 2))
    if isinstance(e, Pow):
        if e.exponent == 0:
            return Const(0.0)
        inner = _diff(e.base, var)
        rule = BinOp("*", Const(float(e.exponent)), Pow(e.base, e.exponent - 1))
        return BinOp("*", rule, inner)
    if isinstance(e, Call):
        inner = _diff(e.arg, var)
        if e.func == "sin":
            outer: FExpr = Call("cos", e.arg)
        elif e.func == "cos":
            outer = Neg(Call("sin", e.arg))
        elif e.func == "exp":
            outer = Call("exp", e.arg)
        elif e.func == "log":
            return BinOp("/", inner, e.arg)
        else:  # sqrt
            return BinOp("/", inner, BinOp("*", Const(2.0), Call("sqrt", e.arg)))
        return BinOp("*", outer, inner)
    raise TypeError(f"not an expression node: {e!r}")


def fold(e: FExpr) -> FExpr:
    """Constant folding plus the obvious 0/1 identities."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Neg):
        child = fold(e.child)
        if isinstance(child, Const):
            return Const(-child.value)
        if isinstance(child, Neg):
            return child.child
        return Neg(child)
    if isinstance(e, Pow):
        base = fold(e.base)
        if e.exponent == 0:
            return Const(1.0)
        if e.exponent == 1:
            return base
        if isinstance(base, Const):
            try:
                v = float(base.value ** e.exponent)
            except (OverflowError, ZeroDivisionError):
                return Pow(base, e.exponent)
            if math.isfinite(v):
                return Const(v)
        return Pow(base, e.exponent)
    if isinstance(e, Call):
        arg = fold(e.arg)
        if isinstance(arg, Const):
            try:
                with np.errstate(all="ignore"):
                    v = float(evaluate_env(Call(e.func, arg), {}))
                if math.isfinite(v):
                    return Const(v)
            except FEvalError:
                pass
        return Call(e.func, arg)
    if isinstance(e, BinOp):
        left = fold(e.left)
        right = fold(e.right)
        if isinstance(left, Const) and isinstance(right, Const):
            if not (e.op == "/" and right.value == 0.0):
                with np.errstate(all="ignore"):
                    v = float(evaluate_env(BinOp(e.op, left, right), {}))
                if math.isfinite(v):
                    return Const(v)
        if e.op == "+":
            if _is_zero(left):
                return right
            if _is_zero(right):
                return left
        elif e.op == "-":
            if _is_zero(right):
                return left
            if _is_zero(left):
                return fold(Neg(right))
        elif e.op == "*":
            if _is_zero(left) or _is_zero(right):
                return Const(0.0)
            if _is_one(left):
                return right
            if _is_one(right):
                return left
        elif e.op == "/":
            if _is_zero(left):
                return Const(0.0)
            if _is_one(right):
                return left
        return BinOp(e.op, left, right)
    raise TypeError(f"not an expression node: {e!r}")


def _is_zero(e: FExpr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def _is_one(e: FExpr) -> bool:
    return isinstance(e, Const) and e.value == 1.0
