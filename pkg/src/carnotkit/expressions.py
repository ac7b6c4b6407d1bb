"""A small expression language for defining functions and profiles.

Grammar: numbers, variables, ``+ - * / ^`` (caret is right associative),
unary minus, and the functions sqrt, abs, min, max, exp, sign.  The
recognized variables are the coordinates ``x1..xm`` and ``y1..yn``, the
horizontal radius ``s``, the gauge ``rho``, and ``t`` as an alias for
``y1``.  Parsing is position-aware: every syntax or name error carries a
line and column.

Expressions differentiate symbolically.  Derivatives of ``s`` and
``rho`` expand through the chain rule into coordinate expressions; kinks
(absolute values, signs, branch selections, fractional powers of the
radii at their zero sets) are differentiated away from the kink and the
locations are flagged on the result.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .groups import GroupSpec
from .hcalc import ScalarField

__all__ = [
    "ExpressionError",
    "Expression",
    "Num",
    "Var",
    "Neg",
    "Bin",
    "Call",
    "parse_expression",
    "to_source",
    "differentiate",
    "gradient",
    "evaluate",
    "free_variables",
    "expression_field",
    "profile_callables",
]

FUNCTIONS = {"sqrt": 1, "abs": 1, "exp": 1, "sign": 1, "min": 2, "max": 2}
VAR_PATTERN = re.compile(r"^(x[0-9]+|y[0-9]+|s|rho|t)$")


class ExpressionError(ValueError):
    """Parse or evaluation failure with a source position."""

    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Expression:
    pass


@dataclass(frozen=True)
class Num(Expression):
    value: float


@dataclass(frozen=True)
class Var(Expression):
    name: str


@dataclass(frozen=True)
class Neg(Expression):
    arg: Expression


@dataclass(frozen=True)
class Bin(Expression):
    op: str  # one of + - * / ^
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Call(Expression):
    fn: str
    args: tuple[Expression, ...]


# ---------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    tokens = []
    for lineno, line in enumerate(text.splitlines() or [""], start=1):
        pos = 0
        while pos < len(line):
            if line[pos].isspace():
                pos += 1
                continue
            mm = _TOKEN_RE.match(line, pos)
            if mm is None or mm.start() != pos:
                raise ExpressionError(f"unexpected character {line[pos]!r}", lineno, pos + 1)
            text_piece = mm.group(0).strip()
            if mm.lastgroup == "num" or (mm.group("num") is not None):
                kind = "num"
                text_piece = mm.group(0).strip()
            elif mm.group("name") is not None:
                kind = "name"
            else:
                kind = "op"
            tokens.append((kind, text_piece, lineno, pos + 1))
            pos = mm.end()
    tokens.append(("end", "", lineno if text.splitlines() else 1, len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, line, col = self.peek()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r}, found {val or 'end of input'!r}", line, col)
        return self.next()

    def parse(self) -> Expression:
        e = self.expr(0)
        kind, val, line, col = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected trailing {val!r}", line, col)
        return e

    def expr(self, min_prec: int) -> Expression:
        left = self.atom()
        while True:
            kind, val, _, _ = self.peek()
            if kind != "op" or val not in "+-*/^":
                return left
            prec = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}[val]
            if prec < min_prec:
                return left
            self.next()
            # caret binds right, the rest left
            right = self.expr(prec if val == "^" else prec + 1)
            left = Bin(val, left, right)

    def atom(self) -> Expression:
        kind, val, line, col = self.next()
        if kind == "num":
            return Num(float(val))
        if kind == "op" and val == "-":
            return Neg(self.atom_pow())
        if kind == "op" and val == "(":
            e = self.expr(0)
            self.expect_op(")")
            return e
        if kind == "name":
            nk, nv, _, _ = self.peek()
            if nk == "op" and nv == "(":
                if val not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {val!r}", line, col)
                self.next()
                args = [self.expr(0)]
                while True:
                    k2, v2, l2, c2 = self.peek()
                    if k2 == "op" and v2 == ",":
                        self.next()
                        args.append(self.expr(0))
                    elif k2 == "op" and v2 == ")":
                        self.next()
                        break
                    else:
                        raise ExpressionError(f"expected ',' or ')', found {v2 or 'end of input'!r}", l2, c2)
                if len(args) != FUNCTIONS[val]:
                    raise ExpressionError(
                        f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", line, col
                    )
                return Call(val, tuple(args))
            if not VAR_PATTERN.match(val):
                raise ExpressionError(f"unknown identifier {val!r}", line, col)
            return Var("y1" if val == "t" else val)
        raise ExpressionError(f"unexpected {val or 'end of input'!r}", line, col)

    def atom_pow(self) -> Expression:
        # unary minus binds looser than the caret: -x^2 == -(x^2)
        base = self.atom()
        kind, val, _, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            return Bin("^", base, self.atom_pow())
        return base


def parse_expression(text: str) -> Expression:
    """Parse source text into an AST; errors carry line and column."""
    return _Parser(_tokenize(text)).parse()


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def to_source(e: Expression) -> str:
    """Render the AST back to parseable text (round-trips to an equal AST)."""

    def render(node: Expression, parent_prec: int, right_side: bool = False) -> str:
        if isinstance(node, Num):
            return repr(node.value)
        if isinstance(node, Var):
            return node.name
        if isinstance(node, Neg):
            inner = render(node.arg, 2)
            s = f"-{inner}"
            return f"({s})" if parent_prec > 1 else s
        if isinstance(node, Call):
            return f"{node.fn}({', '.join(render(a, 0) for a in node.args)})"
        assert isinstance(node, Bin)
        prec = _PREC[node.op]
        # left-assoc operators need parens on an equal-precedence right child
        lp = render(node.left, prec if node.op != "^" else prec + 1)
        rp = render(node.right, prec + 1 if node.op != "^" else prec)
        s = f"{lp} {node.op} {rp}"
        need = prec < parent_prec or (prec == parent_prec and right_side)
        return f"({s})" if need else s

    return render(e, 0)


# ---------------------------------------------------------------------------
# evaluation


def evaluate(e: Expression, env: dict[str, np.ndarray]):
    """Evaluate against an environment of named arrays.

    Raises on unknown variables and on fractional powers of negative
    bases (rather than returning NaN).
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if e.name not in env:
            raise ExpressionError(f"variable {e.name!r} is not defined in this context")
        return env[e.name]
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Bin):
        a = evaluate(e.left, env)
        b = evaluate(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            return a / b
        bb = np.asarray(b)
        if np.all(bb == np.round(bb)):
            return a**b
        if np.any(np.asarray(a) < 0):
            raise ExpressionError("fractional power of a negative base")
        return a**b
    assert isinstance(e, Call)
    args = [evaluate(a, env) for a in e.args]
    if e.fn == "sqrt":
        if np.any(np.asarray(args[0]) < 0):
            raise ExpressionError("sqrt of a negative value")
        return np.sqrt(args[0])
    if e.fn == "abs":
        return np.abs(args[0])
    if e.fn == "exp":
        return np.exp(args[0])
    if e.fn == "sign":
        return np.sign(args[0])
    if e.fn == "min":
        return np.minimum(args[0], args[1])
    return np.maximum(args[0], args[1])


def free_variables(e: Expression) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_variables(e.arg)
    if isinstance(e, Bin):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Call):
        out: set[str] = set()
        for a in e.args:
            out |= free_variables(a)
        return out
    return set()


# ---------------------------------------------------------------------------
# symbolic differentiation

_ZERO = Num(0.0)
_ONE = Num(1.0)


def _is_zero(e: Expression) -> bool:
    return isinstance(e, Num) and e.value == 0.0


def _is_one(e: Expression) -> bool:
    return isinstance(e, Num) and e.value == 1.0


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return Bin("+", a, b)


def _sub(a, b):
    if _is_zero(b):
        return a
    if _is_zero(a):
        return Neg(b)
    return Bin("-", a, b)


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return _ZERO
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return Bin("*", a, b)


def _div(a, b):
    if _is_zero(a):
        return _ZERO
    if _is_one(b):
        return a
    return Bin("/", a, b)


def _pow(a, k: float):
    if k == 0:
        return _ONE
    if k == 1:
        return a
    return Bin("^", a, Num(float(k)))


def _radius_partial(name: str, var: str, flags: set[str]) -> Expression:
    """Chain-rule partial of the derived radii s and rho."""
    if name == "s":
        if var.startswith("x"):
            flags.add("kink at s=0")
            return _div(Var(var), Var("s"))
        return _ZERO
    # rho = (s^4 + |y|^2)^(1/4)
    if var.startswith("x"):
        flags.add("kink at rho=0")
        return _div(_mul(_pow(Var("s"), 2), Var(var)), _pow(Var("rho"), 3))
    flags.add("kink at rho=0")
    return _div(Var(var), _mul(Num(2.0), _pow(Var("rho"), 3)))


def differentiate(e: Expression, var: str, carnot: bool = True) -> tuple[Expression, set[str]]:
    """Symbolic partial derivative with kink flags.

    With ``carnot`` the derived radii ``s`` and ``rho`` expand through
    the chain rule in terms of the coordinates; without it every
    variable is treated as atomic (profiles in a free ``s``).
    """
    flags: set[str] = set()

    def d(node: Expression) -> Expression:
        if isinstance(node, Num):
            return _ZERO
        if isinstance(node, Var):
            if node.name == var:
                return _ONE
            if carnot and node.name in ("s", "rho"):
                return _radius_partial(node.name, var, flags)
            return _ZERO
        if isinstance(node, Neg):
            da = d(node.arg)
            return _ZERO if _is_zero(da) else Neg(da)
        if isinstance(node, Bin):
            a, b = node.left, node.right
            if node.op != "^":
                da, db = d(a), d(b)
                if node.op == "+":
                    return _add(da, db)
                if node.op == "-":
                    return _sub(da, db)
                if node.op == "*":
                    return _add(_mul(da, b), _mul(a, db))
                return _div(_sub(_mul(da, b), _mul(a, db)), _pow(b, 2))
            # power: constant exponents only (the language has no log)
            if not isinstance(node.right, Num):
                raise ExpressionError("cannot differentiate a non-constant exponent")
            k = node.right.value
            if carnot and isinstance(a, Var) and a.name in ("s", "rho"):
                # d(s^k)/dx_i = k s^(k-2) x_i ; smooth iff k >= 2
                # d(rho^k)/d• pulls rho^(k-4) ; smooth iff k >= 4
                if a.name == "s" and var.startswith("x"):
                    if k < 2:
                        flags.add("kink at s=0")
                    return _mul(_mul(Num(k), _pow(Var("s"), k - 2)), Var(var))
                if a.name == "s":
                    return _ZERO
                if a.name == "rho":
                    if k < 4:
                        flags.add("kink at rho=0")
                    if var.startswith("x"):
                        return _mul(
                            _mul(Num(k), _pow(Var("rho"), k - 4)),
                            _mul(_pow(Var("s"), 2), Var(var)),
                        )
                    if var.startswith("y"):
                        return _mul(
                            _mul(Num(k / 2.0), _pow(Var("rho"), k - 4)), Var(var)
                        )
                    return _ZERO
            if k != round(k):
                flags.add("kink where the base vanishes (fractional power)")
            return _mul(_mul(Num(k), _pow(a, k - 1)), d(a))
        assert isinstance(node, Call)
        arg = node.args[0]
        if node.fn == "sqrt":
            da = d(arg)
            if _is_zero(da):
                return _ZERO
            flags.add("kink where sqrt argument vanishes")
            return _div(da, _mul(Num(2.0), Call("sqrt", (arg,))))
        if node.fn == "exp":
            return _mul(d(arg), Call("exp", (arg,)))
        if node.fn == "abs":
            da = d(arg)
            if _is_zero(da):
                return _ZERO
            flags.add("abs differentiated away from its kink")
            return _mul(Call("sign", (arg,)), da)
        if node.fn == "sign":
            if not _is_zero(d(arg)):
                flags.add("sign treated as locally constant")
            return _ZERO
        # min / max: branch selection away from ties
        a, b = node.args
        da, db = d(a), d(b)
        if _is_zero(da) and _is_zero(db):
            return _ZERO
        flags.add(f"{node.fn} differentiated away from ties")
        cond = Call("sign", (_sub(a, b),))
        half = Num(0.5)
        if node.fn == "max":
            return _add(
                _mul(_mul(half, _add(_ONE, cond)), da), _mul(_mul(half, _sub(_ONE, cond)), db)
            )
        return _add(
            _mul(_mul(half, _sub(_ONE, cond)), da), _mul(_mul(half, _add(_ONE, cond)), db)
        )

    return d(e), flags


def gradient(e: Expression, spec: GroupSpec) -> tuple[list[Expression], set[str]]:
    """All coordinate partials, with the union of their kink flags."""
    names = [f"x{i+1}" for i in range(spec.m)] + [f"y{l+1}" for l in range(spec.n)]
    parts, flags = [], set()
    for name in names:
        dexpr, fl = differentiate(e, name, carnot=True)
        parts.append(dexpr)
        flags |= fl
    return parts, flags


# ---------------------------------------------------------------------------
# binding to fields


def _point_env(spec: GroupSpec, pts: np.ndarray) -> dict[str, np.ndarray]:
    pts = np.asarray(pts, dtype=float)
    env = {f"x{i+1}": pts[..., i] for i in range(spec.m)}
    env.update({f"y{l+1}": pts[..., spec.m + l] for l in range(spec.n)})
    first = pts[..., : spec.m]
    s = np.linalg.norm(first, axis=-1)
    env["s"] = s
    env["rho"] = (s**4 + np.sum(pts[..., spec.m :] ** 2, axis=-1)) ** 0.25
    return env


def check_variables(e: Expression, spec: GroupSpec) -> None:
    """Reject coordinate names beyond the group's layer dimensions."""
    for name in sorted(free_variables(e)):
        if name[0] == "x" and not 1 <= int(name[1:]) <= spec.m:
            raise ExpressionError(f"variable {name} exceeds the horizontal dimension m={spec.m}")
        if name[0] == "y" and not 1 <= int(name[1:]) <= spec.n:
            raise ExpressionError(f"variable {name} exceeds the vertical dimension n={spec.n}")


def expression_field(spec: GroupSpec, e: Expression) -> tuple[ScalarField, set[str]]:
    """Compile an expression into a scalar field with a symbolic gradient."""
    check_variables(e, spec)
    parts, flags = gradient(e, spec)

    def f(pts: np.ndarray) -> np.ndarray:
        env = _point_env(spec, pts)
        return np.broadcast_to(np.asarray(evaluate(e, env), dtype=float), pts.shape[:-1]).copy()

    def egrad(pts: np.ndarray) -> np.ndarray:
        env = _point_env(spec, pts)
        out = np.empty(pts.shape)
        for k, pe in enumerate(parts):
            out[..., k] = evaluate(pe, env)
        return out

    return ScalarField(f, egrad), flags


def profile_callables(
    g: Expression, spec: GroupSpec
) -> tuple[Callable, Callable, set[str]]:
    """Compile a profile ``g(s, y1..y_{n-1})`` into s- and y-partials.

    Used by the partial-symmetry experiment, where ``s`` is a free
    variable rather than the derived horizontal radius.
    """
    for name in sorted(free_variables(g)):
        if name == "s":
            continue
        if name[0] == "y" and 1 <= int(name[1:]) <= spec.n - 1:
            continue
        raise ExpressionError(
            f"profile may use s and y1..y{spec.n - 1} only, found {name}"
        )
    ds, flags = differentiate(g, "s", carnot=False)
    dys = []
    for l in range(spec.n - 1):
        dy, fl = differentiate(g, f"y{l+1}", carnot=False)
        flags |= fl
        dys.append(dy)

    def env_of(s, y) -> dict[str, np.ndarray]:
        s = np.asarray(s, dtype=float)
        y = np.atleast_2d(np.asarray(y, dtype=float))
        env = {"s": s}
        for l in range(spec.n - 1):
            env[f"y{l+1}"] = y[..., l] if y.shape[-1] > l else np.zeros_like(s)
        return env

    def dg_ds(s, y):
        return np.asarray(evaluate(ds, env_of(s, y)), dtype=float) * np.ones_like(
            np.asarray(s, dtype=float)
        )

    def dg_dy(s, y):
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape + (max(spec.n - 1, 0),))
        env = env_of(s, y)
        for l, dy in enumerate(dys):
            out[..., l] = evaluate(dy, env)
        return out

    return dg_ds, dg_dy, flags
