"""Expression trees, the problem-file parser and exact second-order evaluation.

Expressions are immutable trees.  Derivatives are obtained by pushing
second-order Taylor data (value, gradient, Hessian) through the tree in
forward mode, vectorized over a batch of evaluation points.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

__all__ = [
    "Expr", "const", "var", "sqrt", "relu3", "ParseError", "DomainError",
    "ProblemFormatError", "parse_expression", "to_string", "substitute",
    "evaluate", "taylor", "ProblemSpec", "PointData", "parse_problem",
    "load_problem", "eval_point", "format_problem",
]

UNARY = ("neg", "sqrt", "relu3")
BINARY = ("add", "sub", "mul", "div")
FUNCTIONS = ("sqrt", "relu3")


class ParseError(ValueError):
    """Syntax or name error in an expression, with a 1-based position."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


class ProblemFormatError(ValueError):
    """Structural error in a problem file."""


class DomainError(ArithmeticError):
    """Evaluation left the domain of sqrt or divided by zero."""

    def __init__(self, message: str, where: str | None = None):
        super().__init__(message if where is None else f"{where}: {message}")
        self.where = where


@dataclass(frozen=True, eq=False)
class Expr:
    """A node of an expression tree.

    ``op`` is one of ``const``, ``var``, ``neg``, ``sqrt``, ``relu3``,
    ``add``, ``sub``, ``mul``, ``div`` or ``pow``.  ``value`` holds the
    constant, the 0-based variable index or the integer exponent.
    """

    op: str
    args: tuple = ()
    value: float | int | None = None

    def _wrap(self, other):
        return other if isinstance(other, Expr) else const(other)

    def __add__(self, other):
        return Expr("add", (self, self._wrap(other)))

    def __radd__(self, other):
        return Expr("add", (self._wrap(other), self))

    def __sub__(self, other):
        return Expr("sub", (self, self._wrap(other)))

    def __rsub__(self, other):
        return Expr("sub", (self._wrap(other), self))

    def __mul__(self, other):
        return Expr("mul", (self, self._wrap(other)))

    def __rmul__(self, other):
        return Expr("mul", (self._wrap(other), self))

    def __truediv__(self, other):
        return Expr("div", (self, self._wrap(other)))

    def __rtruediv__(self, other):
        return Expr("div", (self._wrap(other), self))

    def __neg__(self):
        return Expr("neg", (self,))

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a nonnegative integer")
        return Expr("pow", (self,), k)

    def max_var(self) -> int:
        """Largest 0-based variable index used, or -1."""
        seen: dict[int, int] = {}

        def walk(e: Expr) -> int:
            key = id(e)
            if key in seen:
                return seen[key]
            if e.op == "var":
                out = int(e.value)
            else:
                out = max((walk(a) for a in e.args), default=-1)
            seen[key] = out
            return out

        return walk(self)

    def __str__(self) -> str:
        return to_string(self)


def const(c: float) -> Expr:
    c = float(c)
    if not math.isfinite(c):
        raise ValueError("constants must be finite")
    return Expr("const", (), c)


def var(i: int) -> Expr:
    """Variable with 0-based index ``i`` (printed as ``x{i+1}``)."""
    if i < 0:
        raise ValueError("variable index must be nonnegative")
    return Expr("var", (), int(i))


def sqrt(e: Expr) -> Expr:
    return Expr("sqrt", (e,))


def relu3(e: Expr) -> Expr:
    return Expr("relu3", (e,))


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ParseError(f"unexpected character {text[col - 1]!r}", 1, col)
        kind = m.lastgroup
        start = m.start(kind)
        tok = m.group(kind)
        if tok == "**":
            tok = "^"
        tokens.append((kind, tok, start + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text, n, params):
        self.toks = _tokenize(text)
        self.i = 0
        self.n = n
        self.params = params or {}

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, tok):
        kind, t, col = self.take()
        if t != tok:
            raise ParseError(f"expected {tok!r} but found {t or 'end of input'!r}", 1, col)

    def parse(self) -> Expr:
        e = self.sum()
        kind, t, col = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {t!r}", 1, col)
        return e

    def sum(self):
        e = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, t, _ = self.take()
            rhs = self.product()
            e = Expr("add" if t == "+" else "sub", (e, rhs))
        return e

    def product(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, t, _ = self.take()
            rhs = self.unary()
            e = Expr("mul" if t == "*" else "div", (e, rhs))
        return e

    def unary(self):
        kind, t, _ = self.peek()
        if kind == "op" and t in ("-", "+"):
            self.take()
            arg = self.unary()
            return Expr("neg", (arg,)) if t == "-" else arg
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            kind, t, col = self.take()
            paren = False
            if t == "(":
                paren = True
                kind, t, col = self.take()
            if kind != "num" or not re.fullmatch(r"\d+", t):
                raise ParseError("exponent must be a nonnegative integer literal", 1, col)
            if paren:
                self.expect(")")
            if self.peek()[1] == "^":
                raise ParseError("chained powers need parentheses", 1, self.peek()[2])
            return Expr("pow", (base,), int(t))
        return base

    def atom(self):
        kind, t, col = self.take()
        if kind == "num":
            return const(float(t))
        if kind == "name":
            if self.peek()[1] == "(":
                if t not in FUNCTIONS:
                    raise ParseError(f"unknown function {t!r}", 1, col)
                self.take()
                arg = self.sum()
                self.expect(")")
                return Expr(t, (arg,))
            m = re.fullmatch(r"x([1-9]\d*)", t)
            if m:
                idx = int(m.group(1))
                if self.n is not None and idx > self.n:
                    raise ParseError(f"variable {t} exceeds dimension {self.n}", 1, col)
                return var(idx - 1)
            if t in self.params:
                return const(self.params[t])
            raise ParseError(f"unknown identifier {t!r}", 1, col)
        if t == "(":
            e = self.sum()
            self.expect(")")
            return e
        raise ParseError(f"unexpected token {t or 'end of input'!r}", 1, col)


def parse_expression(text: str, n: int | None = None,
                     params: Mapping[str, float] | None = None) -> Expr:
    """Parse an infix expression in the variables ``x1..xn``.

    ``^`` (or ``**``) takes a nonnegative integer literal exponent and binds
    tighter than unary minus, so ``-x1^2`` is ``-(x1^2)``.
    """
    return _Parser(text, n, params).parse()


def to_string(e: Expr) -> str:
    """Fully parenthesized text form that parses back to an equal-valued tree."""
    memo: dict[int, str] = {}

    def rec(e: Expr) -> str:
        key = id(e)
        if key in memo:
            return memo[key]
        op = e.op
        if op == "const":
            s = repr(float(e.value))
            if s.startswith("-"):
                s = f"(-{s[1:]})"
        elif op == "var":
            s = f"x{e.value + 1}"
        elif op == "neg":
            s = f"(-{rec(e.args[0])})"
        elif op in FUNCTIONS:
            s = f"{op}({rec(e.args[0])})"
        elif op == "pow":
            s = f"({rec(e.args[0])})^{e.value}"
        else:
            sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
            s = f"({rec(e.args[0])} {sym} {rec(e.args[1])})"
        memo[key] = s
        return s

    return rec(e)


def substitute(e: Expr, replacement: Sequence[Expr]) -> Expr:
    """Replace variable ``i`` by ``replacement[i]`` (shared subtrees stay shared)."""
    memo: dict[int, Expr] = {}

    def rec(e: Expr) -> Expr:
        key = id(e)
        if key in memo:
            return memo[key]
        if e.op == "var":
            out = replacement[e.value]
        elif e.op == "const":
            out = e
        else:
            out = Expr(e.op, tuple(rec(a) for a in e.args), e.value)
        memo[key] = out
        return out

    return rec(e)


# ---------------------------------------------------------------------------
# evaluation


def _domain(strict, msg):
    if strict:
        raise DomainError(msg)


def evaluate(e: Expr, X: np.ndarray, strict: bool = False) -> np.ndarray:
    """Values of ``e`` at the rows of ``X`` (shape ``(m, n)``)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m = X.shape[0]
    memo: dict[int, np.ndarray] = {}

    def rec(e: Expr) -> np.ndarray:
        key = id(e)
        if key in memo:
            return memo[key]
        op = e.op
        if op == "const":
            out = np.full(m, e.value)
        elif op == "var":
            out = X[:, e.value].copy()
        elif op == "neg":
            out = -rec(e.args[0])
        elif op == "sqrt":
            a = rec(e.args[0])
            if np.any(a < 0):
                _domain(strict, "sqrt of a negative number")
            with np.errstate(invalid="ignore"):
                out = np.sqrt(a)
        elif op == "relu3":
            a = rec(e.args[0])
            out = np.where(a > 0, a, 0.0) ** 3
        elif op == "pow":
            out = rec(e.args[0]) ** e.value
        else:
            a, b = rec(e.args[0]), rec(e.args[1])
            if op == "add":
                out = a + b
            elif op == "sub":
                out = a - b
            elif op == "mul":
                out = a * b
            else:
                if np.any(b == 0):
                    _domain(strict, "division by zero")
                with np.errstate(divide="ignore", invalid="ignore"):
                    out = a / b
        memo[key] = out
        return out

    return rec(e)


def _outer(g):
    return g[:, :, None] * g[:, None, :]


def _chain(f0, f1, f2, a):
    """Taylor data of h(a) given h, h', h'' evaluated at a's value."""
    _, g, H = a
    return (f0, f1[:, None] * g,
            f1[:, None, None] * H + f2[:, None, None] * _outer(g))


def taylor(e: Expr, X: np.ndarray, strict: bool = False):
    """Value, gradient and Hessian of ``e`` at the rows of ``X``.

    Returns arrays of shapes ``(m,)``, ``(m, n)`` and ``(m, n, n)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, n = X.shape
    memo: dict[int, tuple] = {}
    zero_g = np.zeros((m, n))
    zero_H = np.zeros((m, n, n))

    def rec(e: Expr):
        key = id(e)
        if key in memo:
            return memo[key]
        op = e.op
        if op == "const":
            out = (np.full(m, e.value), zero_g, zero_H)
        elif op == "var":
            g = np.zeros((m, n))
            g[:, e.value] = 1.0
            out = (X[:, e.value].copy(), g, zero_H)
        elif op == "neg":
            v, g, H = rec(e.args[0])
            out = (-v, -g, -H)
        elif op == "sqrt":
            a = rec(e.args[0])
            t = a[0]
            if np.any(t < 0):
                _domain(strict, "sqrt of a negative number")
            with np.errstate(invalid="ignore", divide="ignore"):
                s = np.sqrt(t)
                out = _chain(s, 0.5 / s, -0.25 / (s * t), a)
        elif op == "relu3":
            a = rec(e.args[0])
            t = np.where(a[0] > 0, a[0], 0.0)
            # exact zeros on the flat branch, whatever the inner derivatives are
            mask = (a[0] > 0)
            g = np.where(mask[:, None], a[1], 0.0)
            H = np.where(mask[:, None, None], a[2], 0.0)
            out = _chain(t ** 3, 3 * t ** 2, 6 * t, (a[0], g, H))
        elif op == "pow":
            k = e.value
            a = rec(e.args[0])
            t = a[0]
            if k == 0:
                out = (np.ones(m), zero_g, zero_H)
            elif k == 1:
                out = a
            else:
                out = _chain(t ** k, k * t ** (k - 1), k * (k - 1) * t ** (k - 2), a)
        else:
            va, ga, Ha = rec(e.args[0])
            vb, gb, Hb = rec(e.args[1])
            if op == "add":
                out = (va + vb, ga + gb, Ha + Hb)
            elif op == "sub":
                out = (va - vb, ga - gb, Ha - Hb)
            elif op == "mul":
                cross = ga[:, :, None] * gb[:, None, :]
                out = (va * vb, va[:, None] * gb + vb[:, None] * ga,
                       va[:, None, None] * Hb + vb[:, None, None] * Ha
                       + cross + cross.transpose(0, 2, 1))
            else:
                if np.any(vb == 0):
                    _domain(strict, "division by zero")
                with np.errstate(divide="ignore", invalid="ignore"):
                    r = 1.0 / vb
                    # Taylor data of 1/b, then the product rule
                    rg = -(r * r)[:, None] * gb
                    rH = (-(r * r)[:, None, None] * Hb
                          + (2 * r ** 3)[:, None, None] * _outer(gb))
                    cross = ga[:, :, None] * rg[:, None, :]
                    out = (va * r, va[:, None] * rg + r[:, None] * ga,
                           va[:, None, None] * rH + r[:, None, None] * Ha
                           + cross + cross.transpose(0, 2, 1))
        memo[key] = out
        return out

    return rec(e)


# ---------------------------------------------------------------------------
# problems


@dataclass(frozen=True)
class ProblemSpec:
    """A nonlinear program ``min objective s.t. equalities = 0, inequalities <= 0``.

    Equality constraints come first in the global constraint numbering, so
    index ``i < len(equalities)`` is an equality and the rest are inequalities.
    """

    dimension: int
    objective: Expr
    equalities: tuple[Expr, ...]
    inequalities: tuple[Expr, ...]
    point: np.ndarray
    params: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)

    def __post_init__(self):
        pt = np.asarray(self.point, dtype=float).reshape(-1)
        if self.dimension < 1:
            raise ProblemFormatError("dimension must be a positive integer")
        if pt.size != self.dimension:
            raise ProblemFormatError(
                f"point has length {pt.size} but dimension is {self.dimension}")
        object.__setattr__(self, "point", pt)
        object.__setattr__(self, "equalities", tuple(self.equalities))
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        for e in (self.objective, *self.equalities, *self.inequalities):
            if e.max_var() >= self.dimension:
                raise ProblemFormatError("expression uses a variable beyond the dimension")

    @property
    def n_eq(self) -> int:
        return len(self.equalities)

    @property
    def n_ineq(self) -> int:
        return len(self.inequalities)

    @property
    def constraints(self) -> tuple[Expr, ...]:
        return self.equalities + self.inequalities

    def constraint_name(self, i: int) -> str:
        """1-based label used in messages and reports."""
        return f"q{i + 1}"

    def with_point(self, point) -> "ProblemSpec":
        return ProblemSpec(self.dimension, self.objective, self.equalities,
                           self.inequalities, np.asarray(point, float),
                           dict(self.params), dict(self.sources))

    def values(self, X):
        """Objective values ``(m,)`` and constraint values ``(m, l)`` at rows of X."""
        X = np.atleast_2d(np.asarray(X, float))
        f = evaluate(self.objective, X)
        if self.constraints:
            q = np.stack([evaluate(c, X) for c in self.constraints], axis=1)
        else:
            q = np.zeros((X.shape[0], 0))
        return f, q

    def derivatives(self, X):
        """Batched Taylor data: ``(f, gf, Hf, q, J, Hq)``."""
        X = np.atleast_2d(np.asarray(X, float))
        m, n = X.shape
        f, gf, Hf = taylor(self.objective, X)
        l = len(self.constraints)
        q = np.zeros((m, l))
        J = np.zeros((m, l, n))
        Hq = np.zeros((m, l, n, n))
        for i, c in enumerate(self.constraints):
            q[:, i], J[:, i], Hq[:, i] = taylor(c, X)
        return f, gf, Hf, q, J, Hq


def _sym(H):
    return 0.5 * (H + np.swapaxes(H, -1, -2))


@dataclass(frozen=True)
class PointData:
    """First and second derivative data of a problem at one point."""

    x: np.ndarray
    q: np.ndarray
    jacobian: np.ndarray
    constraint_hessians: np.ndarray
    objective: float
    grad_objective: np.ndarray
    hess_objective: np.ndarray
    n_eq: int

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def l(self) -> int:
        return self.q.size

    def lagrangian_hessian(self, lam) -> np.ndarray:
        lam = np.asarray(lam, float)
        return self.hess_objective + np.tensordot(lam, self.constraint_hessians, axes=1)


def eval_point(problem: ProblemSpec, x=None) -> PointData:
    """Exact derivative data at ``x`` (default: the reference point).

    Raises :class:`DomainError` naming the offending expression when an
    evaluation leaves the domain of sqrt or divides by zero.
    """
    x = problem.point if x is None else np.asarray(x, float).reshape(-1)
    if x.size != problem.dimension:
        raise ValueError(f"point has length {x.size}, expected {problem.dimension}")
    X = x[None, :]
    n = problem.dimension
    try:
        f, gf, Hf = taylor(problem.objective, X, strict=True)
    except DomainError as err:
        raise DomainError(str(err), "objective") from None
    l = len(problem.constraints)
    q = np.zeros(l)
    J = np.zeros((l, n))
    Hq = np.zeros((l, n, n))
    for i, c in enumerate(problem.constraints):
        try:
            v, g, H = taylor(c, X, strict=True)
        except DomainError as err:
            raise DomainError(str(err), f"constraint {problem.constraint_name(i)}") from None
        q[i], J[i], Hq[i] = v[0], g[0], H[0]
    arrays = [f, gf, Hf, q, J, Hq]
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise DomainError("non-finite derivative value")
    return PointData(x.copy(), q, J, _sym(Hq), float(f[0]), gf[0], _sym(Hf[0]), problem.n_eq)


def _locate(text: str, needle: str) -> tuple[int, int]:
    """1-based (line, column) of the first occurrence of ``needle``."""
    k = text.find(needle)
    if k < 0:
        return 1, 1
    line = text.count("\n", 0, k) + 1
    col = k - (text.rfind("\n", 0, k) + 1) + 1
    return line, col


def parse_problem(text: str, overrides: Mapping[str, float] | None = None) -> ProblemSpec:
    """Parse the text of a problem file.

    The file is a small TOML document::

        dimension = 3
        objective = "-x1 + 0.5*x2^2"
        inequalities = ["x1 + x3^2", "x1"]
        point = [0, 0, 0]
        params.a = 2        # optional named constants

    ``overrides`` replaces or adds parameter values before the expressions
    are parsed.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        m = re.search(r"line (\d+), column (\d+)", str(err))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (1, 1)
        raise ParseError(f"malformed problem file: {err}", line, col) from None
    known = {"dimension", "objective", "equalities", "inequalities", "point", "params"}
    extra = set(doc) - known
    if extra:
        raise ProblemFormatError(f"unknown section(s): {', '.join(sorted(extra))}")
    for key in ("dimension", "objective", "point"):
        if key not in doc:
            raise ProblemFormatError(f"missing section '{key}'")
    n = doc["dimension"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ProblemFormatError("dimension must be a positive integer")
    params = {}
    for k, v in (doc.get("params") or {}).items():
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ProblemFormatError(f"parameter {k} must be a real number")
        params[k] = float(v)
    for k, v in (overrides or {}).items():
        params[k] = float(v)
    bad = [k for k in params if re.fullmatch(r"x[1-9]\d*", k) or k in FUNCTIONS]
    if bad:
        raise ProblemFormatError(f"parameter name clashes with a builtin: {bad[0]}")

    def expr_of(src, label):
        if not isinstance(src, str):
            raise ProblemFormatError(f"{label} must be a quoted expression")
        try:
            return parse_expression(src, n, params)
        except ParseError as err:
            line, col = _locate(text, src)
            raise ParseError(f"{label}: {err.message}", line, col + err.column - 1) from None

    objective = expr_of(doc["objective"], "objective")
    groups = {}
    for key in ("equalities", "inequalities"):
        items = doc.get(key, [])
        if not isinstance(items, list):
            raise ProblemFormatError(f"{key} must be a list of expressions")
        groups[key] = [expr_of(s, f"{key}[{j + 1}]") for j, s in enumerate(items)]
    point = doc["point"]
    if not isinstance(point, list) or not all(
            isinstance(p, (int, float)) and not isinstance(p, bool) for p in point):
        raise ProblemFormatError("point must be a list of real numbers")
    if len(point) != n:
        raise ProblemFormatError(f"point has length {len(point)} but dimension is {n}")
    sources = {"objective": doc["objective"], "equalities": list(doc.get("equalities", [])),
               "inequalities": list(doc.get("inequalities", []))}
    return ProblemSpec(n, objective, tuple(groups["equalities"]),
                       tuple(groups["inequalities"]), np.array(point, float),
                       params, sources)


def load_problem(path, overrides: Mapping[str, float] | None = None) -> ProblemSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read(), overrides)


def _toml_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def format_problem(problem: ProblemSpec, header: str | None = None) -> str:
    """Problem-file text for ``problem`` (expressions in parenthesized form)."""
    lines = []
    if header:
        lines += [f"# {h}" for h in header.splitlines()]
    lines.append(f"dimension = {problem.dimension}")
    lines.append(f"objective = {_toml_str(to_string(problem.objective))}")
    for key, group in (("equalities", problem.equalities),
                       ("inequalities", problem.inequalities)):
        body = ",\n".join(f"  {_toml_str(to_string(e))}" for e in group)
        lines.append(f"{key} = [\n{body}\n]" if group else f"{key} = []")
    lines.append("point = [" + ", ".join(repr(float(p)) for p in problem.point) + "]")
    return "\n".join(lines) + "\n"
