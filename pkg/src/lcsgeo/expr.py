"""Closed-form scalar expressions over chart coordinates.

Expressions are immutable trees. Constants are exact rationals; evaluation is
double precision. Differentiation is symbolic. There is no canonical form:
two expressions are considered equal when they evaluate equal at test points.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    """Raised on malformed source. ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, source: str, offset: int):
        self.source = source
        self.offset = offset
        super().__init__(f"{message} at offset {offset} in {source!r}")


class UnknownIdentifierError(ExprSyntaxError):
    pass


class DomainError(ArithmeticError):
    """Evaluation left the domain of an operation (1/0, log(x<=0), sqrt(x<0))."""

    def __init__(self, message: str, subexpr: "Expr"):
        self.subexpr = subexpr
        super().__init__(f"{message}: {to_source(subexpr)}")


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------


class Expr:
    """Base node. Equality is structural; hashes are cached per node."""

    def _key(self) -> tuple:
        return tuple(getattr(self, f) for f in self.__dataclass_fields__)

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or hash(self) != hash(other):
            return False
        return self._key() == other._key()

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((type(self).__name__,) + self._key())
            object.__setattr__(self, "_hash", h)
        return h

    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, k: int):
        return Pow(self, k)

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True, repr=False, eq=False)
class Const(Expr):
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))

    def __repr__(self):
        return f"Const({self.value})"


@dataclass(frozen=True, repr=False, eq=False)
class Coord(Expr):
    name: str

    def __repr__(self):
        return f"Coord({self.name})"


@dataclass(frozen=True, repr=False, eq=False)
class Neg(Expr):
    arg: Expr

    def __repr__(self):
        return f"Neg({self.arg!r})"


@dataclass(frozen=True, repr=False, eq=False)
class Add(Expr):
    left: Expr
    right: Expr

    def __repr__(self):
        return f"Add({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False, eq=False)
class Sub(Expr):
    left: Expr
    right: Expr

    def __repr__(self):
        return f"Sub({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False, eq=False)
class Mul(Expr):
    left: Expr
    right: Expr

    def __repr__(self):
        return f"Mul({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False, eq=False)
class Div(Expr):
    left: Expr
    right: Expr

    def __repr__(self):
        return f"Div({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False, eq=False)
class Pow(Expr):
    base: Expr
    exp: int

    def __post_init__(self):
        if isinstance(self.exp, bool) or int(self.exp) != self.exp:
            raise ExprError(f"integer exponent required, got {self.exp!r}")
        object.__setattr__(self, "exp", int(self.exp))

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exp})"


@dataclass(frozen=True, repr=False, eq=False)
class Func(Expr):
    name: str
    arg: Expr

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ExprError(f"unknown function {self.name!r}")

    def __repr__(self):
        return f"Func({self.name}, {self.arg!r})"


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Const(Fraction(x))
    if isinstance(x, float):
        return Const(Fraction(x).limit_denominator(10**12) if x == round(x, 12) else Fraction(x))
    if isinstance(x, str):
        return parse(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def coordinates(e: Expr) -> set[str]:
    """Names of all coordinates appearing in ``e``."""
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Coord):
            out.add(node.name)
        elif isinstance(node, (Neg, Func)):
            stack.append(node.arg)
        elif isinstance(node, Pow):
            stack.append(node.base)
        elif isinstance(node, (Add, Sub, Mul, Div)):
            stack.extend((node.left, node.right))
    return out


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", source, _byte_offset(source, pos))
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), _byte_offset(source, m.start(kind))))
        pos = m.end()
    toks.append(_Tok("end", "", _byte_offset(source, n)))
    return toks


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


class _Parser:
    def __init__(self, source: str, coords, constants):
        self.source = source
        self.toks = _tokenize(source)
        self.i = 0
        self.coords = None if coords is None else set(coords)
        self.constants = dict(constants or {})

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message: str, tok: _Tok | None = None, cls=ExprSyntaxError):
        tok = tok or self.tok
        return cls(message, self.source, tok.offset)

    def expect(self, text: str) -> None:
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        self.i += 1

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected token {self.tok.text!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self) -> Expr:
        e, literal = self.factor()
        while self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            rhs, rhs_literal = self.factor()
            if op == "*":
                e, literal = Mul(e, rhs), False
            elif literal and rhs_literal and rhs.value != 0:
                # "2/3" in constant position is an exact rational
                e, literal = Const(e.value / rhs.value), False
            else:
                e, literal = Div(e, rhs), False
        return e

    def factor(self) -> tuple[Expr, bool]:
        negate = False
        if self.tok.text == "-":
            negate = True
            self.i += 1
        e, literal = self.atom()
        if self.tok.text == "^":
            self.i += 1
            e = Pow(e, self.integer())
            literal = False
        if negate:
            return Neg(e), False
        return e, literal

    def integer(self) -> int:
        paren = self.tok.text == "("
        if paren:
            self.i += 1
        sign = 1
        if self.tok.text in ("-", "+"):
            sign = -1 if self.tok.text == "-" else 1
            self.i += 1
        tok = self.tok
        if tok.kind != "num" or not tok.text.isdigit():
            raise self.error("exponent must be an integer literal")
        self.i += 1
        if paren:
            self.expect(")")
        return sign * int(tok.text)

    def atom(self) -> tuple[Expr, bool]:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(Fraction(tok.text)), tok.text.isdigit()
        if tok.kind == "ident":
            self.i += 1
            if tok.text in FUNCTIONS:
                if self.tok.text != "(":
                    raise self.error(f"function {tok.text!r} needs an argument")
                self.i += 1
                arg = self.expr()
                self.expect(")")
                return Func(tok.text, arg), False
            if self.tok.text == "(":
                raise self.error(f"unknown function {tok.text!r}", tok, UnknownIdentifierError)
            if tok.text in self.constants:
                return as_expr(self.constants[tok.text]), False
            if self.coords is not None and tok.text not in self.coords:
                raise self.error(f"unknown identifier {tok.text!r}", tok, UnknownIdentifierError)
            return Coord(tok.text), False
        if tok.text == "(":
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e, False
        found = tok.text or "end of input"
        raise self.error(f"unexpected token {found!r}")


def parse(
    source: str,
    coords: Iterable[str] | None = None,
    constants: Mapping[str, object] | None = None,
) -> Expr:
    """Parse ``source`` into an expression tree.

    ``coords`` restricts which identifiers are accepted as coordinates (any
    identifier is accepted when omitted). ``constants`` maps names to values
    that are substituted at parse time.
    """
    return _Parser(source, coords, constants).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _const_source(v: Fraction) -> str:
    if v.denominator == 1:
        s = str(v.numerator)
    else:
        s = f"{abs(v.numerator)}/{v.denominator}"
        s = f"-({s})" if v < 0 else f"({s})"
        return s
    return f"({s})" if v < 0 else s


def to_source(e: Expr) -> str:
    """Fully parenthesized source text; ``parse(to_source(e))`` evaluates like ``e``."""
    if isinstance(e, Const):
        return _const_source(e.value)
    if isinstance(e, Coord):
        return e.name
    if isinstance(e, Neg):
        return f"-({to_source(e.arg)})"
    if isinstance(e, Add):
        return f"({to_source(e.left)} + {to_source(e.right)})"
    if isinstance(e, Sub):
        return f"({to_source(e.left)} - {to_source(e.right)})"
    if isinstance(e, Mul):
        return f"({to_source(e.left)}*{to_source(e.right)})"
    if isinstance(e, Div):
        return f"({to_source(e.left)}/{to_source(e.right)})"
    if isinstance(e, Pow):
        k = f"({e.exp})" if e.exp < 0 else str(e.exp)
        return f"({to_source(e.base)})^{k}"
    if isinstance(e, Func):
        return f"{e.name}({to_source(e.arg)})"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------


def differentiate(e: Expr, var: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to coordinate ``var``.

    The result is passed through :func:`simplify`.
    """
    return simplify(_d(e, var))


def _d(e: Expr, v: str) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Coord):
        return ONE if e.name == v else ZERO
    if isinstance(e, Neg):
        return Neg(_d(e.arg, v))
    if isinstance(e, Add):
        return Add(_d(e.left, v), _d(e.right, v))
    if isinstance(e, Sub):
        return Sub(_d(e.left, v), _d(e.right, v))
    if isinstance(e, Mul):
        return Add(Mul(_d(e.left, v), e.right), Mul(e.left, _d(e.right, v)))
    if isinstance(e, Div):
        # (u/w)' = u'/w - u w'/w^2
        u, w = e.left, e.right
        return Sub(Div(_d(u, v), w), Div(Mul(u, _d(w, v)), Pow(w, 2)))
    if isinstance(e, Pow):
        if e.exp == 0:
            return ZERO
        return Mul(Mul(Const(e.exp), Pow(e.base, e.exp - 1)), _d(e.base, v))
    if isinstance(e, Func):
        a = e.arg
        da = _d(a, v)
        if e.name == "sin":
            outer = Func("cos", a)
        elif e.name == "cos":
            outer = Neg(Func("sin", a))
        elif e.name == "exp":
            outer = e
        elif e.name == "log":
            outer = Pow(a, -1)
        else:  # sqrt
            outer = Div(Const(Fraction(1, 2)), e)
        return Mul(outer, da)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate(e: Expr, env: Mapping[str, float]) -> float:
    """Evaluate by walking the tree; raises :class:`DomainError` naming the culprit."""
    if isinstance(e, Const):
        return float(e.value)
    if isinstance(e, Coord):
        try:
            return float(env[e.name])
        except KeyError:
            raise ExprError(f"coordinate {e.name!r} is not bound") from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Add):
        return evaluate(e.left, env) + evaluate(e.right, env)
    if isinstance(e, Sub):
        return evaluate(e.left, env) - evaluate(e.right, env)
    if isinstance(e, Mul):
        return evaluate(e.left, env) * evaluate(e.right, env)
    if isinstance(e, Div):
        num = evaluate(e.left, env)
        den = evaluate(e.right, env)
        if den == 0.0:
            raise DomainError("division by zero", e.right)
        return num / den
    if isinstance(e, Pow):
        b = evaluate(e.base, env)
        if b == 0.0 and e.exp < 0:
            raise DomainError("negative power of zero", e.base)
        return b**e.exp
    if isinstance(e, Func):
        a = evaluate(e.arg, env)
        if e.name == "log" and a <= 0.0:
            raise DomainError("log of non-positive value", e.arg)
        if e.name == "sqrt" and a < 0.0:
            raise DomainError("sqrt of negative value", e.arg)
        try:
            return getattr(math, e.name)(a)
        except OverflowError:
            raise DomainError("overflow", e) from None
    raise TypeError(f"not an expression: {e!r}")


def _py_source(e: Expr) -> str:
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Coord):
        return f"_v[{e.name!r}]"
    if isinstance(e, Neg):
        return f"(-{_py_source(e.arg)})"
    if isinstance(e, (Add, Sub, Mul, Div)):
        op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
        return f"({_py_source(e.left)}{op}{_py_source(e.right)})"
    if isinstance(e, Pow):
        return f"({_py_source(e.base)}**{e.exp})"
    if isinstance(e, Func):
        return f"_m.{e.name}({_py_source(e.arg)})"
    raise TypeError(f"not an expression: {e!r}")


def compile_expr(e: Expr) -> Callable[[Mapping[str, float]], float]:
    """Compile to a fast evaluator with the same semantics as :func:`evaluate`.

    Arithmetic faults in the fast path are re-run through :func:`evaluate`
    so the raised :class:`DomainError` names the offending subexpression.
    """
    code = compile(f"lambda _v: {_py_source(e)}", "<expr>", "eval")
    fast = eval(code, {"_m": math})

    def fn(env: Mapping[str, float]) -> float:
        try:
            return fast(env)
        except (ZeroDivisionError, ValueError, OverflowError):
            return evaluate(e, env)
        except KeyError as exc:
            raise ExprError(f"coordinate {exc.args[0]!r} is not bound") from None

    return fn


# ---------------------------------------------------------------------------
# Simplification
# ---------------------------------------------------------------------------


@lru_cache(maxsize=200_000)
def simplify(e: Expr) -> Expr:
    """Local rewriting: identities, annihilators, constant folding, power merging.

    The output evaluates like the input wherever the input is defined.
    """
    if isinstance(e, (Const, Coord)):
        return e
    if isinstance(e, Func):
        return _fold_func(e.name, simplify(e.arg))
    if isinstance(e, (Neg, Add, Sub)):
        return _build_sum(*_collect_sum(e))
    if isinstance(e, (Mul, Div, Pow)):
        return _build_product(*_collect_product(e))
    raise TypeError(f"not an expression: {e!r}")


def _fold_func(name: str, arg: Expr) -> Expr:
    if isinstance(arg, Const):
        v = arg.value
        if v == 0 and name in ("sin",):
            return ZERO
        if v == 0 and name in ("cos", "exp"):
            return ONE
        if v == 1 and name == "log":
            return ZERO
        if name == "sqrt" and v >= 0:
            num, den = math.isqrt(v.numerator), math.isqrt(v.denominator)
            if num * num == v.numerator and den * den == v.denominator:
                return Const(Fraction(num, den))
    return Func(name, arg)


def _collect_sum(e: Expr) -> tuple[Fraction, dict]:
    """Flatten into constant + sum of coefficient*term, merging equal terms."""
    const = Fraction(0)
    terms: dict[Expr, Fraction] = {}

    def visit(node: Expr, sign: int) -> None:
        nonlocal const
        if isinstance(node, Neg):
            visit(node.arg, -sign)
        elif isinstance(node, Add):
            visit(node.left, sign)
            visit(node.right, sign)
        elif isinstance(node, Sub):
            visit(node.left, sign)
            visit(node.right, -sign)
        else:
            s = simplify(node)
            if isinstance(s, (Add, Sub, Neg)):
                visit(s, sign)
                return
            coef, rest = _split_coefficient(s)
            if rest is None:
                const += sign * coef
            else:
                terms[rest] = terms.get(rest, Fraction(0)) + sign * coef

    visit(e, 1)
    return const, terms


def _split_coefficient(e: Expr) -> tuple[Fraction, Expr | None]:
    if isinstance(e, Const):
        return e.value, None
    if isinstance(e, Mul) and isinstance(e.left, Const):
        return e.left.value, e.right
    if isinstance(e, Div) and isinstance(e.left, Mul) and isinstance(e.left.left, Const):
        return e.left.left.value, Div(e.left.right, e.right)
    if isinstance(e, Div) and isinstance(e.left, Const) and e.left.value != 1:
        return e.left.value, Div(ONE, e.right)
    return Fraction(1), e


def _build_sum(const: Fraction, terms: dict) -> Expr:
    out: Expr | None = None
    for term, coef in terms.items():
        if coef == 0:
            continue
        mag = term if abs(coef) == 1 else _scaled(abs(coef), term)
        if out is None:
            out = mag if coef > 0 else Neg(mag)
        else:
            out = Add(out, mag) if coef > 0 else Sub(out, mag)
    if const != 0 or out is None:
        c = Const(abs(const)) if out is not None else Const(const)
        if out is None:
            return c
        out = Add(out, c) if const > 0 else Sub(out, c)
    return out


def _scaled(coef: Fraction, term: Expr) -> Expr:
    if isinstance(term, Div) and term.left == ONE:
        return Div(Const(coef), term.right)
    if isinstance(term, Div):
        return Div(Mul(Const(coef), term.left), term.right)
    return Mul(Const(coef), term)


def _collect_product(e: Expr) -> tuple[Fraction, dict]:
    """Flatten into rational coefficient * prod(base^k), merging equal bases."""
    coef = Fraction(1)
    powers: dict[Expr, int] = {}

    def visit(node: Expr, k: int) -> None:
        nonlocal coef
        if k == 0:
            return
        if isinstance(node, Mul):
            visit(node.left, k)
            visit(node.right, k)
        elif isinstance(node, Div):
            visit(node.left, k)
            visit(node.right, -k)
        elif isinstance(node, Pow):
            visit(node.base, k * node.exp)
        else:
            s = simplify(node)
            if isinstance(s, (Mul, Div, Pow)):
                visit(s, k)
            elif isinstance(s, Const):
                if s.value == 0 and k < 0:
                    powers[s] = powers.get(s, 0) + k
                else:
                    coef *= s.value**k
            elif isinstance(s, Neg):
                coef *= (-1) ** (k % 2)
                visit(s.arg, k)
            else:
                powers[s] = powers.get(s, 0) + k

    visit(e, 1)
    return coef, powers


def _build_product(coef: Fraction, powers: dict) -> Expr:
    if coef == 0 and not any(k < 0 for k in powers.values()):
        return ZERO
    num: Expr | None = None
    den: Expr | None = None
    for base, k in powers.items():
        if k == 0:
            continue
        f = base if abs(k) == 1 else Pow(base, abs(k))
        if k > 0:
            num = f if num is None else Mul(num, f)
        else:
            den = f if den is None else Mul(den, f)
    # a product that is itself a sum scaled by a constant is redistributed
    if num is not None and isinstance(num, (Add, Sub)) and den is None and coef != 1:
        const, terms = _collect_sum(num)
        return _build_sum(const * coef, {t: c * coef for t, c in terms.items()})
    if num is None:
        num = Const(coef)
    elif coef == -1:
        num = Neg(num)
    elif coef != 1:
        num = Mul(Const(coef), num)
    return num if den is None else Div(num, den)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace coordinates by expressions."""
    if isinstance(e, Coord):
        return mapping.get(e.name, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Func):
        return Func(e.name, substitute(e.arg, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exp)
    return type(e)(substitute(e.left, mapping), substitute(e.right, mapping))


def determinant(m: Sequence[Sequence[Expr]]) -> Expr:
    """Symbolic determinant by cofactor expansion (small matrices only)."""
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return simplify(Sub(Mul(m[0][0], m[1][1]), Mul(m[0][1], m[1][0])))
    total: Expr = ZERO
    for j in range(n):
        if m[0][j] == ZERO:
            continue
        minor = [row[:j] + row[j + 1 :] for row in m[1:]]
        term = Mul(m[0][j], determinant(minor))
        total = Add(total, term) if j % 2 == 0 else Sub(total, term)
    return simplify(total)
