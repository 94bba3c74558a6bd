"""Exact scalars over Q and real quadratic fields Q(sqrt d), plus a tolerance-tagged float.

Three concrete types share the :class:`Scalar` interface:

* :class:`Rational` wraps a :class:`fractions.Fraction`.
* :class:`Quadratic` is ``a + b*sqrt(d)`` with rational ``a, b``, square-free ``d >= 2``
  and ``b != 0`` (``b == 0`` always collapses to :class:`Rational`).
* :class:`Approx` is a double together with an absolute tolerance.

Exact values in two different quadratic fields never mix: arithmetic between them
raises :class:`FieldMismatch`.
"""

from __future__ import annotations

import ast
import functools
import math
import re
from fractions import Fraction
from numbers import Rational as _RationalABC
from typing import Union

DEFAULT_TOL = 1e-9


class FieldMismatch(ValueError):
    """Exact operands live in different quadratic fields."""


@functools.lru_cache(maxsize=1024)
def squarefree_decompose(n: int) -> tuple[int, int]:
    """Return ``(k, m)`` with ``n == k*k*m`` and ``m`` square-free."""
    if n < 0:
        raise ValueError("negative radicand")
    if n == 0:
        return 0, 0
    k, m = 1, 1
    p = 2
    while p * p <= n:
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        k *= p ** (e // 2)
        if e % 2:
            m *= p
        p += 1 if p == 2 else 2
    return k, m * n


_FZERO = Fraction(0)


class Scalar:
    """Common base; use :func:`scalar` to coerce Python numbers and strings."""

    __slots__ = ()

    # subclasses implement: sign, __float__, __neg__, _binop hooks

    @property
    def is_exact(self) -> bool:
        return not isinstance(self, Approx)

    def __add__(self, other):
        other = _maybe(other)
        if other is None:
            return NotImplemented
        return _add(self, other)

    def __radd__(self, other):
        other = _maybe(other)
        if other is None:
            return NotImplemented
        return _add(other, self)

    def __sub__(self, other):
        other = _maybe(other)
        if other is None:
            return NotImplemented
        return _add(self, -other)

    def __rsub__(self, other):
        other = _maybe(other)
        if other is None:
            return NotImplemented
        return _add(other, -self)

    def __mul__(self, other):
        other = _maybe(other)
        if other is None:
            return NotImplemented
        return _mul(self, other)

    def __rmul__(self, other):
        other = _maybe(other)
        if other is None:
            return NotImplemented
        return _mul(other, self)

    def __truediv__(self, other):
        other = _maybe(other)
        if other is None:
            return NotImplemented
        return _mul(self, other.inv())

    def __rtruediv__(self, other):
        other = _maybe(other)
        if other is None:
            return NotImplemented
        return _mul(other, self.inv())

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inv() ** (-k)
        result: Scalar = ONE
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __pos__(self):
        return self

    def __lt__(self, other):
        return (self - scalar(other)).sign() < 0

    def __le__(self, other):
        return (self - scalar(other)).sign() <= 0

    def __gt__(self, other):
        return (self - scalar(other)).sign() > 0

    def __ge__(self, other):
        return (self - scalar(other)).sign() >= 0

    def to_approx(self, tol: float = DEFAULT_TOL) -> Approx:
        return Approx(float(self), tol)


class Rational(Scalar):
    __slots__ = ("q",)

    def __init__(self, value: Union[int, Fraction, str] = 0, den: int = 1):
        if den != 1:
            q = Fraction(value) / den
        elif type(value) is Fraction:
            q = value
        else:
            q = Fraction(value)
        object.__setattr__(self, "q", q)

    def __setattr__(self, name, value):
        raise AttributeError("Scalar values are immutable")

    @property
    def a(self) -> Fraction:
        return self.q

    @property
    def b(self) -> Fraction:
        return _FZERO

    @property
    def d(self) -> int:
        return 0

    def sign(self) -> int:
        return (self.q > 0) - (self.q < 0)

    def inv(self) -> Rational:
        if self.q == 0:
            raise ZeroDivisionError("inverse of zero")
        return Rational(1 / self.q)

    def __neg__(self):
        return Rational(-self.q)

    def __float__(self):
        return float(self.q)

    def __eq__(self, other):
        other = _maybe(other)
        if isinstance(other, Rational):
            return self.q == other.q
        if isinstance(other, Approx):
            return other == self
        return False

    def __hash__(self):
        return hash(self.q)

    def __str__(self):
        if self.q.denominator == 1:
            return str(self.q.numerator)
        return f"{self.q.numerator}/{self.q.denominator}"

    def __repr__(self):
        return f"Rational({str(self)!r})"

    def floor(self) -> int:
        return math.floor(self.q)


class Quadratic(Scalar):
    """``a + b*sqrt(d)``; construct through :func:`quadratic`, which normalizes ``b == 0``."""

    __slots__ = ("a", "b", "d")

    def __init__(self, a, b, d: int):
        a = a if type(a) is Fraction else Fraction(a)
        b = b if type(b) is Fraction else Fraction(b)
        if b == 0:
            raise ValueError("b == 0 must be represented as Rational; use quadratic()")
        if d < 2 or squarefree_decompose(d)[0] != 1:
            raise ValueError(f"d = {d} is not a square-free integer >= 2")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)

    def __setattr__(self, name, value):
        raise AttributeError("Scalar values are immutable")

    def sign(self) -> int:
        sa = (self.a > 0) - (self.a < 0)
        sb = (self.b > 0) - (self.b < 0)
        if sa >= 0 and sb >= 0:
            return 1 if (sa or sb) else 0
        if sa <= 0 and sb <= 0:
            return -1
        # opposite signs: compare a^2 with b^2 d
        lhs, rhs = self.a * self.a, self.b * self.b * self.d
        return sa if lhs > rhs else sb

    def conjugate(self) -> Quadratic:
        return Quadratic(self.a, -self.b, self.d)

    def norm(self) -> Fraction:
        return self.a * self.a - self.b * self.b * self.d

    def inv(self) -> Scalar:
        n = self.norm()
        return quadratic(self.a / n, -self.b / n, self.d)

    def __neg__(self):
        return Quadratic(-self.a, -self.b, self.d)

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(self.d)

    def __eq__(self, other):
        other = _maybe(other)
        if isinstance(other, Quadratic):
            return (self.a, self.b, self.d) == (other.a, other.b, other.d)
        if isinstance(other, Approx):
            return other == self
        return False

    def __hash__(self):
        return hash((self.a, self.b, self.d))

    def __str__(self):
        op = "+" if self.b > 0 else "-"
        return f"({_frac_str(self.a)}{op}{_frac_str(abs(self.b))}√{self.d})"

    def __repr__(self):
        return f"Quadratic({str(self)!r})"

    def floor(self) -> int:
        # floor(a + b sqrt d) exactly: reduce to floor of (p + sqrt(D)) / q style bound
        guess = math.floor(float(self))
        for cand in (guess + 1, guess, guess - 1, guess - 2):
            if (self - cand).sign() >= 0:
                if (self - (cand + 1)).sign() < 0:
                    return cand
        # float estimate was far off (huge magnitudes); bisect exactly
        lo, hi = guess - 2, guess + 2
        while (self - lo).sign() < 0:
            lo = 2 * lo - hi
        while (self - hi).sign() >= 0:
            hi = 2 * hi - lo
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if (self - mid).sign() >= 0:
                lo = mid
            else:
                hi = mid
        return lo


class Approx(Scalar):
    __slots__ = ("value", "tol")

    def __init__(self, value: float, tol: float = DEFAULT_TOL):
        if not tol >= 0:
            raise ValueError("tolerance must be non-negative")
        object.__setattr__(self, "value", float(value))
        object.__setattr__(self, "tol", float(tol))

    def __setattr__(self, name, value):
        raise AttributeError("Scalar values are immutable")

    def sign(self) -> int:
        if abs(self.value) <= self.tol:
            return 0
        return 1 if self.value > 0 else -1

    def inv(self) -> Approx:
        if abs(self.value) <= self.tol:
            raise ZeroDivisionError("inverse of an Approx indistinguishable from zero")
        v = abs(self.value)
        return Approx(1.0 / self.value, self.tol / (v * (v - self.tol)))

    def __neg__(self):
        return Approx(-self.value, self.tol)

    def __float__(self):
        return self.value

    def __eq__(self, other):
        other = _maybe(other)
        if other is None:
            return False
        tol = max(self.tol, other.tol if isinstance(other, Approx) else 0.0)
        return abs(self.value - float(other)) <= tol

    __hash__ = None  # tolerance equality is not transitive

    def __str__(self):
        return f"~{self.value!r}±{self.tol!r}"

    def __repr__(self):
        return f"Approx({self.value!r}, {self.tol!r})"


ScalarLike = Union[Scalar, int, Fraction, str]

ZERO = Rational(0)
ONE = Rational(1)


def quadratic(a, b, d: int) -> Scalar:
    """Build ``a + b*sqrt(d)``, collapsing to :class:`Rational` when ``b == 0``.

    ``d`` need not be square-free; square factors are pulled into ``b``.
    """
    a, b = Fraction(a), Fraction(b)
    if b == 0 or d == 0:
        return Rational(a)
    k, m = squarefree_decompose(d)
    if m == 1:
        return Rational(a + b * k)
    return Quadratic(a, b * k, m)


def sqrt(x: ScalarLike) -> Scalar:
    """Exact square root of a non-negative rational."""
    x = scalar(x)
    if isinstance(x, Approx):
        return Approx(math.sqrt(x.value), x.tol)
    if not isinstance(x, Rational):
        raise ValueError("sqrt is only defined on rationals")
    if x.q < 0:
        raise ValueError("sqrt of a negative number")
    p, q = x.q.numerator, x.q.denominator
    return quadratic(0, Fraction(1, q), p * q)


def _frac_str(f: Fraction) -> str:
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def _maybe(x) -> Scalar | None:
    if isinstance(x, Scalar):
        return x
    if isinstance(x, (int, _RationalABC)) and not isinstance(x, bool):
        return Rational(Fraction(x))
    if isinstance(x, bool):
        return Rational(int(x))
    return None


def scalar(x: ScalarLike) -> Scalar:
    """Coerce ints, Fractions and textual forms to a :class:`Scalar`."""
    if isinstance(x, str):
        return parse(x)
    if isinstance(x, float):
        raise TypeError("floats are not exact; wrap them in Approx explicitly")
    s = _maybe(x)
    if s is None:
        raise TypeError(f"cannot interpret {x!r} as a Scalar")
    return s


def _field(x: Scalar, y: Scalar) -> int:
    dx, dy = getattr(x, "d", 0), getattr(y, "d", 0)
    if dx and dy and dx != dy:
        raise FieldMismatch(f"cannot combine Q(√{dx}) with Q(√{dy})")
    return dx or dy


def _same_field(a: Fraction, b: Fraction, d: int) -> Scalar:
    """``a + b√d`` for a ``d`` already known to be square-free."""
    if b == 0:
        return Rational(a)
    q = object.__new__(Quadratic)
    object.__setattr__(q, "a", a)
    object.__setattr__(q, "b", b)
    object.__setattr__(q, "d", d)
    return q


def _add(x: Scalar, y: Scalar) -> Scalar:
    if isinstance(x, Approx) or isinstance(y, Approx):
        tx = x.tol if isinstance(x, Approx) else 0.0
        ty = y.tol if isinstance(y, Approx) else 0.0
        return Approx(float(x) + float(y), tx + ty)
    if isinstance(x, Rational) and isinstance(y, Rational):
        return Rational(x.q + y.q)
    d = _field(x, y)
    return _same_field(x.a + y.a, x.b + y.b, d)


def _mul(x: Scalar, y: Scalar) -> Scalar:
    if isinstance(x, Approx) or isinstance(y, Approx):
        tx = x.tol if isinstance(x, Approx) else 0.0
        ty = y.tol if isinstance(y, Approx) else 0.0
        fx, fy = float(x), float(y)
        return Approx(fx * fy, abs(fx) * ty + abs(fy) * tx + tx * ty)
    if isinstance(x, Rational) and isinstance(y, Rational):
        return Rational(x.q * y.q)
    d = _field(x, y)
    return _same_field(x.a * y.a + x.b * y.b * d, x.a * y.b + x.b * y.a, d)


# -- textual forms ---------------------------------------------------------------

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)(?:\s*/\s*(\d+))?\s*$")
_QUADRATIC_RE = re.compile(
    r"^\s*\(\s*([+-]?\d+(?:/\d+)?)\s*([+-])\s*(\d+(?:/\d+)?)\s*√\s*(\d+)\s*\)\s*$"
)
_APPROX_RE = re.compile(r"^\s*~\s*([^±]+)±\s*(\S+)\s*$")
_DECIMAL_RE = re.compile(r"(\d+\.\d*|\.\d+)")


def parse(text: str) -> Scalar:
    """Parse ``"p/q"``, ``"(a+b√d)"``, ``"~v±t"`` or an expression like ``"(1+sqrt(5))/2"``."""
    m = _RATIONAL_RE.match(text)
    if m:
        return Rational(Fraction(int(m.group(1)), int(m.group(2) or 1)))
    m = _QUADRATIC_RE.match(text)
    if m:
        b = Fraction(m.group(3)) * (1 if m.group(2) == "+" else -1)
        return quadratic(Fraction(m.group(1)), b, int(m.group(4)))
    m = _APPROX_RE.match(text)
    if m:
        return Approx(float(m.group(1)), float(m.group(2)))
    return _parse_expression(text)


def _parse_expression(text: str) -> Scalar:
    src = text.replace("−", "-").replace("·", "*")
    src = re.sub(r"(\d|\))\s*√", r"\1*√", src)
    src = re.sub(r"√\s*(\d+)", r"sqrt(\1)", src)
    src = re.sub(r"√\s*\(", "sqrt(", src)
    src = _DECIMAL_RE.sub(lambda mm: f"({Fraction(mm.group(1))})", src)
    try:
        tree = ast.parse(src.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse scalar {text!r}") from exc
    return _eval(tree.body, text)


def _eval(node: ast.AST, text: str) -> Scalar:
    if isinstance(node, ast.Constant) and isinstance(node.value, int):
        return Rational(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand, text)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        left, right = _eval(node.left, text), _eval(node.right, text)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            return left / right
        if isinstance(node.op, ast.Pow) and isinstance(right, Rational) and right.q.denominator == 1:
            return left ** int(right.q)
    if (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id == "sqrt"
        and len(node.args) == 1
        and not node.keywords
    ):
        return sqrt(_eval(node.args[0], text))
    raise ValueError(f"unsupported syntax in scalar {text!r}")


def field_of(values) -> int:
    """The common quadratic field (0 for Q) of an iterable of exact scalars."""
    d = 0
    for v in values:
        vd = getattr(v, "d", 0)
        if vd:
            if d and vd != d:
                raise FieldMismatch(f"values span Q(√{d}) and Q(√{vd})")
            d = vd
    return d
