"""Morita classification of irrational tori ℝ/(ℤ + αℤ) for quadratic irrational α.

Two such tori are equivalent exactly when α and β lie in one GL(2,ℤ) orbit under
fractional linear maps.  For quadratic irrationals this is decided by comparing the
periodic tails of their continued fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .affine import AffineGroup, AffineMap
from .bibundle import BundleClass, LiftFamily, Lift, from_functor, orbit_map
from .groupoid import ActionGroupoid
from .model import OpenBoxSet
from .scalar import Quadratic, Rational, Scalar, parse, quadratic, squarefree_decompose
from .verdict import Decision


@dataclass(frozen=True)
class QuadraticIrrational:
    """``(P + sqrt(D)) / Q`` with ``Q | D - P^2`` and D a positive non-square.

    Among the valid triples for a value, the one with the smallest |Q| is kept,
    so equal values (with the same radicand class) compare equal.
    """

    P: int
    Q: int
    D: int

    def __post_init__(self):
        if self.Q == 0:
            raise ValueError("Q must be nonzero")
        if self.D <= 0 or math.isqrt(self.D) ** 2 == self.D:
            raise ValueError(f"D = {self.D} must be a positive non-square")
        if (self.D - self.P * self.P) % self.Q:
            raise ValueError("Q must divide D - P^2")

    @classmethod
    def from_scalar(cls, x) -> QuadraticIrrational:
        if isinstance(x, str):
            x = parse(x)
        if not isinstance(x, Quadratic):
            raise ValueError(f"{x} is not a quadratic irrational")
        L = math.lcm(x.a.denominator, x.b.denominator)
        P, B, Q = int(x.a * L), int(x.b * L), L
        if B < 0:
            P, B, Q = -P, -B, -Q
        D = B * B * x.d
        if (D - P * P) % Q:
            P, D, Q = P * abs(Q), D * Q * Q, Q * abs(Q)
        return cls._reduced(P, Q, D)

    @classmethod
    def _reduced(cls, P: int, Q: int, D: int) -> QuadraticIrrational:
        k, _ = squarefree_decompose(D)
        g = math.gcd(P, Q, k)
        for f in sorted((f for f in range(1, g + 1) if g % f == 0), reverse=True):
            p, q, dd = P // f, Q // f, D // (f * f)
            if (dd - p * p) % q == 0:
                return cls(p, q, dd)
        return cls(P, Q, D)

    @classmethod
    def parse(cls, text: str) -> QuadraticIrrational:
        return cls.from_scalar(parse(text))

    @property
    def value(self) -> Scalar:
        k, m = squarefree_decompose(self.D)
        return quadratic(Fraction(self.P, self.Q), Fraction(k, self.Q), m)

    @property
    def field(self) -> int:
        return squarefree_decompose(self.D)[1]

    def __float__(self) -> float:
        return float(self.value)

    def __str__(self) -> str:
        return f"({self.P}+√{self.D})/{self.Q}"


def _floor_state(P: int, Q: int, D: int) -> int:
    r = math.isqrt(D)
    if Q > 0:
        return (P + r) // Q
    # sqrt(D) is irrational, so the ceiling of the positive quotient is its floor plus one
    return -((P + r) // -Q + 1)


@dataclass(frozen=True)
class ContinuedFraction:
    preperiod: tuple[int, ...]
    period: tuple[int, ...]
    states: tuple[tuple[int, int], ...]  # (P, Q) of each complete quotient, preperiod then period
    D: int

    def quotient(self, i: int) -> int:
        k = len(self.preperiod)
        if i < k:
            return self.preperiod[i]
        return self.period[(i - k) % len(self.period)]

    def quotients(self, count: int) -> list[int]:
        return [self.quotient(i) for i in range(count)]

    def complete_quotient(self, i: int) -> QuadraticIrrational:
        """The tail value ``x_i = [a_i; a_{i+1}, ...]``."""
        k = len(self.preperiod)
        j = i if i < k else k + (i - k) % len(self.period)
        P, Q = self.states[j]
        return QuadraticIrrational(P, Q, self.D)

    def convergents(self, count: int) -> list[tuple[int, int]]:
        p0, p1, q0, q1 = 0, 1, 1, 0
        out = []
        for a in self.quotients(count):
            p0, p1 = p1, a * p1 + p0
            q0, q1 = q1, a * q1 + q0
            out.append((p1, q1))
        return out

    def matrix(self, m: int) -> tuple[tuple[int, int], tuple[int, int]]:
        """``M(m) = prod_{i<m} [[a_i, 1], [1, 0]]``; then ``x_0 = M(m) · x_m`` as a Möbius map."""
        M = ((1, 0), (0, 1))
        for a in self.quotients(m):
            M = _matmul(M, ((a, 1), (1, 0)))
        return M

    def to_json(self) -> dict:
        return {"preperiod": list(self.preperiod), "period": list(self.period)}


def continued_fraction(alpha) -> ContinuedFraction:
    """Exact, eventually periodic expansion via the ``(P, Q)`` state recurrence."""
    if not isinstance(alpha, QuadraticIrrational):
        alpha = QuadraticIrrational.from_scalar(alpha)
    P, Q, D = alpha.P, alpha.Q, alpha.D
    seen: dict[tuple[int, int], int] = {}
    terms: list[int] = []
    states: list[tuple[int, int]] = []
    while (P, Q) not in seen:
        seen[(P, Q)] = len(terms)
        states.append((P, Q))
        a = _floor_state(P, Q, D)
        terms.append(a)
        P = a * Q - P
        Q = (D - P * P) // Q
    start = seen[(P, Q)]
    return ContinuedFraction(tuple(terms[:start]), tuple(terms[start:]), tuple(states), D)


# -- witnesses --------------------------------------------------------------------

Matrix = tuple[tuple[int, int], tuple[int, int]]


def _matmul(X: Matrix, Y: Matrix) -> Matrix:
    return (
        (X[0][0] * Y[0][0] + X[0][1] * Y[1][0], X[0][0] * Y[0][1] + X[0][1] * Y[1][1]),
        (X[1][0] * Y[0][0] + X[1][1] * Y[1][0], X[1][0] * Y[0][1] + X[1][1] * Y[1][1]),
    )


def _unimodular_inverse(X: Matrix) -> Matrix:
    (a, b), (c, d) = X
    det = a * d - b * c
    if det not in (1, -1):
        raise ValueError("matrix is not unimodular")
    return ((d * det, -b * det), (-c * det, a * det))


@dataclass(frozen=True)
class WitnessMatrix:
    """Integer ``(a, b; c, d)`` with ``ad - bc = ±1``, acting by ``x -> (a x + b) / (c x + d)``."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.det not in (1, -1):
            raise ValueError(f"determinant {self.det} is not ±1")

    @classmethod
    def of(cls, M: Matrix) -> WitnessMatrix:
        return cls(M[0][0], M[0][1], M[1][0], M[1][1])

    @classmethod
    def identity(cls) -> WitnessMatrix:
        return cls(1, 0, 0, 1)

    @property
    def det(self) -> int:
        return self.a * self.d - self.b * self.c

    @property
    def rows(self) -> Matrix:
        return ((self.a, self.b), (self.c, self.d))

    def apply(self, x) -> Scalar:
        x = x.value if isinstance(x, QuadraticIrrational) else x
        return (Rational(self.a) * x + self.b) / (Rational(self.c) * x + self.d)

    def inverse(self) -> WitnessMatrix:
        return WitnessMatrix.of(_unimodular_inverse(self.rows))

    def __matmul__(self, other: WitnessMatrix) -> WitnessMatrix:
        return WitnessMatrix.of(_matmul(self.rows, other.rows))

    def to_json(self) -> list[list[int]]:
        return [[self.a, self.b], [self.c, self.d]]

    def _size(self) -> tuple:
        entries = (self.a, self.b, self.c, self.d)
        return (max(map(abs, entries)), sum(map(abs, entries)), self.det != 1, entries)


def verify_witness(alpha, beta, W: WitnessMatrix) -> bool:
    a = alpha.value if isinstance(alpha, QuadraticIrrational) else alpha
    b = beta.value if isinstance(beta, QuadraticIrrational) else beta
    return W.apply(a) == b


def morita_equivalent(alpha, beta) -> Decision:
    """Yes (with a :class:`WitnessMatrix` sending α to β) or No.

    α and β are equivalent iff some complete quotient of α equals some complete
    quotient of β; then ``M_β(n) · M_α(m)^-1`` maps α to β.  All matching index
    pairs over a few periods are tried and the smallest matrix is returned
    (by max entry, then entry sum, preferring det +1).
    """
    alpha = alpha if isinstance(alpha, QuadraticIrrational) else QuadraticIrrational.from_scalar(alpha)
    beta = beta if isinstance(beta, QuadraticIrrational) else QuadraticIrrational.from_scalar(beta)
    cfa, cfb = continued_fraction(alpha), continued_fraction(beta)
    if alpha.field != beta.field:
        return Decision.no(detail=f"different fields Q(√{alpha.field}) and Q(√{beta.field})")
    span_a = len(cfa.preperiod) + 3 * len(cfa.period) + 2
    span_b = len(cfb.preperiod) + 3 * len(cfb.period) + 2
    tails_b: dict[Scalar, list[int]] = {}
    for n in range(span_b):
        tails_b.setdefault(cfb.complete_quotient(n).value, []).append(n)
    best: WitnessMatrix | None = None
    for m in range(span_a):
        for n in tails_b.get(cfa.complete_quotient(m).value, ()):
            W = WitnessMatrix.of(_matmul(cfb.matrix(n), _unimodular_inverse(cfa.matrix(m))))
            if best is None or W._size() < best._size():
                best = W
    if best is None:
        return Decision.no(detail="periods are not cyclic rotations of each other")
    if not verify_witness(alpha, beta, best):
        raise AssertionError(f"witness {best.to_json()} fails exact verification")
    return Decision.yes(best)


def report(alpha, beta) -> dict:
    alpha = alpha if isinstance(alpha, QuadraticIrrational) else QuadraticIrrational.from_scalar(alpha)
    beta = beta if isinstance(beta, QuadraticIrrational) else QuadraticIrrational.from_scalar(beta)
    d = morita_equivalent(alpha, beta)
    return {
        "equivalent": d.is_yes,
        "witness": d.witness.to_json() if d.is_yes else None,
        "cf": {"alpha": continued_fraction(alpha).to_json(), "beta": continued_fraction(beta).to_json()},
    }


# -- groupoids and bibundles ---------------------------------------------------------


def groupoids_for(alpha) -> ActionGroupoid:
    """The action groupoid of ⟨x ↦ x + 1, x ↦ x + α⟩ on ℝ."""
    value = alpha.value if isinstance(alpha, QuadraticIrrational) else (parse(alpha) if isinstance(alpha, str) else alpha)
    return ActionGroupoid(AffineGroup.translations([1], [value]), OpenBoxSet.whole(1))


def lift_witness_to_bibundle(alpha, beta, W: WitnessMatrix) -> LiftFamily:
    """The invertible family with single lift ``x -> x / (cα + d)``.

    Scaling by ``1/(cα + d)`` carries ℤ + αℤ onto ℤ + βℤ when W is unimodular,
    so it descends to a diffeomorphism of the tori.
    """
    a = alpha.value if isinstance(alpha, QuadraticIrrational) else (parse(alpha) if isinstance(alpha, str) else alpha)
    b = beta.value if isinstance(beta, QuadraticIrrational) else (parse(beta) if isinstance(beta, str) else beta)
    if not verify_witness(a, b, W):
        raise ValueError(f"witness {W.to_json()} does not map {a} to {b}")
    scale = (Rational(W.c) * a + W.d).inv()
    G, H = groupoids_for(a), groupoids_for(b)
    P = from_functor(G, H, [Lift(OpenBoxSet.whole(1), AffineMap.line(scale, 0))], samples=5)
    return LiftFamily(G, H, P.lifts, BundleClass.INVERTIBLE if P.claimed >= BundleClass.LOCALLY_INVERTIBLE else P.claimed)


def orbit_bijection_report(P: LiftFamily, samples: int = 100, seed: int = 0) -> dict:
    """Check on sampled orbits that the orbit map of a single-lift family is injective and onto.

    Injectivity: for consecutive sample pairs, source orbit equality agrees with
    target orbit equality (including pairs shifted by a group generator, which
    must stay equal).  Surjectivity: each sampled target point pulls back through
    the inverse lift to a point whose image is orbit-equal to it.
    """
    G, H = P.source, P.target
    lift = P.lifts[0]
    inv = lift.map.inverse()
    om = orbit_map(P)
    pts = [x for _, x in G.sample_base(samples, seed)]
    checked = failures = 0
    for x, y in zip(pts, pts[1:] + pts[:1]):
        for y2 in (y, G.group.generators[-1](x)):
            src = G.compare(x, y2)
            tgt = H.compare(om(x)[1], om(y2)[1])
            if src.is_unknown or tgt.is_unknown:
                continue
            checked += 1
            failures += src.verdict != tgt.verdict
    for _, z in H.sample_base(samples, seed + 1):
        back = om(inv(z))
        d = H.compare(back[1], z)
        checked += 1
        failures += not d.is_yes
    return {"name": "orbit_bijection", "checked": checked, "failures": failures, "pass": failures == 0 and checked > 0}


def equivalence_classes(values: Sequence) -> list[list[int]]:
    """Partition indices of ``values`` into Morita classes (used for test sets)."""
    classes: list[list[int]] = []
    for i, v in enumerate(values):
        for cls in classes:
            if morita_equivalent(values[cls[0]], v).is_yes:
                cls.append(i)
                break
        else:
            classes.append([i])
    return classes
