"""Invertible affine maps of R^n and finitely generated affine groups.

Groups are always stored through their image in Aff(R^n), so equality of group
elements is equality of ``(A, b)`` and no word problem ever arises.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .scalar import ONE, ZERO, FieldMismatch, Rational, Scalar, field_of, scalar
from .verdict import Decision

Point = tuple[Scalar, ...]
Letter = tuple[int, int]  # (generator index, +1 | -1)


def as_point(x, n: int | None = None) -> Point:
    """Coerce a scalar-like or a sequence of scalar-likes into a point tuple."""
    if isinstance(x, (list, tuple)):
        p = tuple(scalar(c) for c in x)
    else:
        p = (scalar(x),)
    if n is not None and len(p) != n:
        raise ValueError(f"expected a point of dimension {n}, got {len(p)}")
    return p


def _det(rows: list[list[Scalar]]) -> Scalar:
    m = [list(r) for r in rows]
    n = len(m)
    det: Scalar = ONE
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c].sign() != 0), None)
        if piv is None:
            return ZERO
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det = det * m[c][c]
        inv = m[c][c].inv()
        for r in range(c + 1, n):
            f = m[r][c] * inv
            if f.sign() != 0:
                m[r] = [m[r][k] - f * m[c][k] for k in range(n)]
    return det


def _matinv(rows: Sequence[Sequence[Scalar]]) -> list[list[Scalar]]:
    n = len(rows)
    m = [list(r) + [ONE if i == j else ZERO for j in range(n)] for i, r in enumerate(rows)]
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c].sign() != 0), None)
        if piv is None:
            raise ValueError("singular matrix")
        m[c], m[piv] = m[piv], m[c]
        inv = m[c][c].inv()
        m[c] = [v * inv for v in m[c]]
        for r in range(n):
            if r != c and m[r][c].sign() != 0:
                f = m[r][c]
                m[r] = [m[r][k] - f * m[c][k] for k in range(2 * n)]
    return [row[n:] for row in m]


def solve_linear(rows: Sequence[Sequence[Scalar]], rhs: Sequence[Scalar]) -> list[Scalar]:
    """Solve a square exact linear system; raises ``ValueError`` if singular."""
    inv = _matinv(rows)
    return [sum((inv[i][k] * rhs[k] for k in range(len(rhs))), ZERO) for i in range(len(rhs))]


@dataclass(frozen=True)
class AffineMap:
    """``x -> A x + b`` with ``A`` invertible."""

    A: tuple[tuple[Scalar, ...], ...]
    b: tuple[Scalar, ...]

    def __post_init__(self):
        A = tuple(tuple(scalar(v) for v in row) for row in self.A)
        b = tuple(scalar(v) for v in self.b)
        n = len(b)
        if len(A) != n or any(len(row) != n for row in A):
            raise ValueError("A must be n x n with n = len(b)")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if n and _det([list(r) for r in A]).sign() == 0:
            raise ValueError("affine map is not invertible (det A = 0)")

    @property
    def n(self) -> int:
        return len(self.b)

    @classmethod
    def identity(cls, n: int = 1) -> AffineMap:
        return cls.translation([0] * n)

    @classmethod
    def translation(cls, v) -> AffineMap:
        v = as_point(v)
        n = len(v)
        return cls(tuple(tuple(ONE if i == j else ZERO for j in range(n)) for i in range(n)), v)

    @classmethod
    def line(cls, a, b) -> AffineMap:
        """The 1-dimensional map ``x -> a x + b``."""
        return cls(((scalar(a),),), (scalar(b),))

    def __call__(self, x) -> Point:
        x = as_point(x, self.n)
        return tuple(
            sum((self.A[i][j] * x[j] for j in range(self.n)), ZERO) + self.b[i]
            for i in range(self.n)
        )

    def compose(self, other: AffineMap) -> AffineMap:
        """``self ∘ other``."""
        return compose(self, other)

    def inverse(self) -> AffineMap:
        return invert(self)

    @property
    def is_translation(self) -> bool:
        return all(
            self.A[i][j] == (ONE if i == j else ZERO) for i in range(self.n) for j in range(self.n)
        )

    @property
    def is_identity(self) -> bool:
        return self.is_translation and all(c.sign() == 0 for c in self.b)

    def monomial(self) -> list[tuple[int, Scalar]] | None:
        """For each output row, ``(input column, coefficient)`` if ``A`` is a scaled permutation.

        Such maps send boxes to boxes; ``None`` otherwise.
        """
        out = []
        used = set()
        for row in self.A:
            nz = [(j, v) for j, v in enumerate(row) if v.sign() != 0]
            if len(nz) != 1 or nz[0][0] in used:
                return None
            used.add(nz[0][0])
            out.append(nz[0])
        return out

    def linear_part(self) -> AffineMap:
        return AffineMap(self.A, tuple(ZERO for _ in self.b))

    def __str__(self) -> str:
        if self.n == 1:
            return f"x ↦ {self.A[0][0]}·x + {self.b[0]}"
        return f"x ↦ {[[str(v) for v in r] for r in self.A]}·x + {[str(v) for v in self.b]}"

    def to_json(self) -> dict:
        return {"A": [[str(v) for v in row] for row in self.A], "b": [str(v) for v in self.b]}

    @classmethod
    def from_json(cls, data: dict) -> AffineMap:
        return cls(tuple(tuple(scalar(v) for v in row) for row in data["A"]), tuple(scalar(v) for v in data["b"]))


def compose(f: AffineMap, g: AffineMap) -> AffineMap:
    """``f ∘ g = (A_f A_g, A_f b_g + b_f)``."""
    if f.n != g.n:
        raise ValueError(f"dimension mismatch: {f.n} vs {g.n}")
    n = f.n
    A = tuple(
        tuple(sum((f.A[i][k] * g.A[k][j] for k in range(n)), ZERO) for j in range(n))
        for i in range(n)
    )
    b = tuple(sum((f.A[i][k] * g.b[k] for k in range(n)), ZERO) + f.b[i] for i in range(n))
    return AffineMap(A, b)


def invert(f: AffineMap) -> AffineMap:
    """``(A^-1, -A^-1 b)``."""
    Ainv = _matinv(f.A)
    n = f.n
    b = tuple(-sum((Ainv[i][k] * f.b[k] for k in range(n)), ZERO) for i in range(n))
    return AffineMap(tuple(tuple(r) for r in Ainv), b)


class GroupKind(enum.Enum):
    TRANSLATION_LATTICE = "TranslationLattice"
    GENERAL = "General"


@dataclass(frozen=True)
class GroupElement:
    map: AffineMap
    word: tuple[Letter, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class AffineGroup:
    """The subgroup of Aff(R^n) generated by ``generators``."""

    n: int
    generators: tuple[AffineMap, ...]

    def __post_init__(self):
        gens = tuple(self.generators)
        for g in gens:
            if g.n != self.n:
                raise ValueError(f"generator of dimension {g.n} in a group of dimension {self.n}")
        object.__setattr__(self, "generators", gens)

    @property
    def kind(self) -> GroupKind:
        if all(g.is_translation for g in self.generators):
            return GroupKind.TRANSLATION_LATTICE
        return GroupKind.GENERAL

    @classmethod
    def translations(cls, *vectors) -> AffineGroup:
        maps = tuple(AffineMap.translation(v) for v in vectors)
        n = maps[0].n if maps else 1
        return cls(n, maps)

    @classmethod
    def trivial(cls, n: int = 1) -> AffineGroup:
        return cls(n, ())

    def identity(self) -> GroupElement:
        return GroupElement(AffineMap.identity(self.n), ())

    def letters(self) -> list[Letter]:
        out: list[Letter] = []
        for i in range(len(self.generators)):
            out += [(i, 1), (i, -1)]
        return out

    def letter_map(self, letter: Letter) -> AffineMap:
        i, e = letter
        return self.generators[i] if e > 0 else cached_inverse(self.generators[i])

    def evaluate(self, word: Iterable[Letter]) -> AffineMap:
        """Evaluate a word left to right as a composite ``g1 ∘ g2 ∘ ...``."""
        m = AffineMap.identity(self.n)
        for letter in word:
            m = compose(m, self.letter_map(letter))
        return m

    def enumerate(self, max_word_length: int) -> list[GroupElement]:
        """All elements with a word of length <= ``max_word_length``; see :func:`enumerate_group`."""
        return list(_enumerate(self, max_word_length)[0])

    def is_closed_at(self, max_word_length: int) -> bool:
        """True when breadth-first enumeration saturated: the group is finite and fully listed."""
        return _enumerate(self, max_word_length)[1]

    def contains(self, f: AffineMap, bound: int) -> Decision:
        """Is ``f`` an element of the group?  Exact for lattices and saturated finite groups."""
        if f.n != self.n:
            raise ValueError("dimension mismatch")
        if self.kind is GroupKind.TRANSLATION_LATTICE:
            if not f.is_translation:
                return Decision.no(detail="non-translation in a translation group")
            try:
                coeffs = lattice_coefficients([g.b for g in self.generators], f.b)
            except FieldMismatch:
                return Decision.no(detail="translation outside the lattice's field")
            if coeffs is None:
                return Decision.no(detail="exact lattice membership fails")
            return Decision.yes(_lattice_element(self, coeffs))
        for el in self.enumerate(bound):
            if el.map == f:
                return Decision.yes(el)
        if self.is_closed_at(bound):
            return Decision.no(detail=f"finite group fully enumerated at word length {bound}")
        return Decision.unknown(detail=f"word bound {bound} exhausted")

    def to_json(self) -> dict:
        return {"n": self.n, "generators": [g.to_json() for g in self.generators]}

    @classmethod
    def from_json(cls, data: dict) -> AffineGroup:
        return cls(int(data["n"]), tuple(AffineMap.from_json(g) for g in data["generators"]))


@functools.lru_cache(maxsize=4096)
def cached_inverse(f: AffineMap) -> AffineMap:
    return invert(f)


@functools.lru_cache(maxsize=256)
def _enumerate(group: AffineGroup, bound: int) -> tuple[tuple[GroupElement, ...], bool]:
    if bound < 0:
        raise ValueError("max_word_length must be >= 0")
    ident = group.identity()
    seen: dict[AffineMap, GroupElement] = {ident.map: ident}
    frontier = [ident]
    letters = group.letters()
    closed = False
    for _ in range(bound):
        nxt = []
        # frontier holds the lexicographically least shortest word of each element,
        # so extending it in letter order keeps that property for the next layer
        for el in frontier:
            last = el.word[-1] if el.word else None
            for letter in letters:
                if last is not None and letter == (last[0], -last[1]):
                    continue
                m = compose(el.map, group.letter_map(letter))
                if m not in seen:
                    new = GroupElement(m, el.word + (letter,))
                    seen[m] = new
                    nxt.append(new)
        frontier = nxt
        if not frontier:
            closed = True
            break
    if not letters:
        closed = True
    return tuple(seen.values()), closed


def enumerate_group(group: AffineGroup, max_word_length: int) -> list[GroupElement]:
    """Distinct elements reachable by words of length <= ``max_word_length``.

    Ordered by word length, then lexicographically in the letter order
    ``g0, g0^-1, g1, g1^-1, ...``; each element carries that first (shortest) word.
    """
    return group.enumerate(max_word_length)


# -- translation lattices ------------------------------------------------------


def _coords(v: Sequence[Scalar], d: int) -> list[Fraction]:
    out: list[Fraction] = []
    for c in v:
        if not c.is_exact:
            raise TypeError("lattice membership needs exact coordinates")
        if getattr(c, "d", 0) not in (0, d):
            raise FieldMismatch("coordinate outside the working field")
        out += [c.a, c.b]
    return out


def lattice_coefficients(generators: Sequence[Sequence[Scalar]], target: Sequence[Scalar]) -> list[int] | None:
    """Integer ``c`` with ``sum c_i g_i == target`` exactly, or ``None`` if no such ``c`` exists.

    Coordinates are split along the basis ``{1, sqrt d}`` and the question is
    settled by Hermite reduction over the integers.
    """
    d = field_of([c for g in generators for c in g] + list(target))
    rows = [_coords(g, d) for g in generators]
    tgt = _coords(target, d)
    dens = [f.denominator for r in rows for f in r] + [f.denominator for f in tgt]
    L = math.lcm(*dens) if dens else 1
    M = [[int(f * L) for f in r] for r in rows]
    t = [int(f * L) for f in tgt]
    return _integer_solve(M, t)


def _integer_solve(M: list[list[int]], t: list[int]) -> list[int] | None:
    g = len(M)
    if g == 0:
        return [] if all(v == 0 for v in t) else None
    m = len(t)
    H = [row[:] for row in M]
    U = [[1 if i == j else 0 for j in range(g)] for i in range(g)]
    pivots: list[tuple[int, int]] = []
    r = 0
    for c in range(m):
        if r >= g:
            break
        # Euclid down the column until only row r is nonzero
        while True:
            nz = [i for i in range(r, g) if H[i][c] != 0]
            if not nz:
                break
            p = min(nz, key=lambda i: abs(H[i][c]))
            H[r], H[p] = H[p], H[r]
            U[r], U[p] = U[p], U[r]
            done = True
            for i in range(r + 1, g):
                if H[i][c]:
                    q = H[i][c] // H[r][c]
                    H[i] = [a - q * b for a, b in zip(H[i], H[r])]
                    U[i] = [a - q * b for a, b in zip(U[i], U[r])]
                    if H[i][c]:
                        done = False
            if done:
                break
        if H[r][c] != 0:
            pivots.append((r, c))
            r += 1
    res = t[:]
    x = [0] * g
    for row, col in pivots:
        q, rem = divmod(res[col], H[row][col])
        if rem:
            return None
        x[row] = q
        res = [a - q * b for a, b in zip(res, H[row])]
    if any(res):
        return None
    return [sum(x[k] * U[k][i] for k in range(g)) for i in range(g)]


def _lattice_element(group: AffineGroup, coeffs: Sequence[int]) -> GroupElement:
    word: list[Letter] = []
    for i, c in enumerate(coeffs):
        word += [(i, 1 if c > 0 else -1)] * abs(c)
    shift = [ZERO] * group.n
    for i, c in enumerate(coeffs):
        if c:
            shift = [s + Rational(c) * gb for s, gb in zip(shift, group.generators[i].b)]
    return GroupElement(AffineMap.translation(shift), tuple(word))


def orbit_equal(group: AffineGroup, x, y, bound: int) -> Decision:
    """Decide whether ``y`` lies in the orbit of ``x``.

    Yes carries a :class:`GroupElement` with ``gamma(x) == y``.  No is certified
    for translation lattices (exact integer linear algebra) and for finite groups
    whose enumeration saturated; otherwise a failed search is Unknown.
    """
    x, y = as_point(x, group.n), as_point(y, group.n)
    if x == y:
        return Decision.yes(group.identity())
    exact = all(c.is_exact for c in x + y)
    if group.kind is GroupKind.TRANSLATION_LATTICE and exact:
        diff = tuple(b - a for a, b in zip(x, y))
        try:
            coeffs = lattice_coefficients([g.b for g in group.generators], diff)
        except FieldMismatch:
            return Decision.no(detail="difference lies outside the lattice's field")
        if coeffs is None:
            return Decision.no(detail="exact lattice membership fails")
        return Decision.yes(_lattice_element(group, coeffs))
    for el in group.enumerate(bound):
        if el.map(x) == y:
            return Decision.yes(el)
    if exact and group.is_closed_at(bound):
        return Decision.no(detail=f"finite group fully enumerated at word length {bound}")
    return Decision.unknown(detail=f"no witness within word length {bound}")
