"""Open box sets, model quasifolds V/Γ and atlases glued by affine transitions.

Quotient points are never materialized: a point of V/Γ is a representative in V,
and two representatives are compared with a bounded, three-valued orbit search.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

from .affine import (
    AffineGroup,
    AffineMap,
    GroupElement,
    GroupKind,
    cached_inverse,
    Point,
    as_point,
    compose,
    invert,
    lattice_coefficients,
    orbit_equal,
)
from .scalar import FieldMismatch, Rational, Scalar, scalar
from .verdict import Decision

DEFAULT_BOUND = 6
DEFAULT_WINDOW = 5


class NotBoxPreserving(ValueError):
    """The affine map is not a scaled permutation, so box images are not boxes."""


@dataclass(frozen=True)
class Interval:
    """Open interval ``(lo, hi)``; ``None`` stands for -inf / +inf."""

    lo: Optional[Scalar]
    hi: Optional[Scalar]

    def __post_init__(self):
        lo = None if self.lo is None else scalar(self.lo)
        hi = None if self.hi is None else scalar(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo is not None and hi is not None and (hi - lo).sign() <= 0:
            raise ValueError(f"empty interval ({lo}, {hi})")

    def __contains__(self, v: Scalar) -> bool:
        return (self.lo is None or (v - self.lo).sign() > 0) and (
            self.hi is None or (self.hi - v).sign() > 0
        )

    def finite_window(self, window: int = DEFAULT_WINDOW) -> tuple[Scalar, Scalar]:
        """Finite sub-interval used for sampling unbounded intervals."""
        lo, hi = self.lo, self.hi
        w = Rational(window)
        if lo is None and hi is None:
            return -w, w
        if lo is None:
            return (hi - 2 * w if (hi + w).sign() <= 0 else -w), hi
        if hi is None:
            return lo, (lo + 2 * w if (lo - w).sign() >= 0 else w)
        return lo, hi

    def representative(self) -> Scalar:
        if self.lo is None and self.hi is None:
            return Rational(0)
        if self.lo is None:
            return self.hi - 1
        if self.hi is None:
            return self.lo + 1
        return (self.lo + self.hi) / 2

    def to_json(self) -> list:
        return [None if self.lo is None else str(self.lo), None if self.hi is None else str(self.hi)]


def _max_lo(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a if (a - b).sign() >= 0 else b


def _min_hi(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a if (a - b).sign() <= 0 else b


Box = tuple[Interval, ...]


def _box_intersect(p: Box, q: Box) -> Box | None:
    out = []
    for a, b in zip(p, q):
        lo, hi = _max_lo(a.lo, b.lo), _min_hi(a.hi, b.hi)
        if lo is not None and hi is not None and (hi - lo).sign() <= 0:
            return None
        out.append(Interval(lo, hi))
    return tuple(out)


def _box_contains(box: Box, x: Point) -> bool:
    return all(c in iv for c, iv in zip(x, box))


def _box_image(box: Box, f: AffineMap) -> Box:
    mono = f.monomial()
    if mono is None:
        raise NotBoxPreserving(f"{f} does not map boxes to boxes")
    out = []
    for r, (j, a) in enumerate(mono):
        iv = box[j]
        lo = None if iv.lo is None else a * iv.lo + f.b[r]
        hi = None if iv.hi is None else a * iv.hi + f.b[r]
        out.append(Interval(lo, hi) if a.sign() > 0 else Interval(hi, lo))
    return tuple(out)


@dataclass(frozen=True)
class OpenBoxSet:
    """A finite union of open boxes in R^n."""

    n: int
    boxes: tuple[Box, ...]

    def __post_init__(self):
        boxes = tuple(tuple(b) for b in self.boxes)
        for b in boxes:
            if len(b) != self.n:
                raise ValueError("box dimension mismatch")
        object.__setattr__(self, "boxes", boxes)

    @classmethod
    def whole(cls, n: int = 1) -> OpenBoxSet:
        return cls(n, (tuple(Interval(None, None) for _ in range(n)),))

    @classmethod
    def empty(cls, n: int = 1) -> OpenBoxSet:
        return cls(n, ())

    @classmethod
    def interval(cls, lo, hi) -> OpenBoxSet:
        return cls(1, ((Interval(lo, hi),),))

    @classmethod
    def box(cls, *bounds: tuple) -> OpenBoxSet:
        """``OpenBoxSet.box((lo0, hi0), (lo1, hi1), ...)`` for a single box."""
        return cls(len(bounds), (tuple(Interval(lo, hi) for lo, hi in bounds),))

    @classmethod
    def union(cls, *sets: OpenBoxSet) -> OpenBoxSet:
        return cls(sets[0].n, tuple(b for s in sets for b in s.boxes))

    @property
    def is_empty(self) -> bool:
        return not self.boxes

    def __contains__(self, x) -> bool:
        x = as_point(x, self.n)
        return any(_box_contains(b, x) for b in self.boxes)

    def intersect(self, other: OpenBoxSet) -> OpenBoxSet:
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        out = []
        for p in self.boxes:
            for q in other.boxes:
                r = _box_intersect(p, q)
                if r is not None and r not in out:
                    out.append(r)
        return OpenBoxSet(self.n, tuple(out))

    def image(self, f: AffineMap) -> OpenBoxSet:
        return OpenBoxSet(self.n, tuple(_box_image(b, f) for b in self.boxes))

    def preimage(self, f: AffineMap) -> OpenBoxSet:
        return self.image(invert(f))

    def uncovered_point(self, box: Box) -> Point | None:
        """A point of ``box`` outside this set, or ``None`` if ``box`` is covered.

        Exact: the box is cut along every endpoint of this set's boxes, and one
        representative per cell (open pieces and the cut points themselves) is tested.
        """
        axes = []
        for r, iv in enumerate(box):
            cuts = set()
            for b in self.boxes:
                for e in (b[r].lo, b[r].hi):
                    if e is not None and e in iv:
                        cuts.add(e)
            cuts = sorted(cuts)
            reps = list(cuts)
            bounds = [iv.lo] + cuts + [iv.hi]
            for lo, hi in zip(bounds, bounds[1:]):
                reps.append(Interval(lo, hi).representative())
            axes.append(reps)
        for x in itertools.product(*axes):
            if x not in self:
                return tuple(x)
        return None

    def contains_set(self, other: OpenBoxSet) -> bool:
        return all(self.uncovered_point(b) is None for b in other.boxes)

    def sample(self, k: int, seed: int = 0, window: int = DEFAULT_WINDOW) -> list[Point]:
        """``k`` deterministic rational points, cycling through the boxes."""
        if self.is_empty or k <= 0:
            return []
        rng = random.Random(seed)
        den = 10**6
        pts = []
        for t in range(k):
            box = self.boxes[t % len(self.boxes)]
            x = []
            for iv in box:
                lo, hi = iv.finite_window(window)
                u = Rational(Fraction(rng.randrange(1, den), den))
                x.append(lo + (hi - lo) * u)
            pts.append(tuple(x))
        return pts

    def probe_points(self, box: Box, window: int = DEFAULT_WINDOW) -> list[Point]:
        """Corner-adjacent and central points of a box (inside it), for sampled checks."""
        axes = []
        for iv in box:
            lo, hi = iv.finite_window(window)
            w = hi - lo
            axes.append([lo + w / 100, lo + w / 2, hi - w / 100])
        return [tuple(p) for p in itertools.product(*axes)]

    def to_json(self) -> dict:
        return {"n": self.n, "boxes": [[iv.to_json() for iv in b] for b in self.boxes]}

    @classmethod
    def from_json(cls, data) -> OpenBoxSet:
        if isinstance(data, str):
            if data in ("R", "ℝ"):
                return cls.whole(1)
            if data.startswith(("R^", "ℝ^")):
                return cls.whole(int(data.split("^")[1]))
            raise ValueError(f"unknown open set shorthand {data!r}")
        boxes = tuple(
            tuple(Interval(None if lo is None else scalar(lo), None if hi is None else scalar(hi)) for lo, hi in b)
            for b in data["boxes"]
        )
        return cls(int(data["n"]), boxes)

    def __str__(self) -> str:
        def iv(i: Interval) -> str:
            return f"({'-∞' if i.lo is None else i.lo}, {'∞' if i.hi is None else i.hi})"

        return " ∪ ".join("×".join(iv(i) for i in b) for b in self.boxes) or "∅"


def maps_into(f: AffineMap, dom: OpenBoxSet, target: OpenBoxSet, window: int = DEFAULT_WINDOW) -> Decision:
    """Does ``f`` send ``dom`` into ``target``?  Exact for box-preserving maps.

    No carries a witness point of ``dom``; for other maps a clean probe is Unknown.
    """
    if f.monomial() is not None:
        for box in dom.boxes:
            y = target.uncovered_point(_box_image(box, f))
            if y is not None:
                return Decision.no(invert(f)(y))
        return Decision.yes()
    for box in dom.boxes:
        for x in dom.probe_points(box, window):
            if f(x) not in target:
                return Decision.no(x)
    return Decision.unknown(detail="non box-preserving map; probes found no escape")


# -- model quasifolds ---------------------------------------------------------


@dataclass(frozen=True)
class ModelQuasifold:
    """The model V/Γ.  V need not be Γ-invariant."""

    V: OpenBoxSet
    group: AffineGroup
    invariance_checked: bool = False

    def __post_init__(self):
        if self.V.n != self.group.n:
            raise ValueError("dim V != dim Γ")

    @property
    def n(self) -> int:
        return self.V.n

    def point(self, x, bound: int = DEFAULT_BOUND) -> OrbitHandle:
        return quotient_point(self, x, bound)

    def with_invariance_checked(self, bound: int = DEFAULT_BOUND) -> ModelQuasifold:
        res = check_invariance(self, bound)
        return ModelQuasifold(self.V, self.group, res.is_yes)

    def to_json(self) -> dict:
        return {"V": self.V.to_json(), "group": self.group.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> ModelQuasifold:
        return cls(OpenBoxSet.from_json(data["V"]), AffineGroup.from_json(data["group"]))


@dataclass(frozen=True)
class OrbitHandle:
    model: ModelQuasifold
    representative: Point
    bound: int = DEFAULT_BOUND

    def compare(self, other: OrbitHandle) -> Decision:
        if other.model != self.model:
            raise ValueError("handles belong to different model quasifolds")
        return orbit_equal(self.model.group, self.representative, other.representative, min(self.bound, other.bound))


def quotient_point(M: ModelQuasifold, x, bound: int = DEFAULT_BOUND) -> OrbitHandle:
    x = as_point(x, M.n)
    if x not in M.V:
        raise ValueError(f"{[str(c) for c in x]} is not in V")
    return OrbitHandle(M, x, bound)


def check_invariance(M: ModelQuasifold, bound: int = DEFAULT_BOUND) -> Decision:
    """Yes when γ·V ⊆ V for every γ; No carries ``(GroupElement, x)`` with γ·x ∉ V.

    Checking generators and their inverses suffices, since maps preserving V form
    a monoid.  Exact for box-preserving generators; other generators fall back to
    probing every enumerated element up to ``bound`` and answer Unknown when clean.
    """
    inconclusive = False
    for letter in M.group.letters():
        g = M.group.letter_map(letter)
        res = maps_into(g, M.V, M.V)
        if res.is_no:
            return Decision.no((GroupElement(g, (letter,)), res.witness))
        if res.is_unknown:
            inconclusive = True
    if not inconclusive:
        return Decision.yes(detail="every generator and inverse maps V into V")
    for el in M.group.enumerate(bound):
        for box in M.V.boxes:
            for x in M.V.probe_points(box):
                if el.map(x) not in M.V:
                    return Decision.no((el, x))
    return Decision.unknown(detail=f"no escape found among elements of word length <= {bound}")


# -- atlases ------------------------------------------------------------------


@dataclass(frozen=True)
class Transition:
    """Affine chart change ``map`` from chart ``src`` (defined on ``dom``) to chart ``tgt``."""

    src: int
    tgt: int
    map: AffineMap
    dom: OpenBoxSet


@dataclass(frozen=True)
class PathWitness:
    """Composite map realizing an orbit relation, with the steps that built it."""

    map: AffineMap
    steps: tuple = ()


@dataclass(frozen=True)
class Atlas:
    charts: tuple[ModelQuasifold, ...]
    cocycle: tuple[Transition, ...] = ()
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        charts = tuple(self.charts)
        cocycle = tuple(self.cocycle)
        labels = tuple(self.labels) or tuple(f"chart{i + 1}" for i in range(len(charts)))
        object.__setattr__(self, "charts", charts)
        object.__setattr__(self, "cocycle", cocycle)
        object.__setattr__(self, "labels", labels)
        if not charts:
            raise ValueError("an atlas needs at least one chart")
        n = charts[0].n
        if any(c.n != n for c in charts):
            raise ValueError("charts of different dimensions")
        for t in cocycle:
            if not (0 <= t.src < len(charts) and 0 <= t.tgt < len(charts)):
                raise ValueError(f"transition references a missing chart: {t.src} -> {t.tgt}")
            if not charts[t.src].V.contains_set(t.dom):
                raise ValueError(f"transition domain {t.dom} is not inside chart {t.src}")
            res = maps_into(t.map, t.dom, charts[t.tgt].V)
            if res.is_no:
                raise ValueError(f"transition {t.src}->{t.tgt} leaves the target chart at {res.witness}")

    @property
    def n(self) -> int:
        return self.charts[0].n

    def chart_sets(self) -> list[OpenBoxSet]:
        return [c.V for c in self.charts]

    def chart_groups(self) -> list[AffineGroup]:
        return [c.group for c in self.charts]

    def point(self, i: int, x, bound: int = DEFAULT_BOUND) -> AtlasHandle:
        return atlas_Pi(self, i, x, bound)

    def cocycle_defects(self, bound: int = 2, samples: int = 10, seed: int = 0) -> list[dict]:
        """Sampled composites of consecutive transitions that match no known transition.

        A composite i -> j -> k passes at x when it equals, as an affine map, some
        chart-k group element after a declared i -> k transition (or after the
        identity when i == k).
        """
        defects = []
        for a, s in enumerate(self.cocycle):
            for b, t in enumerate(self.cocycle):
                if s.tgt != t.src:
                    continue
                comp = compose(t.map, s.map)
                pts = [x for x in s.dom.sample(samples * 4, seed) if s.map(x) in t.dom][:samples]
                for x in pts:
                    cands = [u.map for u in self.cocycle if u.src == s.src and u.tgt == t.tgt and x in u.dom]
                    if s.src == t.tgt:
                        cands.append(AffineMap.identity(self.n))
                    group = self.charts[t.tgt].group
                    ok = any(group.contains(compose(comp, invert(c)), bound).is_yes for c in cands)
                    if not ok:
                        defects.append({"first": a, "second": b, "point": [str(c) for c in x]})
        return defects

    def to_json(self) -> dict:
        return {
            "charts": [dict(c.to_json(), label=lab) for c, lab in zip(self.charts, self.labels)],
            "cocycle": [
                {"from": t.src + 1, "to": t.tgt + 1, "map": t.map.to_json(), "dom": t.dom.to_json()}
                for t in self.cocycle
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> Atlas:
        """Chart numbers in JSON are 1-based."""
        charts = tuple(ModelQuasifold.from_json(c) for c in data["charts"])
        labels = tuple(c.get("label", f"chart{i + 1}") for i, c in enumerate(data["charts"]))
        cocycle = tuple(
            Transition(int(t["from"]) - 1, int(t["to"]) - 1, AffineMap.from_json(t["map"]), OpenBoxSet.from_json(t["dom"]))
            for t in data.get("cocycle", [])
        )
        return cls(charts, cocycle, labels)


@dataclass(frozen=True)
class AtlasHandle:
    atlas: Atlas
    chart: int
    representative: Point
    bound: int = DEFAULT_BOUND

    def compare(self, other: AtlasHandle, max_hops: int = 3) -> Decision:
        if other.atlas != self.atlas:
            raise ValueError("handles belong to different atlases")
        return pseudogroup_orbit(
            self.atlas.chart_sets(),
            self.atlas.chart_groups(),
            self.atlas.cocycle,
            (self.chart, self.representative),
            (other.chart, other.representative),
            min(self.bound, other.bound),
            max_hops,
        )


def atlas_Pi(atlas: Atlas, i: int, x, bound: int = DEFAULT_BOUND) -> AtlasHandle:
    """The global orbit handle of ``x`` in chart ``i`` (the composite of chart inverse and projection)."""
    x = as_point(x, atlas.n)
    if x not in atlas.charts[i].V:
        raise ValueError(f"point is not in chart {i}")
    return AtlasHandle(atlas, i, x, bound)


# -- orbit search over a pseudogroup ---------------------------------------------


@dataclass(frozen=True)
class _Move:
    src: int
    tgt: int
    map: AffineMap
    index: int
    direction: int
    forward: AffineMap  # the declared transition, for domain tests

    def applies(self, x: Point, dom: OpenBoxSet) -> bool:
        return (x in dom) if self.direction > 0 else (cached_inverse(self.forward)(x) in dom)


def transition_moves(transitions: Sequence[Transition]) -> list[_Move]:
    moves = []
    for k, t in enumerate(transitions):
        moves.append(_Move(t.src, t.tgt, t.map, k, 1, t.map))
        moves.append(_Move(t.tgt, t.src, cached_inverse(t.map), k, -1, t.map))
    return moves


def _connected(n_charts: int, transitions: Sequence[Transition], i: int, j: int) -> bool:
    reach = {i}
    changed = True
    while changed:
        changed = False
        for t in transitions:
            for a, b in ((t.src, t.tgt), (t.tgt, t.src)):
                if a in reach and b not in reach:
                    reach.add(b)
                    changed = True
    return j in reach


def _lattice_obstruction(groups, transitions, x: Point, y: Point) -> bool:
    """True when y - x provably avoids every composite of group elements and transitions."""
    if not all(g.kind is GroupKind.TRANSLATION_LATTICE for g in groups):
        return False
    if not all(t.map.is_translation for t in transitions):
        return False
    if not all(c.is_exact for c in x + y):
        return False
    gens = [g.b for grp in groups for g in grp.generators] + [t.map.b for t in transitions]
    diff = tuple(b - a for a, b in zip(x, y))
    try:
        return lattice_coefficients(gens, diff) is None
    except FieldMismatch:
        return True


def pseudogroup_orbit(
    charts: Sequence[OpenBoxSet],
    groups: Sequence[AffineGroup],
    transitions: Sequence[Transition],
    start: tuple[int, Point],
    target: tuple[int, Point],
    bound: int = DEFAULT_BOUND,
    max_hops: int = 3,
) -> Decision:
    """Is ``target`` reachable from ``start`` through chart-group elements and transitions?

    Within chart ``c`` any element of Γ_c relates two points of V_c.  Between charts
    the search follows transitions (both directions) after moving by group elements
    of word length <= ``bound``, for at most ``max_hops`` transitions.  No is only
    returned with a proof: disconnected charts, a lattice obstruction, or a single
    isolated chart whose own orbit test is decisive.
    """
    (i, x), (j, y) = start, target
    x, y = as_point(x), as_point(y)
    if x not in charts[i] or y not in charts[j]:
        raise ValueError("base point outside its chart")
    if (i, x) == (j, y):
        return Decision.yes(PathWitness(AffineMap.identity(len(x))))
    if not _connected(len(charts), transitions, i, j):
        return Decision.no(detail="charts are not linked by any transition")
    if _lattice_obstruction(groups, transitions, x, y):
        return Decision.no(detail="difference is outside the lattice spanned by all translations")
    touching = [t for t in transitions if i in (t.src, t.tgt)]
    if i == j and not touching:
        d = orbit_equal(groups[i], x, y, bound)
        if d.is_yes:
            return Decision.yes(PathWitness(d.witness.map, (("group", i, d.witness.word),)))
        return d

    moves = transition_moves(transitions)
    ident = AffineMap.identity(len(x))
    frontier: list[tuple[int, Point, AffineMap, tuple]] = [(i, x, ident, ())]
    seen = {(i, x)}
    for hop in range(max_hops + 1):
        for c, p, m, steps in frontier:
            if c == j:
                d = orbit_equal(groups[j], p, y, bound)
                if d.is_yes:
                    total = compose(d.witness.map, m)
                    return Decision.yes(PathWitness(total, steps + (("group", j, d.witness.word),)))
        if hop == max_hops:
            break
        nxt = []
        for c, p, m, steps in frontier:
            elements = groups[c].enumerate(bound)
            for mv in moves:
                if mv.src != c:
                    continue
                dom = transitions[mv.index].dom
                for el in elements:
                    q = el.map(p)
                    if q not in charts[c] or not mv.applies(q, dom):
                        continue
                    r = mv.map(q)
                    if r not in charts[mv.tgt] or (mv.tgt, r) in seen:
                        continue
                    seen.add((mv.tgt, r))
                    nxt.append(
                        (
                            mv.tgt,
                            r,
                            compose(mv.map, compose(el.map, m)),
                            steps + (("group", c, el.word), ("transition", mv.index, mv.direction)),
                        )
                    )
        frontier = nxt
        if not frontier:
            break
    return Decision.unknown(detail=f"no relation found within word length {bound} and {max_hops} transitions")
