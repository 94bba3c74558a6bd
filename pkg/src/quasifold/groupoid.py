"""Étale groupoids built from affine data.

Two concrete groupoids share one interface:

* :class:`ActionGroupoid` -- the restricted action groupoid (Γ ⋉ R^n)|_V, arrows (γ, x).
* :class:`GermGroupoid` -- germs of a :class:`Pseudogroup` on a disjoint union of charts.

Base points are pairs ``(chart, point)``; an action groupoid has the single chart 0.
Arrow spaces are never materialized.  Arrows are produced per base point up to a
word bound, ordered by word length and then lexicographically.

Germs of affine maps are stored as the whole map plus a base point.  Two affine
maps with the same germ anywhere are equal, so nothing is lost.  (The arrow space
of such a germ groupoid is Hausdorff for the same reason; there is no finite test
for that, so it is only recorded here.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Union

from .affine import (
    AffineGroup,
    AffineMap,
    GroupElement,
    GroupKind,
    Point,
    as_point,
    cached_inverse,
    compose,
    lattice_coefficients,
    orbit_equal,
)
from .model import (
    DEFAULT_BOUND,
    DEFAULT_WINDOW,
    Atlas,
    ModelQuasifold,
    NotBoxPreserving,
    OpenBoxSet,
    PathWitness,
    Transition,
    pseudogroup_orbit,
    transition_moves,
)
from .scalar import FieldMismatch, Rational
from .verdict import Decision

BasePoint = tuple[int, Point]


def base_point(x, chart: int = 0, n: int | None = None) -> BasePoint:
    """Accept ``(chart, point)`` pairs or a bare point (chart 0)."""
    if isinstance(x, tuple) and len(x) == 2 and isinstance(x[0], int) and isinstance(x[1], (tuple, list)):
        return (x[0], as_point(x[1], n))
    return (chart, as_point(x, n))


@dataclass(frozen=True)
class GermArrow:
    """The germ at ``base`` of ``map``, viewed from chart ``src_chart`` to ``tgt_chart``."""

    src_chart: int
    tgt_chart: int
    map: AffineMap
    base: Point
    word: tuple = field(default=(), compare=False)

    @property
    def source(self) -> BasePoint:
        return (self.src_chart, self.base)

    @property
    def target(self) -> BasePoint:
        return (self.tgt_chart, self.map(self.base))


def identity_germ(chart: int, x) -> GermArrow:
    x = as_point(x)
    return GermArrow(chart, chart, AffineMap.identity(len(x)), x)


def arrow_compose(g: GermArrow, h: GermArrow) -> GermArrow:
    """``g · h``: first ``h``, then ``g``."""
    if g.source != h.target:
        raise ValueError("arrows are not composable: s(g) != t(h)")
    return GermArrow(h.src_chart, g.tgt_chart, compose(g.map, h.map), h.base, h.word + g.word)


def arrow_inverse(g: GermArrow) -> GermArrow:
    return GermArrow(g.tgt_chart, g.src_chart, cached_inverse(g.map), g.map(g.base), ())


@dataclass(frozen=True)
class ActionArrow:
    """The arrow (γ, x) of an action groupoid: source x, target γ·x."""

    element: GroupElement
    base: Point

    src_chart = 0
    tgt_chart = 0

    @property
    def map(self) -> AffineMap:
        return self.element.map

    @property
    def source(self) -> BasePoint:
        return (0, self.base)

    @property
    def target(self) -> BasePoint:
        return (0, self.element.map(self.base))


@dataclass(frozen=True)
class Piece:
    """An arrow family given by one affine map on an open box set (a bisection)."""

    src_chart: int
    tgt_chart: int
    map: AffineMap
    dom: OpenBoxSet


class EtaleGroupoid:
    """Interface shared by the two affine étale groupoids."""

    charts: tuple[OpenBoxSet, ...]

    @property
    def n(self) -> int:
        return self.charts[0].n

    def contains_base(self, bp: BasePoint) -> bool:
        c, x = bp
        return 0 <= c < len(self.charts) and x in self.charts[c]

    def sample_base(self, k: int, seed: int = 0, window: int = DEFAULT_WINDOW) -> list[BasePoint]:
        out: list[BasePoint] = []
        for c, V in enumerate(self.charts):
            out += [(c, p) for p in V.sample(k, seed + c, window)]
        return out


@dataclass(frozen=True)
class ActionGroupoid(EtaleGroupoid):
    group: AffineGroup
    V: OpenBoxSet

    def __post_init__(self):
        if self.group.n != self.V.n:
            raise ValueError("dimension mismatch between group and base")

    @property
    def charts(self) -> tuple[OpenBoxSet, ...]:
        return (self.V,)

    def arrows_at(self, bp, bound: int = DEFAULT_BOUND) -> list[ActionArrow]:
        _, x = base_point(bp, n=self.n)
        if x not in self.V:
            return []
        return [ActionArrow(el, x) for el in self.group.enumerate(bound) if el.map(x) in self.V]

    def compare(self, a, b, bound: int = DEFAULT_BOUND) -> Decision:
        (_, x), (_, y) = base_point(a, n=self.n), base_point(b, n=self.n)
        if x not in self.V or y not in self.V:
            raise ValueError("base point outside V")
        return orbit_equal(self.group, x, y, bound)

    def has_arrow(self, bp, tgt_chart: int, f: AffineMap, bound: int = DEFAULT_BOUND) -> Decision:
        """Is the germ of ``f`` at ``bp`` an arrow?"""
        _, x = base_point(bp, n=self.n)
        if tgt_chart != 0 or x not in self.V or f(x) not in self.V:
            return Decision.no(detail="endpoints outside the base")
        return self.group.contains(f, bound)

    def restrict(self, U: OpenBoxSet | Mapping[int, OpenBoxSet]) -> ActionGroupoid:
        U = U[0] if isinstance(U, Mapping) else U
        return ActionGroupoid(self.group, self.V.intersect(U))

    def pieces(self, bound: int = DEFAULT_BOUND) -> list[Piece]:
        out = []
        for el in self.group.enumerate(bound):
            dom = self.V.intersect(self.V.preimage(el.map))
            if not dom.is_empty:
                out.append(Piece(0, 0, el.map, dom))
        return out

    def has_nonidentity_arrows(self, bound: int = DEFAULT_BOUND) -> Decision:
        """Yes (with a piece) if some γ != id has V ∩ γ⁻¹V nonempty; No when provable."""
        for p in self.pieces(bound):
            if not p.map.is_identity:
                return Decision.yes(p)
        if self.group.is_closed_at(bound):
            return Decision.no(detail="finite group fully enumerated")
        step = _discrete_step_1d(self.group)
        if step is not None and _bounded(self.V):
            lo = min(iv.lo for b in self.V.boxes for iv in b)
            hi = max(iv.hi for b in self.V.boxes for iv in b)
            k = 1
            while step * k < hi - lo:
                for t in (step * k, -step * k):
                    f = AffineMap.translation([t])
                    if not self.V.intersect(self.V.preimage(f)).is_empty:
                        return Decision.yes(Piece(0, 0, f, self.V.intersect(self.V.preimage(f))))
                k += 1
            return Decision.no(detail=f"translation lattice {step}·Z is too coarse for the base")
        return Decision.unknown(detail=f"no nonidentity arrow within word length {bound}")

    def as_germ_groupoid(self) -> GermGroupoid:
        return GermGroupoid(Pseudogroup((self.V,), (self.group,), ()))

    def to_json(self) -> dict:
        return {"kind": "action", "group": self.group.to_json(), "V": self.V.to_json()}


def _bounded(V: OpenBoxSet) -> bool:
    return all(iv.lo is not None and iv.hi is not None for b in V.boxes for iv in b)


def _discrete_step_1d(group: AffineGroup):
    """Positive generator of a rank-one rational translation lattice in R, else None."""
    if group.n != 1 or group.kind is not GroupKind.TRANSLATION_LATTICE:
        return None
    vals = []
    for g in group.generators:
        c = g.b[0]
        if not isinstance(c, Rational):
            return None
        vals.append(c.q)
    vals = [v for v in vals if v != 0]
    if not vals:
        return None
    L = math.lcm(*(v.denominator for v in vals))
    g = math.gcd(*(int(v * L) for v in vals))
    return Rational(Fraction(g, L))


@dataclass(frozen=True)
class Pseudogroup:
    """Transitions on a disjoint union of charts, closed up lazily.

    Generated by every element of each chart group (acting inside its chart)
    and by the declared inter-chart transitions.  Membership of a germ is decided
    by bounded word search.
    """

    charts: tuple[OpenBoxSet, ...]
    chart_groups: tuple[AffineGroup, ...]
    transitions: tuple[Transition, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "charts", tuple(self.charts))
        object.__setattr__(self, "chart_groups", tuple(self.chart_groups))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        if len(self.charts) != len(self.chart_groups):
            raise ValueError("one group per chart is required")

    def generator_pieces(self) -> list[Piece]:
        """The declared generators: chart-group generators and transitions, with inverses."""
        out = []
        for c, (V, grp) in enumerate(zip(self.charts, self.chart_groups)):
            for letter in grp.letters():
                f = grp.letter_map(letter)
                out.append(Piece(c, c, f, _safe_dom(V, f, V)))
        return out + self.transition_pieces()

    def transition_pieces(self) -> list[Piece]:
        out = []
        for t in self.transitions:
            out.append(Piece(t.src, t.tgt, t.map, _safe_dom(t.dom, t.map, self.charts[t.tgt])))
            inv = cached_inverse(t.map)
            try:
                img = t.dom.image(t.map).intersect(self.charts[t.tgt])
            except NotBoxPreserving:
                img = self.charts[t.tgt]
            out.append(Piece(t.tgt, t.src, inv, img))
        return out


def _safe_dom(dom: OpenBoxSet, f: AffineMap, target: OpenBoxSet) -> OpenBoxSet:
    try:
        return dom.intersect(target.preimage(f))
    except NotBoxPreserving:
        return dom


@dataclass(frozen=True)
class GermGroupoid(EtaleGroupoid):
    pseudogroup: Pseudogroup

    @property
    def charts(self) -> tuple[OpenBoxSet, ...]:
        return self.pseudogroup.charts

    def _lattice_only(self) -> bool:
        pg = self.pseudogroup
        return all(g.kind is GroupKind.TRANSLATION_LATTICE for g in pg.chart_groups) and all(
            t.map.is_translation for t in pg.transitions
        )

    def arrows_at(self, bp, bound: int = DEFAULT_BOUND, max_hops: int = 2) -> list[GermArrow]:
        """Germs at ``bp`` of words: group elements (length <= bound) between at most ``max_hops`` transitions."""
        pg = self.pseudogroup
        c0, x = base_point(bp, n=self.n)
        if x not in pg.charts[c0]:
            return []
        moves = transition_moves(pg.transitions)
        ident = AffineMap.identity(len(x))
        out: dict[tuple[int, AffineMap], GermArrow] = {}
        frontier = [(c0, ident, ())]
        for hop in range(max_hops + 1):
            landed = []
            for c, m, word in frontier:
                p = m(x)
                for el in pg.chart_groups[c].enumerate(bound):
                    q = el.map(p)
                    if q not in pg.charts[c]:
                        continue
                    total = compose(el.map, m)
                    w = word + ((("group", c, el.word),) if el.word else ())
                    key = (c, total)
                    if key not in out:
                        out[key] = GermArrow(c0, c, total, x, w)
                        landed.append((c, total, w))
            if hop == max_hops:
                break
            nxt = []
            for c, m, word in landed:
                q = m(x)
                for mv in moves:
                    if mv.src != c or not mv.applies(q, pg.transitions[mv.index].dom):
                        continue
                    r = mv.map(q)
                    if r not in pg.charts[mv.tgt]:
                        continue
                    total = compose(mv.map, m)
                    if (mv.tgt, total) in out:
                        continue
                    nxt.append((mv.tgt, total, word + (("transition", mv.index, mv.direction),)))
            frontier = nxt
            if not frontier:
                break
        return list(out.values())

    def compare(self, a, b, bound: int = DEFAULT_BOUND, max_hops: int = 3) -> Decision:
        pg = self.pseudogroup
        return pseudogroup_orbit(
            pg.charts, pg.chart_groups, pg.transitions, base_point(a, n=self.n), base_point(b, n=self.n), bound, max_hops
        )

    def has_arrow(self, bp, tgt_chart: int, f: AffineMap, bound: int = DEFAULT_BOUND) -> Decision:
        pg = self.pseudogroup
        c, x = base_point(bp, n=self.n)
        if x not in pg.charts[c] or f(x) not in pg.charts[tgt_chart]:
            return Decision.no(detail="endpoints outside the base")
        if c == tgt_chart:
            d = pg.chart_groups[c].contains(f, bound)
            if d.is_yes:
                return Decision.yes(d.witness)
        for arrow in self.arrows_at((c, x), bound):
            if arrow.tgt_chart == tgt_chart and arrow.map == f:
                return Decision.yes(arrow)
        if self._lattice_only():
            if not f.is_translation:
                return Decision.no(detail="every arrow is a translation germ")
            gens = [g.b for grp in pg.chart_groups for g in grp.generators] + [t.map.b for t in pg.transitions]
            try:
                if lattice_coefficients(gens, f.b) is None:
                    return Decision.no(detail="translation outside the lattice of all generators")
            except FieldMismatch:
                return Decision.no(detail="translation outside the generators' field")
        touching = [t for t in pg.transitions if c in (t.src, t.tgt)]
        if c == tgt_chart and not touching:
            d = pg.chart_groups[c].contains(f, bound)
            if d.is_no:
                return d
        return Decision.unknown(detail="germ not realized within the search bounds")

    def restrict(self, U: OpenBoxSet | Mapping[int, OpenBoxSet]) -> GermGroupoid:
        pg = self.pseudogroup
        per = [U.get(c, OpenBoxSet.empty(self.n)) if isinstance(U, Mapping) else U for c in range(len(pg.charts))]
        charts = tuple(V.intersect(u) for V, u in zip(pg.charts, per))
        transitions = []
        for t in pg.transitions:
            dom = _safe_dom(t.dom.intersect(charts[t.src]), t.map, charts[t.tgt])
            if not dom.is_empty:
                transitions.append(Transition(t.src, t.tgt, t.map, dom))
        return GermGroupoid(Pseudogroup(charts, pg.chart_groups, tuple(transitions)))

    def pieces(self, bound: int = DEFAULT_BOUND) -> list[Piece]:
        pg = self.pseudogroup
        out = []
        for c, (V, grp) in enumerate(zip(pg.charts, pg.chart_groups)):
            for el in grp.enumerate(bound):
                dom = V.intersect(V.preimage(el.map))
                if not dom.is_empty:
                    out.append(Piece(c, c, el.map, dom))
        out += pg.transition_pieces()
        return [p for p in out if not p.dom.is_empty]

    def to_json(self) -> dict:
        pg = self.pseudogroup
        atlas = Atlas(tuple(ModelQuasifold(V, g) for V, g in zip(pg.charts, pg.chart_groups)), pg.transitions)
        return {"kind": "germ", "atlas": atlas.to_json()}


Groupoid = Union[ActionGroupoid, GermGroupoid]
Arrow = Union[ActionArrow, GermArrow]


def germ_groupoid_of_atlas(atlas: Atlas) -> GermGroupoid:
    """The germ groupoid of the pseudogroup generated by chart groups and the cocycle."""
    return GermGroupoid(Pseudogroup(atlas.chart_sets(), atlas.chart_groups(), atlas.cocycle))


def restrict(G: Groupoid, U) -> Groupoid:
    """Pullback to U: arrows with source and target in U."""
    return G.restrict(U)


def effect(G: Groupoid, g: Arrow) -> GermArrow:
    """The germ at s(g) of the canonical bisection through g."""
    if isinstance(g, GermArrow):
        return g
    return GermArrow(0, 0, g.map, g.base, (("group", 0, g.element.word),))


def is_effective(G: Groupoid, bound: int = 2, seed: int = 0) -> tuple[bool, dict]:
    """Effectiveness with a certificate.

    Germ groupoids are effective by construction.  For an action groupoid the
    effect functor is injective because distinct affine maps have distinct 1-jets at
    every point; the certificate records that check on enumerated elements at
    sampled base points.
    """
    if isinstance(G, GermGroupoid):
        return True, {"reason": "germ groupoid of a pseudogroup", "variant": "germ"}
    checked = 0
    for _, x in G.sample_base(3, seed):
        jets = {}
        for arrow in G.arrows_at((0, x), bound):
            jet = (arrow.target[1], arrow.map.A)
            if jet in jets:
                return False, {"reason": "two arrows share a 1-jet", "point": [str(c) for c in x]}
            jets[jet] = arrow
            checked += 1
    return True, {"reason": "affine rigidity: distinct elements have distinct 1-jets", "arrows_checked": checked}


def groupoid_from_json(data: dict) -> Groupoid:
    if data["kind"] == "action":
        return ActionGroupoid(AffineGroup.from_json(data["group"]), OpenBoxSet.from_json(data.get("V", "R")))
    if data["kind"] == "germ":
        return germ_groupoid_of_atlas(Atlas.from_json(data["atlas"]))
    raise ValueError(f"unknown groupoid kind {data['kind']!r}")
