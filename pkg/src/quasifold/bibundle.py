"""Bibundles between affine étale groupoids, presented by families of affine local lifts.

A :class:`LiftFamily` from G to H is a finite list of affine maps ``psi`` defined on
open boxes of G's base and landing in H's base.  Over the effective affine groupoids
handled here, every locally invertible bibundle arises this way up to isomorphism,
and two such bibundles are isomorphic exactly when they induce the same map of
orbit spaces.  So the total space with its two actions is never built.  Everything
is computed at the level of lifts and orbit maps.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

from .affine import AffineMap, cached_inverse, compose
from .groupoid import BasePoint, Groupoid, base_point, groupoid_from_json
from .model import DEFAULT_BOUND, DEFAULT_WINDOW, NotBoxPreserving, OpenBoxSet, maps_into
from .verdict import Decision, Verdict

DEFAULT_SAMPLES = 100


class BundleClass(enum.IntEnum):
    PLAIN = 0
    LOCALLY_INVERTIBLE = 1
    INVERTIBLE = 2

    @property
    def label(self) -> str:
        return {0: "Plain", 1: "LocallyInvertible", 2: "Invertible"}[self.value]

    @classmethod
    def from_label(cls, text: str) -> BundleClass:
        return {"Plain": cls.PLAIN, "LocallyInvertible": cls.LOCALLY_INVERTIBLE, "Invertible": cls.INVERTIBLE}[text]


class IncompatibleFunctor(ValueError):
    """A base map does not carry arrows to arrows; ``certificate`` names the arrow."""

    def __init__(self, message: str, certificate: dict):
        super().__init__(message)
        self.certificate = certificate


@dataclass(frozen=True)
class Lift:
    dom: OpenBoxSet
    map: AffineMap
    src_chart: int = 0
    tgt_chart: int = 0

    def covers(self, bp: BasePoint) -> bool:
        return bp[0] == self.src_chart and bp[1] in self.dom

    def apply(self, x: Point) -> BasePoint:
        return (self.tgt_chart, self.map(x))


@dataclass(frozen=True)
class LiftFamily:
    source: Groupoid
    target: Groupoid
    lifts: tuple[Lift, ...]
    claimed: BundleClass = BundleClass.PLAIN

    def __post_init__(self):
        lifts = tuple(self.lifts)
        object.__setattr__(self, "lifts", lifts)
        for lf in lifts:
            if lf.map.n != self.source.n or self.source.n != self.target.n:
                raise ValueError("lift dimension does not match the groupoids")
            if not self.source.charts[lf.src_chart].contains_set(lf.dom):
                raise ValueError(f"lift domain {lf.dom} is not inside the source base")
            res = maps_into(lf.map, lf.dom, self.target.charts[lf.tgt_chart])
            if res.is_no:
                raise ValueError(f"lift {lf.map} leaves the target base at {res.witness}")

    @property
    def is_empty(self) -> bool:
        return not self.lifts

    def lift_at(self, bp: BasePoint) -> Lift | None:
        return next((lf for lf in self.lifts if lf.covers(bp)), None)

    def domain(self, chart: int = 0) -> OpenBoxSet:
        doms = [lf.dom for lf in self.lifts if lf.src_chart == chart]
        return OpenBoxSet.union(*doms) if doms else OpenBoxSet.empty(self.source.n)

    def sample_points(self, k: int, seed: int = 0, window: int = DEFAULT_WINDOW) -> list[BasePoint]:
        charts = sorted({lf.src_chart for lf in self.lifts})
        out: list[BasePoint] = []
        for c in charts:
            out += [(c, x) for x in self.domain(c).sample(k, seed + c, window)]
        return out

    def to_json(self) -> dict:
        return {
            "source": self.source.to_json(),
            "target": self.target.to_json(),
            "lifts": [
                {"dom": lf.dom.to_json(), "map": lf.map.to_json(), "from": lf.src_chart + 1, "to": lf.tgt_chart + 1}
                for lf in self.lifts
            ],
            "class": self.claimed.label,
        }

    @classmethod
    def from_json(cls, data: dict) -> LiftFamily:
        lifts = tuple(
            Lift(OpenBoxSet.from_json(l["dom"]), AffineMap.from_json(l["map"]), int(l.get("from", 1)) - 1, int(l.get("to", 1)) - 1)
            for l in data["lifts"]
        )
        return cls(
            groupoid_from_json(data["source"]),
            groupoid_from_json(data["target"]),
            lifts,
            BundleClass.from_label(data.get("class", "Plain")),
        )


# -- orbit maps -----------------------------------------------------------------


@dataclass(frozen=True)
class OrbitMap:
    """The induced map |P| between orbit spaces, evaluated on representatives."""

    family: LiftFamily
    bound: int = DEFAULT_BOUND

    def evaluate(self, x) -> BasePoint | None:
        """A representative of |P|([x]), or ``None`` when no orbit-translate of x hits a lift."""
        bp = base_point(x, n=self.family.source.n)
        lf = self.family.lift_at(bp)
        if lf is not None:
            return lf.apply(bp[1])
        for arrow in self.family.source.arrows_at(bp, self.bound):
            tgt = arrow.target
            lf = self.family.lift_at(tgt)
            if lf is not None:
                return lf.apply(tgt[1])
        return None

    __call__ = evaluate

    def same_image(self, a: BasePoint | None, b: BasePoint | None) -> Decision:
        """Compare two target representatives (``None`` means the evaluation failed)."""
        if a is None or b is None:
            return Decision.unknown(detail="orbit map undefined within the search bound")
        return self.family.target.compare(a, b, self.bound)


def orbit_map(P: LiftFamily, bound: int = DEFAULT_BOUND) -> OrbitMap:
    return OrbitMap(P, bound)


# -- constructions --------------------------------------------------------------


def identity_bibundle(G: Groupoid) -> LiftFamily:
    lifts = tuple(Lift(V, AffineMap.identity(G.n), c, c) for c, V in enumerate(G.charts))
    return LiftFamily(G, G, lifts, BundleClass.INVERTIBLE)


def from_functor(
    G: Groupoid,
    H: Groupoid,
    base_maps: Sequence[Lift],
    arrow_map: Optional[Callable] = None,
    bound: int = 2,
    samples: int = 20,
    seed: int = 0,
) -> LiftFamily:
    """The bibundle induced by a functor G -> H given by affine base maps.

    Compatibility is checked on sampled arrows: an arrow x -> x' must go to an
    H-arrow F(x) -> F(x').  With ``arrow_map`` (a callable ``arrow -> AffineMap``)
    the image germ is checked directly; otherwise only its existence is.  The
    family is claimed LocallyInvertible when, at every sample, conjugation by the
    base map matches G-arrows inside the domain with H-arrows inside its image.
    """
    base_maps = tuple(base_maps)
    family = LiftFamily(G, H, base_maps, BundleClass.PLAIN)
    local_iso = True
    for k, lf in enumerate(base_maps):
        for x in lf.dom.sample(samples, seed + k):
            bp = (lf.src_chart, x)
            fx = lf.apply(x)
            for arrow in G.arrows_at(bp, bound):
                tgt = arrow.target
                other = family.lift_at(tgt)
                if other is None:
                    continue
                fy = other.apply(tgt[1])
                if arrow_map is not None:
                    h = arrow_map(arrow)
                    image_ok = h(fx[1]) == fy[1] and not H.has_arrow(fx, fy[0], h, bound).is_no
                else:
                    image_ok = not H.compare(fx, fy, max(bound, DEFAULT_BOUND)).is_no
                if not image_ok:
                    raise IncompatibleFunctor(
                        "functor does not send this arrow to an arrow",
                        {"source": [str(c) for c in x], "arrow": str(arrow.map), "chart": lf.src_chart},
                    )
                if other is lf:
                    conj = compose(lf.map, compose(arrow.map, cached_inverse(lf.map)))
                    if not H.has_arrow(fx, lf.tgt_chart, conj, bound).is_yes:
                        local_iso = False
            for harrow in H.arrows_at(fx, bound):
                tchart, y = harrow.target
                if tchart != lf.tgt_chart:
                    continue
                xb = cached_inverse(lf.map)(y)
                if xb not in lf.dom:
                    continue
                conj = compose(cached_inverse(lf.map), compose(harrow.map, lf.map))
                if not G.has_arrow(bp, lf.src_chart, conj, bound).is_yes:
                    local_iso = False
    cls = BundleClass.LOCALLY_INVERTIBLE if local_iso else BundleClass.PLAIN
    return LiftFamily(G, H, base_maps, cls)


def inclusion(G: Groupoid, U) -> LiftFamily:
    """⟨ι_U⟩: the bibundle of the inclusion G|_U -> G."""
    GU = G.restrict(U)
    lifts = [Lift(V, AffineMap.identity(G.n), c, c) for c, V in enumerate(GU.charts) if not V.is_empty]
    return from_functor(GU, G, lifts, samples=5)


def compose_bibundles(P: LiftFamily, Q: LiftFamily, bound: int = 2) -> LiftFamily:
    """Q ∘ P: composites q ∘ h ∘ p over H-arrow pieces h, on exact preimage boxes.

    Pieces are tried identity first; a composite whose domain is already covered by
    earlier composites (from the same source chart) is dropped.
    """
    if P.target != Q.source:
        raise ValueError("target of P must equal source of Q")
    pieces = P.target.pieces(bound)
    lifts: list[Lift] = []
    covered: dict[int, list[OpenBoxSet]] = {}
    for p in P.lifts:
        for h in pieces:
            if h.src_chart != p.tgt_chart:
                continue
            for q in Q.lifts:
                if q.src_chart != h.tgt_chart:
                    continue
                try:
                    inner = h.dom.intersect(q.dom.preimage(h.map))
                    if inner.is_empty:
                        continue
                    dom = p.dom.intersect(inner.preimage(p.map))
                except NotBoxPreserving as exc:
                    raise NotBoxPreserving(f"composition needs box-preserving lifts: {exc}") from exc
                if dom.is_empty:
                    continue
                prior = covered.setdefault(p.src_chart, [])
                if prior and OpenBoxSet.union(*prior).contains_set(dom):
                    continue
                prior.append(dom)
                lifts.append(Lift(dom, compose(q.map, compose(h.map, p.map)), p.src_chart, q.tgt_chart))
    return LiftFamily(P.source, Q.target, tuple(lifts), min(P.claimed, Q.claimed))


def _per_chart(U, count: int, n: int) -> list[OpenBoxSet]:
    if isinstance(U, Mapping):
        return [U.get(c, OpenBoxSet.empty(n)) for c in range(count)]
    return [U] * count


def restrict(P: LiftFamily, U, V) -> LiftFamily:
    """P|_U^V: lifts cut down to domains inside U with images inside V."""
    G, H = P.source, P.target
    Us = _per_chart(U, len(G.charts), G.n)
    Vs = _per_chart(V, len(H.charts), H.n)
    GU, HV = G.restrict(U), H.restrict(V)
    lifts = []
    for lf in P.lifts:
        dom = lf.dom.intersect(Us[lf.src_chart]).intersect(HV.charts[lf.tgt_chart].preimage(lf.map))
        if not dom.is_empty:
            lifts.append(Lift(dom, lf.map, lf.src_chart, lf.tgt_chart))
    full = all(u.contains_set(c) for u, c in zip(Us, G.charts)) and all(v.contains_set(c) for v, c in zip(Vs, H.charts))
    cls = P.claimed if full else min(P.claimed, BundleClass.LOCALLY_INVERTIBLE)
    return LiftFamily(GU, HV, tuple(lifts), cls)


# -- classification ---------------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    """Outcome of :func:`classify`.

    ``result`` is a :class:`BundleClass` or ``None`` for Unknown.  ``locally_invertible``
    and ``saturation`` keep the two ingredients visible even when the overall answer
    is Unknown.
    """

    result: Optional[BundleClass]
    locally_invertible: Verdict
    saturation: Verdict
    detail: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return "Unknown" if self.result is None else self.result.label


def _local_check(P: LiftFamily, bound: int, samples: int, seed: int) -> tuple[Verdict, dict]:
    G, H = P.source, P.target
    undecided = 0
    for k, lf in enumerate(P.lifts):
        inv = cached_inverse(lf.map)
        for x in lf.dom.sample(samples, seed + k):
            bp = (lf.src_chart, x)
            fx = lf.apply(x)
            # forward: G-related points must land H-related
            for arrow in G.arrows_at(bp, bound):
                tgt = arrow.target
                other = P.lift_at(tgt)
                if other is None:
                    continue
                d = H.compare(fx, other.apply(tgt[1]), max(bound, DEFAULT_BOUND))
                if d.is_no:
                    return Verdict.NO, {"reason": "orbit compatibility fails", "point": [str(c) for c in x]}
                undecided += d.is_unknown
            # backward: H-related points in the image must pull back G-related
            for harrow in H.arrows_at(fx, bound):
                tchart, y = harrow.target
                if tchart != lf.tgt_chart or inv(y) not in lf.dom:
                    continue
                d = G.compare(bp, (lf.src_chart, inv(y)), max(bound, DEFAULT_BOUND))
                if d.is_no:
                    return Verdict.NO, {"reason": "local inverse is not orbit compatible", "point": [str(c) for c in x]}
                undecided += d.is_unknown
    if undecided:
        return Verdict.UNKNOWN, {"undecided": undecided}
    return Verdict.YES, {}


def _finite_orbits(groupoid: Groupoid, bound: int) -> bool:
    """True when ``arrows_at`` with this bound lists every arrow (finite, fully enumerated group)."""
    group = getattr(groupoid, "group", None)
    return group is not None and group.is_closed_at(bound)


def _saturation(
    groupoid: Groupoid, hits: Callable[[BasePoint], bool], bound: int, samples: int, seed: int, window: int
) -> tuple[Verdict, dict]:
    missing = 0
    for bp in groupoid.sample_base(samples, seed, window):
        if hits(bp) or any(hits(a.target) for a in groupoid.arrows_at(bp, bound)):
            continue
        if _finite_orbits(groupoid, bound):
            return Verdict.NO, {"point": [str(c) for c in bp[1]]}
        missing += 1
    if missing:
        return Verdict.UNKNOWN, {"unsaturated_samples": missing}
    return Verdict.YES, {}


def classify(
    P: LiftFamily,
    bound: int = DEFAULT_BOUND,
    samples: int = 20,
    seed: int = 0,
    local_bound: int = 2,
    window: int = DEFAULT_WINDOW,
) -> Classification:
    """Invertible / LocallyInvertible / Plain, or Unknown when a bounded check is inconclusive.

    Local invertibility: at sampled points of every lift, G-arrows map to related
    points and H-arrows within the lift's image pull back to related points.
    Invertibility additionally needs orbit saturation on both sides: every sampled
    base point of G (resp. H) must be related to a point of some lift domain
    (resp. lift image) within ``bound``.
    """
    if P.is_empty:
        return Classification(BundleClass.PLAIN, Verdict.NO, Verdict.NO, {"reason": "empty lift family"})
    local, ldet = _local_check(P, local_bound, samples, seed)
    if local is Verdict.NO:
        return Classification(BundleClass.PLAIN, local, Verdict.UNKNOWN, ldet)

    def in_domain(bp):
        return P.lift_at(bp) is not None

    def in_image(bp):
        c, y = bp
        return any(lf.tgt_chart == c and cached_inverse(lf.map)(y) in lf.dom for lf in P.lifts)

    sat_g, gdet = _saturation(P.source, in_domain, bound, samples, seed, window)
    sat_h, hdet = _saturation(P.target, in_image, bound, samples, seed + 1, window)
    if Verdict.NO in (sat_g, sat_h):
        sat = Verdict.NO
    elif Verdict.UNKNOWN in (sat_g, sat_h):
        sat = Verdict.UNKNOWN
    else:
        sat = Verdict.YES
    detail = {"local": ldet, "source_saturation": gdet, "target_saturation": hdet}
    if local is Verdict.UNKNOWN:
        return Classification(None, local, sat, detail)
    if sat is Verdict.YES:
        return Classification(BundleClass.INVERTIBLE, local, sat, detail)
    if sat is Verdict.NO:
        return Classification(BundleClass.LOCALLY_INVERTIBLE, local, sat, detail)
    return Classification(None, local, sat, detail)


# -- isomorphism ------------------------------------------------------------------


def isomorphic(
    P: LiftFamily,
    Q: LiftFamily,
    samples: int = DEFAULT_SAMPLES,
    bound: int = DEFAULT_BOUND,
    seed: int = 0,
) -> Decision:
    """Are P and Q isomorphic bibundles?

    Each lift box of either family is sampled.  At a sample, every P-lift and
    every Q-lift through the point must send it to the same H-orbit and differ
    by an H-arrow germ there; where one family has no lift through the point its
    orbit map is evaluated through an orbit-translate instead.  No carries the
    witness point and its two images.
    """
    for F in (P, Q):
        if F.claimed < BundleClass.LOCALLY_INVERTIBLE:
            raise ValueError("isomorphism test needs locally invertible families")
    if P.source != Q.source or P.target != Q.target:
        raise ValueError("families have different source or target groupoids")
    H = P.target
    mp, mq = orbit_map(P, bound), orbit_map(Q, bound)
    decided = undecided = 0
    for bp in _per_lift_samples(P, samples, seed) + _per_lift_samples(Q, samples, seed + 7919):
        lps = [lf for lf in P.lifts if lf.covers(bp)] or [None]
        lqs = [lf for lf in Q.lifts if lf.covers(bp)] or [None]
        for lp in lps:
            for lq in lqs:
                a = lp.apply(bp[1]) if lp is not None else mp(bp)
                b = lq.apply(bp[1]) if lq is not None else mq(bp)
                d = mp.same_image(a, b)
                if d.is_no:
                    return Decision.no({"point": _fmt(bp), "images": [_fmt(a), _fmt(b)]}, detail="orbit maps differ")
                if d.is_unknown:
                    undecided += 1
                    continue
                decided += 1
                if lp is None or lq is None:
                    continue
                eta = compose(lq.map, cached_inverse(lp.map))
                g = H.has_arrow(lp.apply(bp[1]), lq.tgt_chart, eta, bound)
                if g.is_no:
                    return Decision.no({"point": _fmt(bp), "germ": str(eta)}, detail="lift germs differ by a non-arrow")
                if g.is_unknown:
                    undecided += 1
    if decided == 0:
        return Decision.unknown(detail="no sample was decided")
    if undecided:
        return Decision.unknown(detail=f"{undecided} samples undecided, {decided} agree")
    return Decision.yes(detail=f"{decided} sampled orbits agree")


def _per_lift_samples(F: LiftFamily, k: int, seed: int) -> list[BasePoint]:
    out: list[BasePoint] = []
    for i, lf in enumerate(F.lifts):
        out += [(lf.src_chart, x) for x in lf.dom.sample(k, seed + i)]
    return out


def _fmt(bp: BasePoint | None):
    if bp is None:
        return None
    return {"chart": bp[0] + 1, "point": [str(c) for c in bp[1]]}


def functoriality_report(P: LiftFamily, Q: LiftFamily, QP: LiftFamily, samples: int, seed: int = 0, bound: int = DEFAULT_BOUND) -> dict:
    """Check |Q ∘ P| = |Q| ∘ |P| on sampled points of P's lift domains."""
    mp, mq, mqp = orbit_map(P, bound), orbit_map(Q, bound), orbit_map(QP, bound)
    agree = differ = undecided = 0
    for bp in P.sample_points(samples, seed):
        a = mp(bp)
        lhs = mqp(bp)
        rhs = mq(a) if a is not None else None
        d = mqp.same_image(lhs, rhs)
        if d.is_yes:
            agree += 1
        elif d.is_no:
            differ += 1
        else:
            undecided += 1
    return {"name": "functoriality", "agree": agree, "differ": differ, "undecided": undecided, "pass": differ == 0 and agree > 0}
