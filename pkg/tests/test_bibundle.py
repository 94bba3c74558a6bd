import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import frac, two_chart_torus_atlas
from quasifold.affine import AffineGroup, AffineMap
from quasifold.bibundle import (
    BundleClass,
    IncompatibleFunctor,
    Lift,
    LiftFamily,
    classify,
    compose_bibundles,
    from_functor,
    functoriality_report,
    identity_bibundle,
    inclusion,
    isomorphic,
    orbit_map,
    restrict,
)
from quasifold.groupoid import ActionGroupoid, germ_groupoid_of_atlas
from quasifold.model import OpenBoxSet
from quasifold.scalar import parse, quadratic, sqrt
from quasifold.torus import groupoids_for

G = groupoids_for(sqrt(2))
WHOLE = OpenBoxSet.whole(1)


def translation_family(c, dom=WHOLE, source=G, target=G):
    return from_functor(source, target, [Lift(dom, AffineMap.translation([parse(c) if isinstance(c, str) else c]))], samples=5)


def pt(text):
    return (0, (parse(text),))


offsets = st.tuples(st.fractions(-3, 3, max_denominator=9), st.integers(-2, 2)).map(lambda t: quadratic(t[0], t[1], 2))


# -- constructions ----------------------------------------------------------------


def test_identity_orbit_map_is_identity():
    m = orbit_map(identity_bibundle(G))
    for bp in G.sample_base(20, 3):
        assert m(bp) == bp


def test_identity_classifies_invertible():
    assert classify(identity_bibundle(G)).result is BundleClass.INVERTIBLE


def test_translation_functor_is_locally_invertible_and_moves_zero():
    P = translation_family("1/3")
    assert P.claimed is BundleClass.LOCALLY_INVERTIBLE
    assert orbit_map(P)(pt("0")) == pt("1/3")
    assert classify(P).label == "Invertible"


def test_identity_functor_gives_identity_bibundle_up_to_iso():
    P = from_functor(G, G, [Lift(WHOLE, AffineMap.identity(1))], samples=5)
    assert isomorphic(P, identity_bibundle(G), samples=30).is_yes


def test_incompatible_functor_has_certificate():
    # x -> 2x sends the arrow x -> x+1 to x' -> x'+2 (fine) but x -> x+√2 to x' -> x'+2√2 (fine);
    # scaling by √3 leaves the field, so no arrow exists.
    with pytest.raises(IncompatibleFunctor) as info:
        from_functor(G, G, [Lift(WHOLE, AffineMap.line(sqrt(3), 0))], samples=3)
    assert "arrow" in info.value.certificate


def test_non_surjective_scaling_is_not_locally_invertible():
    # x -> 2x is compatible but its image misses half of each orbit locally.
    P = from_functor(G, G, [Lift(WHOLE, AffineMap.line(2, 0))], samples=3)
    assert P.claimed is BundleClass.PLAIN


def test_lift_outside_target_rejected():
    H = ActionGroupoid(G.group, OpenBoxSet.interval(0, 1))
    with pytest.raises(ValueError):
        LiftFamily(G, H, (Lift(OpenBoxSet.interval(0, 1), AffineMap.translation([frac(1, 2)])),))


def test_inclusion_orbit_map_is_inclusion():
    U = OpenBoxSet.interval(0, 1)
    P = inclusion(G, U)
    m = orbit_map(P)
    for x in U.sample(20, 1):
        assert m((0, x)) == (0, x)
    assert P.claimed >= BundleClass.LOCALLY_INVERTIBLE


def test_inclusion_of_dense_torus_orbit_is_invertible():
    # every orbit of ℤ+√2ℤ meets (0, 1) within a short word
    assert classify(inclusion(G, OpenBoxSet.interval(0, 1))).result is BundleClass.INVERTIBLE


def test_inclusion_into_finite_orbit_groupoid_is_only_locally_invertible():
    # ℤ acting on ℝ: (0, 1/2) misses the orbits of points in [1/2, 1)
    Z = ActionGroupoid(AffineGroup.translations([1]), WHOLE)
    c = classify(inclusion(Z, OpenBoxSet.interval(0, frac(1, 2))), bound=3)
    assert c.locally_invertible.value == "yes"
    assert c.label in ("LocallyInvertible", "Unknown")


def test_empty_family_is_plain():
    assert classify(LiftFamily(G, G, ())).result is BundleClass.PLAIN


# -- composition --------------------------------------------------------------------


def test_two_translations_compose_exactly():
    QP = compose_bibundles(translation_family("1/3"), translation_family("sqrt(2)/5"))
    assert len(QP.lifts) == 1
    assert QP.lifts[0].map == AffineMap.translation([parse("1/3 + sqrt(2)/5")])


def test_compose_with_identity_keeps_orbit_map():
    P = translation_family("1/3")
    I = identity_bibundle(G)
    for QP in (compose_bibundles(P, I), compose_bibundles(I, P)):
        assert isomorphic(P, QP, samples=30).is_yes


@settings(max_examples=25)
@given(offsets, offsets, st.integers(0, 1000))
def test_functoriality_on_translations(a, b, seed):
    P, Q = translation_family(a), translation_family(b)
    QP = compose_bibundles(P, Q)
    rep = functoriality_report(P, Q, QP, 30, seed)
    assert rep["pass"] and rep["differ"] == 0 and rep["undecided"] == 0


@settings(max_examples=15)
@given(offsets, offsets)
def test_functor_composition_matches_bibundle_composition(a, b):
    composite_functor = translation_family(a + b)
    assert isomorphic(composite_functor, compose_bibundles(translation_family(a), translation_family(b)), samples=20).is_yes


def test_composition_of_locally_invertible_is_locally_invertible():
    QP = compose_bibundles(translation_family("1/3"), translation_family("1/5"))
    c = classify(QP)
    assert c.result is not None and c.result >= BundleClass.LOCALLY_INVERTIBLE


def test_compose_rejects_mismatched_groupoids():
    H = groupoids_for(sqrt(3))
    with pytest.raises(ValueError):
        compose_bibundles(translation_family("1/3"), identity_bibundle(H))


def test_compose_on_box_domains_uses_arrows_to_align():
    # P: (0,1) -> x + 5 lands in (5,6); Q is defined only on (0,1); the composite needs the arrow x - 5.
    P = translation_family("5", dom=OpenBoxSet.interval(0, 1))
    Q = translation_family("1/3", dom=OpenBoxSet.interval(0, 1))
    QP = compose_bibundles(P, Q, bound=6)
    assert not QP.is_empty
    for l in QP.lifts:
        shift = l.map.b[0] - frac(1, 3)
        assert l.map.is_translation and shift.a.denominator == 1 and shift.b.denominator == 1


# -- restriction --------------------------------------------------------------------


def test_restriction_example_boxes():
    R = restrict(translation_family("1/3"), OpenBoxSet.interval(0, frac(1, 4)), OpenBoxSet.interval(frac(1, 4), frac(7, 12)))
    assert len(R.lifts) == 1
    assert R.lifts[0].dom == OpenBoxSet.interval(0, frac(1, 4))
    assert R.lifts[0].map == AffineMap.translation([frac(1, 3)])


def test_restrict_full_is_unchanged():
    P = translation_family("1/3")
    R = restrict(P, WHOLE, WHOLE)
    assert R.lifts == P.lifts and R.claimed == P.claimed


def test_restrict_identity_is_identity_of_restriction():
    U = OpenBoxSet.interval(0, 1)
    R = restrict(identity_bibundle(G), U, U)
    assert isomorphic(R, identity_bibundle(G.restrict(U)), samples=20).is_yes


def test_restriction_to_disjoint_image_is_empty():
    R = restrict(translation_family("1/3"), OpenBoxSet.interval(0, frac(1, 4)), OpenBoxSet.interval(2, 3))
    assert R.is_empty


@settings(max_examples=15)
@given(offsets, st.integers(-3, 3), st.integers(0, 1000))
def test_restriction_square_commutes(c, shift, seed):
    # |ι_V| ∘ |P restricted| = |P| ∘ |ι_U| on samples of U
    P = translation_family(c)
    U = OpenBoxSet.interval(shift, shift + 1)
    img = U.image(P.lifts[0].map)
    V = OpenBoxSet.interval(img.boxes[0][0].lo - frac(1, 2), img.boxes[0][0].hi)
    R = restrict(P, U, V)
    iU, iV = inclusion(G, U), inclusion(G, V)
    left = compose_bibundles(R, iV)
    right = compose_bibundles(iU, P)
    mL, mR = orbit_map(left), orbit_map(right)
    for x in U.sample(10, seed):
        assert G.compare(mL((0, x)), mR((0, x))).is_yes


# -- isomorphism ---------------------------------------------------------------------


def test_iso_reflexive():
    P = translation_family("1/3")
    assert isomorphic(P, P, samples=30).is_yes


def test_iso_translation_by_lattice_element():
    assert isomorphic(translation_family("1/3"), translation_family("1/3 + 1 + sqrt(2)"), samples=30).is_yes


def test_iso_distinct_translations_gives_witness():
    d = isomorphic(translation_family("1/3"), translation_family("1/4"), samples=30)
    assert d.is_no
    a, b = d.witness["images"]
    # independent oracle: the images differ by ±1/12 plus a lattice element, never a lattice element
    diff = parse(a["point"][0]) - parse(b["point"][0])
    assert (diff - frac(1, 12)).a.denominator == 1 or (diff + frac(1, 12)).a.denominator == 1
    assert G.compare((0, (parse(a["point"][0]),)), (0, (parse(b["point"][0]),))).is_no


def test_iso_requires_locally_invertible():
    P = from_functor(G, G, [Lift(WHOLE, AffineMap.line(2, 0))], samples=3)
    with pytest.raises(ValueError):
        isomorphic(P, P)


@settings(max_examples=20)
@given(offsets, offsets)
def test_iso_decides_lattice_membership(a, b):
    d = isomorphic(translation_family(a), translation_family(b), samples=10)
    oracle = (a - b).b.denominator == 1 and (a - b).a.denominator == 1
    assert d.is_yes == oracle and d.is_no != oracle


# -- gluing over a cover ----------------------------------------------------------------


def test_gluing_yes_and_perturbed_no():
    cover = [OpenBoxSet.interval(-1, 1), OpenBoxSet.interval(0, 2), OpenBoxSet.interval(1, 3)]
    P = LiftFamily(G, G, tuple(Lift(U, AffineMap.translation([frac(1, 3)])) for U in cover), BundleClass.LOCALLY_INVERTIBLE)
    Q = LiftFamily(
        G,
        G,
        tuple(Lift(U, AffineMap.translation([frac(1, 3) + k * sqrt(2)])) for k, U in enumerate(cover)),
        BundleClass.LOCALLY_INVERTIBLE,
    )
    for U in cover:
        assert isomorphic(restrict(P, U, WHOLE), restrict(Q, U, WHOLE), samples=10).is_yes
    assert isomorphic(P, Q, samples=30).is_yes
    bad = LiftFamily(
        G, G, Q.lifts[:2] + (Lift(cover[2], AffineMap.translation([frac(1, 3) + frac(1, 7)])),), BundleClass.LOCALLY_INVERTIBLE
    )
    d = isomorphic(P, bad, samples=30)
    assert d.is_no and d.witness["point"] is not None


# -- germ groupoid side ------------------------------------------------------------------


def test_germ_groupoid_identity_composition_and_iso():
    H = germ_groupoid_of_atlas(two_chart_torus_atlas())
    I = identity_bibundle(H)
    II = compose_bibundles(I, I)
    assert functoriality_report(I, I, II, 15)["pass"]
    assert isomorphic(I, II, samples=15).is_yes


def test_germ_translation_functor_locally_invertible():
    H = germ_groupoid_of_atlas(two_chart_torus_atlas())
    T = from_functor(H, H, [Lift(OpenBoxSet.interval(-1, 1), AffineMap.translation([frac(1, 3)]), 0, 0)], samples=3)
    assert T.claimed is BundleClass.LOCALLY_INVERTIBLE
    assert orbit_map(T)((1, (frac(1, 2),)))[1] is not None


# -- serialization ----------------------------------------------------------------------


def test_json_round_trip():
    P = translation_family("1/3", dom=OpenBoxSet.interval(0, 1))
    data = json.loads(json.dumps(P.to_json()))
    Q = LiftFamily.from_json(data)
    assert Q.lifts == P.lifts and Q.claimed == P.claimed
    assert data["lifts"][0]["from"] == 1


def test_json_round_trip_germ():
    H = germ_groupoid_of_atlas(two_chart_torus_atlas())
    I = identity_bibundle(H)
    J = LiftFamily.from_json(json.loads(json.dumps(I.to_json())))
    assert J.lifts == I.lifts
    assert [l["from"] for l in I.to_json()["lifts"]] == [1, 2]


def test_orbit_map_well_defined_on_orbit_equal_representatives():
    P = translation_family("1/3")
    m = orbit_map(P)
    rng = random.Random(5)
    for _ in range(20):
        x = frac(rng.randint(-50, 50), rng.randint(1, 9))
        y = x + rng.randint(-3, 3) + rng.randint(-3, 3) * sqrt(2)
        assert G.compare(m((0, (x,))), m((0, (y,)))).is_yes
