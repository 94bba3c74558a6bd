from fractions import Fraction

from hypothesis import HealthCheck, settings, strategies as st

from quasifold.scalar import Rational, quadratic

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

small_fractions = st.fractions(min_value=-20, max_value=20, max_denominator=12)
rationals = small_fractions.map(Rational)


@st.composite
def field_elements(draw, d: int = 2):
    """Elements a + b√d of one quadratic field (b may be 0)."""
    a = draw(small_fractions)
    b = draw(small_fractions)
    return quadratic(a, b, d)


nonzero_field_elements = field_elements().filter(lambda x: x.sign() != 0)
lattice_coefficients = st.tuples(st.integers(-4, 4), st.integers(-4, 4))


def frac(p, q=1):
    return Rational(Fraction(p, q))


def two_chart_torus_atlas():
    """ℝ/(ℤ+√2ℤ) covered by charts (-1, 2) and (0, 3), glued by x -> x + 1."""
    from quasifold.affine import AffineGroup, AffineMap
    from quasifold.model import Atlas, ModelQuasifold, OpenBoxSet, Transition
    from quasifold.scalar import sqrt

    torus = AffineGroup.translations([1], [sqrt(2)])
    V1, V2 = OpenBoxSet.interval(-1, 2), OpenBoxSet.interval(0, 3)
    return Atlas(
        (ModelQuasifold(V1, torus), ModelQuasifold(V2, torus)),
        (Transition(0, 1, AffineMap.translation([1]), V1),),
    )


def word_map(groupoid, arrow):
    """Evaluate a germ arrow's recorded word step by step (independent of arrow.map)."""
    from quasifold.affine import AffineMap, compose

    pg = groupoid.pseudogroup
    m = AffineMap.identity(groupoid.n)
    for step in arrow.word:
        if step[0] == "group":
            m = compose(pg.chart_groups[step[1]].evaluate(step[2]), m)
        else:
            t = pg.transitions[step[1]].map
            m = compose(t if step[2] > 0 else t.inverse(), m)
    return m


def brute_force_witnesses(alpha, beta, limit=50):
    """All integer (a,b;c,d) with |entries| <= limit, det ±1 and (aα+b)/(cα+d) = β, verified exactly.

    Floating search over (a, c, d) with b forced by rounding, then exact confirmation.
    """
    import numpy as np

    from quasifold.torus import WitnessMatrix, verify_witness

    fa, fb = float(alpha.value), float(beta.value)
    r = np.arange(-limit, limit + 1, dtype=np.int64)
    a, c, d = np.meshgrid(r, r, r, indexing="ij")
    rhs = fb * (c * fa + d) - a * fa
    b = np.rint(rhs).astype(np.int64)
    ok = (np.abs(rhs - b) < 1e-8) & (np.abs(b) <= limit) & (np.abs(a * d - b * c) == 1)
    found = []
    for ai, bi, ci, di in zip(a[ok], b[ok], c[ok], d[ok]):
        W = WitnessMatrix(int(ai), int(bi), int(ci), int(di))
        if verify_witness(alpha, beta, W):
            found.append(W)
    return found


def decimal_cf(alpha, count, digits=120):
    """Partial quotients by floor iteration on a high-precision decimal value of α."""
    import math
    from decimal import Decimal, getcontext

    getcontext().prec = digits
    x = (Decimal(alpha.P) + Decimal(alpha.D).sqrt()) / Decimal(alpha.Q)
    out = []
    for _ in range(count):
        a = math.floor(x)
        out.append(a)
        x = 1 / (x - a)
    return out


ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        status, title = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {status} - {title}")
