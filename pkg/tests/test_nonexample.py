import math
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from quasifold.nonexample import (
    FlatFlow,
    FlowError,
    all_pass,
    default_flow,
    default_orbit_samples,
    flat_bump,
    flow_psi,
    jet_flatness_check,
    orbit_coincidence,
    recovery_failure_demo,
)

scipy_integrate = pytest.importorskip("scipy.integrate")
scipy_optimize = pytest.importorskip("scipy.optimize")

FLOW = default_flow()
SAMPLES = [-2.0, -1.5, -1.0, -0.7, -0.5, -0.3, -0.2, 0.2, 0.3, 0.5, 0.7, 1.0, 1.3, 1.5, 2.0, 2.5, -2.5, 0.4, -0.4, 0.0]


def dop853(x, t=1.0):
    """Independent oracle: scipy's 8th-order Dormand-Prince on x' = h(x)."""
    sol = scipy_integrate.solve_ivp(lambda _, y: [flat_bump(y[0])], (0.0, t), [x], method="DOP853", rtol=1e-13, atol=1e-15)
    return sol.y[0, -1]


def travel_time_root(x):
    """Second oracle for x > 0: ψ(x) is the y with ∫_x^y ds / h(s) = 1."""

    def g(y):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return scipy_integrate.quad(lambda s: math.exp(1.0 / (s * s)), x, y, epsabs=1e-14, epsrel=1e-14)[0] - 1.0

    return scipy_optimize.brentq(g, x, x + 1.0, xtol=1e-15)


def test_bump_is_flat_and_positive():
    assert flat_bump(0.0) == 0.0
    assert flat_bump(0.1) == pytest.approx(math.exp(-100))
    assert all(flat_bump(x) > 0 for x in (-1, -0.3, 0.3, 1))


def test_zero_is_fixed():
    assert FLOW.psi(0.0) == 0.0
    assert flow_psi(0.0, 1e-6) == 0.0


def test_psi_one_agrees_with_dop853():
    v = FLOW.psi(1.0)
    assert 1.0 < v < 1.0 + 1.0
    assert abs(v - dop853(1.0)) <= 1e-10


@pytest.mark.parametrize("x", [0.25, 0.5, 1.0, 1.7, 2.5])
def test_psi_agrees_with_travel_time_oracle(x):
    assert abs(FLOW.psi(x) - travel_time_root(x)) <= 1e-10


@pytest.mark.parametrize("x", SAMPLES)
def test_two_integrators_agree(x):
    assert abs(FLOW.psi(x) - dop853(x)) <= 1e-10
    assert abs(FLOW.psi_inverse(x) - dop853(x, -1.0)) <= 1e-10


def test_negative_side_stays_negative():
    v = FLOW.psi(-1.0)
    assert -1.0 < v < 0.0


def test_semigroup_law():
    flow = FlatFlow()
    for x in SAMPLES:
        twice = flow.flow(flow.flow(x, 1.0).value, 1.0).value
        assert abs(twice - flow.flow(x, 2.0).value) <= 2 * flow.accuracy * max(1.0, abs(x))


def test_inverse_law():
    for x in SAMPLES:
        assert abs(FLOW.psi(FLOW.psi_inverse(x)) - x) <= 2 * FLOW.accuracy * max(1.0, abs(x))
        assert abs(FLOW.psi_inverse(FLOW.psi(x)) - x) <= 2 * FLOW.accuracy * max(1.0, abs(x))


def test_monotone_and_sign_preserving():
    xs = sorted(SAMPLES)
    ys = [FLOW.psi(x) for x in xs]
    assert all(a < b for a, b in zip(ys, ys[1:]))
    for x, y in zip(xs, ys):
        assert (x > 0) == (y > 0) and (x < 0) == (y < 0)


@settings(max_examples=30)
@given(st.floats(0.05, 2.5))
def test_positive_field_moves_right(x):
    assert FLOW.psi(x) >= x and FLOW.psi(-x) >= -x
    # psi(x) - x in floats cancels; the displacement is integrated directly
    assert FLOW.displacement(x) <= FLOW.envelope(x) * (1 + 1e-9)


def test_displacement_at_point_two_within_envelope():
    assert 0 < abs(FLOW.psi(0.2) - 0.2) <= 1.4e-11
    d = FLOW.displacement(0.2)
    # the speed grows along the path, so the bound uses h at both endpoints
    assert d <= FLOW.envelope(0.2) * (1 + 1e-9)
    assert d >= flat_bump(0.2) * (1 - 1e-9)


def test_psi_hat_case_split():
    for x in (0.3, 1.0):
        assert FLOW.psi_hat(x) == FLOW.psi(x)
        assert FLOW.psi_hat(-x) == FLOW.psi_inverse(-x)
    assert FLOW.psi_hat_power(-1.0, 2) == FLOW.psi_power(-1.0, -2)


def test_custom_fields_match_closed_forms():
    assert abs(FlatFlow(vector_field=lambda x: x).psi(1.0) - math.e) <= 1e-11
    assert abs(FlatFlow(vector_field=lambda x: 1.0).psi(0.5) - 1.5) <= 1e-12


def test_blow_up_raises():
    with pytest.raises(FlowError):
        FlatFlow(vector_field=lambda x: x * x).psi(2.0)


def test_flat_zone_shortcut_carries_remainder():
    r = FLOW.flow(5e-4, 1.0)
    assert r.value == 5e-4 and r.steps == 0 and r.remainder_bound >= 0


# -- reports ------------------------------------------------------------------------


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_jet_flatness_orders(order):
    rep = jet_flatness_check(order, 0.1, 1e-6)
    assert all_pass(rep)
    assert rep["evidence"] is True
    names = {c["name"] for c in rep["checks"]}
    assert f"derivative_{order}" in names and "positive_displacement_0.5" in names


def test_jet_check_rejects_bad_scale():
    with pytest.raises(ValueError):
        jet_flatness_check(1, 0.0)


def test_jet_check_fails_for_non_flat_field():
    # x -> x^2 has nonzero second derivative of the displacement at 0
    rep = jet_flatness_check(2, 0.1, 1e-6, FlatFlow(vector_field=lambda x: x * x, flat_zone=1e-12))
    assert not all_pass(rep)


def test_orbit_coincidence_default_samples():
    pts = default_orbit_samples(20)
    assert len(pts) == 20 and 0.0 in pts
    rep = orbit_coincidence(pts, 3, 1e-9)
    assert all_pass(rep) and rep["checks"][0]["value"] <= 1e-9


@pytest.mark.parametrize("x", [1.0, 0.0, -1.0])
def test_orbit_coincidence_examples(x):
    assert all_pass(orbit_coincidence([x], 3, 1e-9))


def test_orbit_of_zero_is_zero():
    assert {FLOW.psi_hat_power(0.0, k) for k in range(-3, 4)} == {0.0}


def test_recovery_demo_reports_no_match():
    rep = recovery_failure_demo((-0.5, 0.5), 3)
    assert rep["outcome"] == "NoMatch" and all_pass(rep)
    by_name = {c["name"]: c for c in rep["checks"]}
    assert by_name["best_candidate_probe_residual"]["value"] > 1e-3
    assert by_name["jets_indistinguishable"]["value"] <= 1e-6


def test_recovery_demo_one_sided_agreement():
    rep = recovery_failure_demo((-0.5, 0.5), 2)
    k1 = next(c for c in rep["candidates"] if c["k"] == 1)
    assert k1["residual_positive"] <= 1e-12
    # on the left ψ̂ = ψ⁻¹, so the gap at -0.4 is |ψ⁻¹(x) - ψ(x)|
    gap = abs(dop853(-0.4, -1.0) - dop853(-0.4))
    assert k1["probes"]["-0.4"] == pytest.approx(gap, rel=1e-6)
    assert k1["residual_negative"] > 1e-4


def test_recovery_demo_wide_interval_probe_at_point_seven():
    rep = recovery_failure_demo((-1.0, 1.0), 3, probes=(-0.7, 0.7))
    assert rep["outcome"] == "NoMatch"
    best = next(c for c in rep["candidates"] if c["k"] == rep["best"])
    assert max(best["probes"].values()) > 1e-3


def test_best_residual_decays_but_stays_positive():
    res = []
    for b in (0.5, 0.4, 0.3):
        rep = recovery_failure_demo((-b, b), 2, grid=21, probes=())
        best = min(c["residual"] for c in rep["candidates"])
        res.append(best)
        assert best > 0
        assert best <= 2 * FLOW.envelope(b) * (1 + 1e-6)
    assert res[0] > res[1] > res[2]


def test_recovery_demo_needs_zero_inside():
    with pytest.raises(ValueError):
        recovery_failure_demo((0.1, 0.5))
