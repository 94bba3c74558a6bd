"""The flat flow on ℝ and a hybrid map with the same orbits that no group element matches.

h(x) = exp(-1/x²) (h(0) = 0) is flat at 0 and positive elsewhere.  ψ is the
time-one flow of h ∂/∂x and ψ̂ equals ψ on x >= 0 and ψ⁻¹ on x < 0.  The groups
generated by ψ and ψ̂ have the same orbits, yet on any interval around 0, ψ̂
agrees with no power of ψ.  Every power of ψ has the jet of the identity at 0, so
jets cannot tell them apart.  The reports below are numerical evidence for this
mechanism, not proofs.
"""

from __future__ import annotations

import math
import dataclasses
from dataclasses import dataclass
from typing import Callable, Sequence

FLAT_ZONE = 1e-3
DEFAULT_ACCURACY = 1e-12
MAX_STEPS = 200_000

# Dormand-Prince 5(4) tableau
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)


class FlowError(RuntimeError):
    """The integrator could not reach the requested accuracy within its step budget."""


def flat_bump(x: float) -> float:
    """exp(-1/x²), extended by 0 at 0."""
    if x == 0.0:
        return 0.0
    return math.exp(-1.0 / (x * x))


@dataclass(frozen=True)
class FlowResult:
    value: float
    displacement: float
    steps: int
    remainder_bound: float = 0.0


@dataclass(frozen=True)
class FlatFlow:
    """Flow of ``vector_field ∂/∂x``; the field must vanish only at 0 to keep the sign facts true."""

    vector_field: Callable[[float], float] = flat_bump
    accuracy: float = DEFAULT_ACCURACY
    flat_zone: float = FLAT_ZONE
    _cache: dict = dataclasses.field(default_factory=dict, compare=False, repr=False)

    def flow(self, x: float, t: float = 1.0) -> FlowResult:
        """Integrate ``u' = field(x + u)``, ``u(0) = 0`` up to time ``t``; returns ``x + u(t)``.

        Integrating the displacement keeps full relative precision when it is
        tiny.  Inside the flat zone the field underflows; the result is ``x``
        with the remainder bound ``|t| · field(x)`` (for |x| < flat_zone the path
        stays where the field is at most its value at the far endpoint).
        """
        key = (x, t)
        if key in self._cache:
            return self._cache[key]
        if x == 0.0 or t == 0.0:
            res = FlowResult(x, 0.0, 0)
        elif abs(x) < self.flat_zone:
            res = FlowResult(x, 0.0, 0, abs(t) * self.vector_field(self.flat_zone))
        else:
            res = self._integrate(x, t)
        self._cache[key] = res
        return res

    def _integrate(self, x0: float, t_end: float) -> FlowResult:
        f = self.vector_field
        direction = 1.0 if t_end > 0 else -1.0
        T = abs(t_end)
        rtol = self.accuracy * 1e-2
        atol = max(rtol * abs(f(x0)), 1e-300)
        t, u = 0.0, 0.0
        dt = min(T, 0.05)
        k1 = direction * f(x0)
        steps = 0
        while t < T:
            if steps >= MAX_STEPS:
                raise FlowError(f"accuracy {self.accuracy} not reached within {MAX_STEPS} steps")
            dt = min(dt, T - t)
            ks = [k1]
            for i in range(1, 7):
                ui = u + dt * sum(a * k for a, k in zip(_A[i], ks))
                ks.append(direction * f(x0 + ui))
            u5 = u + dt * sum(b * k for b, k in zip(_B5, ks))
            u4 = u + dt * sum(b * k for b, k in zip(_B4, ks))
            scale = atol + rtol * max(abs(u), abs(u5))
            err = abs(u5 - u4) / scale
            steps += 1
            if err <= 1.0:
                t += dt
                u = u5
                k1 = ks[6]
            factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            dt *= factor
            if dt < 1e-14 * T:
                raise FlowError("step size underflow")
        return FlowResult(x0 + u, u, steps)

    def psi(self, x: float) -> float:
        return self.flow(x, 1.0).value

    def psi_inverse(self, x: float) -> float:
        return self.flow(x, -1.0).value

    def psi_power(self, x: float, k: int) -> float:
        """ψᵏ(x) by iterating the time-one map (k may be negative)."""
        for _ in range(abs(k)):
            x = self.psi(x) if k > 0 else self.psi_inverse(x)
        return x

    def psi_hat(self, x: float) -> float:
        return self.psi(x) if x >= 0 else self.psi_inverse(x)

    def psi_hat_power(self, x: float, k: int) -> float:
        for _ in range(abs(k)):
            x = self.psi_hat(x) if k > 0 else self._psi_hat_inverse(x)
        return x

    def _psi_hat_inverse(self, x: float) -> float:
        return self.psi_inverse(x) if x >= 0 else self.psi(x)

    def displacement(self, x: float, k: int = 1) -> float:
        """ψᵏ(x) - x, accurate to relative precision even when tiny."""
        total = 0.0
        for _ in range(abs(k)):
            r = self.flow(x + total, 1.0 if k > 0 else -1.0)
            total += r.displacement
        return total

    def envelope(self, x: float) -> float:
        """sup of the field on the segment from x to ψ(x): a bound for |ψ(x) - x|."""
        return max(self.vector_field(x), self.vector_field(self.psi(x)))


def default_flow() -> FlatFlow:
    return FlatFlow()


def flow_psi(x: float, accuracy: float = DEFAULT_ACCURACY) -> float:
    if accuracy <= 0:
        raise ValueError("accuracy must be positive")
    return FlatFlow(accuracy=accuracy).psi(x)


# -- checks --------------------------------------------------------------------------


def _check(name: str, value: float, bound: float, passed: bool, **extra) -> dict:
    return {"name": name, "value": value, "bound": bound, "pass": bool(passed), **extra}


def _central_weights(order: int) -> tuple[list[float], list[int]]:
    """Second-order central difference weights for the ``order``-th derivative."""
    table = {
        1: ([-0.5, 0.0, 0.5], [-1, 0, 1]),
        2: ([1.0, -2.0, 1.0], [-1, 0, 1]),
        3: ([-0.5, 1.0, 0.0, -1.0, 0.5], [-2, -1, 0, 1, 2]),
        4: ([1.0, -4.0, 6.0, -4.0, 1.0], [-2, -1, 0, 1, 2]),
        5: ([-0.5, 2.0, -2.5, 0.0, 2.5, -2.0, 0.5], [-3, -2, -1, 0, 1, 2, 3]),
        6: ([1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0], [-3, -2, -1, 0, 1, 2, 3]),
    }
    if order not in table:
        raise ValueError("order must be between 1 and 6")
    return table[order]


def jet_derivative(flow: FlatFlow, order: int, scale: float, k: int = 1) -> tuple[float, float]:
    """Finite-difference estimate of dᵒ/dxᵒ (ψᵏ - id) at 0 and its rounding-noise bound."""
    w, offs = _central_weights(order)
    vals = [flow.displacement(j * scale, k) for j in offs]
    est = sum(a * v for a, v in zip(w, vals)) / scale**order
    noise = sum(abs(a) * abs(v) for a, v in zip(w, vals)) * flow.accuracy / scale**order
    return est, noise


def jet_flatness_check(order: int, scale: float = 0.1, tol: float = 1e-6, flow: FlatFlow | None = None) -> dict:
    """Derivatives of ψ - id at 0 up to ``order`` vanish, plus the envelope bound at sampled x."""
    flow = flow or default_flow()
    if scale <= 0:
        raise ValueError("scale must be positive")
    checks = []
    for k in range(1, order + 1):
        est, noise = jet_derivative(flow, k, scale)
        checks.append(_check(f"derivative_{k}", abs(est), tol, abs(est) + noise <= tol, noise=noise))
    for x in (0.2, 0.3, 0.5, -0.2, -0.5):
        disp = abs(flow.displacement(x))
        env = flow.envelope(x)
        checks.append(_check(f"envelope_{x}", disp, env, disp <= env * (1 + 1e-9)))
    d = flow.displacement(0.5)
    checks.append(_check("positive_displacement_0.5", d, 0.0, d > 0))
    return {"kind": "jet_flatness", "evidence": True, "order": order, "scale": scale, "checks": checks}


def orbit_coincidence(samples: Sequence[float], k_range: int = 3, tol: float = 1e-9, flow: FlatFlow | None = None) -> dict:
    """Compare ψ̂ᵏ(x) (iterated) with ψ^{±k}(x) (single long integration) for |k| <= k_range.

    For x >= 0 the matching element is ψᵏ(x) and for x < 0 it is ψ⁻ᵏ(x), so the
    two orbits coincide as sets.
    """
    flow = flow or default_flow()
    worst, where = 0.0, None
    for x in samples:
        for k in range(-k_range, k_range + 1):
            lhs = flow.psi_hat_power(x, k)
            rhs = flow.flow(x, float(k if x >= 0 else -k)).value
            gap = abs(lhs - rhs)
            if gap > worst:
                worst, where = gap, (x, k)
    return {
        "kind": "orbit_coincidence",
        "evidence": True,
        "checks": [_check("max_discrepancy", worst, tol, worst <= tol, at=where)],
    }


def default_orbit_samples(count: int = 20) -> list[float]:
    """Deterministic points spread over [-2, 2], always including 0."""
    pts = [-2.0 + 4.0 * i / (count - 1) for i in range(count)]
    pts[count // 2] = 0.0
    return pts


def recovery_failure_demo(
    interval: tuple[float, float] = (-0.5, 0.5),
    k_bound: int = 3,
    grid: int = 41,
    probes: Sequence[float] = (-0.4, 0.4),
    tol: float = 1e-9,
    flow: FlatFlow | None = None,
) -> dict:
    """Try to match ψ̂ on an interval around 0 with a single ψᵏ, |k| <= k_bound.

    Each candidate gets residuals on the two sides of 0 separately.  Any candidate
    fits ψ̂ on at most one side, so the best candidate still leaves a one-sided
    residual well above ``tol``.  Jets at 0 of all candidates agree numerically.
    """
    a, b = interval
    if not a < 0 < b:
        raise ValueError("interval must contain 0")
    flow = flow or default_flow()
    xs = [a + (b - a) * (i + 1) / (grid + 1) for i in range(grid)]
    target = {x: flow.psi_hat(x) for x in xs}
    cands = []
    for k in range(-k_bound, k_bound + 1):
        neg = max((abs(target[x] - flow.psi_power(x, k)) for x in xs if x < 0), default=0.0)
        pos = max((abs(target[x] - flow.psi_power(x, k)) for x in xs if x >= 0), default=0.0)
        at_probes = {str(p): abs(flow.psi_hat(p) - flow.psi_power(p, k)) for p in probes}
        cands.append({"k": k, "residual_negative": neg, "residual_positive": pos, "residual": max(neg, pos), "probes": at_probes})
    best = min(cands, key=lambda c: c["residual"])
    matched = [c["k"] for c in cands if c["residual"] <= tol]
    probe_gap = max(best["probes"].values(), default=0.0)
    jets = []
    for k in range(-k_bound, k_bound + 1):
        if k:
            jets.append(max(abs(jet_derivative(flow, o, 0.1, k)[0]) for o in range(1, 5)))
    checks = [
        _check("no_match", float(len(matched)), 0.0, not matched),
        _check("best_candidate_residual", best["residual"], tol, best["residual"] > tol, k=best["k"]),
        _check("best_candidate_probe_residual", probe_gap, 1e-3, probe_gap > 1e-3, k=best["k"]),
        _check("jets_indistinguishable", max(jets, default=0.0), 1e-6, max(jets, default=0.0) <= 1e-6),
    ]
    return {
        "kind": "recovery_failure",
        "evidence": True,
        "interval": [a, b],
        "outcome": "NoMatch" if not matched else "Match",
        "candidates": cands,
        "best": best["k"],
        "checks": checks,
    }


def all_pass(report: dict) -> bool:
    return all(c["pass"] for c in report["checks"])
