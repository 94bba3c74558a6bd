"""Affine-germ recovery and constructive local lifts.

An orbit-preserving C¹ map on a connected open set of ℝⁿ, for a countable affine
action, agrees there with a single group element.  :func:`recover_affine` turns
that into a verification procedure: fit one affine map through the samples and
look the fit up in the group.  :func:`lift_local_diffeo` builds a lift of an orbit
map sending a chosen point to a chosen representative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .affine import AffineGroup, AffineMap, GroupElement, Point, as_point, compose, solve_linear
from .bibundle import LiftFamily, orbit_map
from .groupoid import ActionGroupoid, GermGroupoid, Groupoid, base_point, germ_groupoid_of_atlas
from .model import DEFAULT_BOUND, Atlas, OpenBoxSet
from .scalar import DEFAULT_TOL, ZERO, Approx, Rational, Scalar, scalar


class DegenerateSamples(ValueError):
    """Too few affinely independent samples (and no derivatives) to pin down an affine fit."""


@dataclass(frozen=True)
class SampledMap:
    """Samples ``(x, h(x))`` of a map on ``domain``, optionally with derivative samples ``Dh(x)``.

    ``tol`` is ``None`` for exact samples and a float for numeric ones.
    """

    domain: OpenBoxSet
    samples: tuple[tuple[Point, Point], ...]
    derivatives: tuple[tuple[tuple[Scalar, ...], ...], ...] = ()
    tol: Optional[float] = None

    def __post_init__(self):
        n = self.domain.n
        pts = tuple((as_point(x, n), as_point(hx, n)) for x, hx in self.samples)
        object.__setattr__(self, "samples", pts)
        for x, _ in pts:
            if x not in self.domain:
                raise ValueError(f"sample point {[str(c) for c in x]} is outside the domain")
        if self.tol is None and not all(c.is_exact for x, hx in pts for c in x + hx):
            raise ValueError("exact samples must use exact scalars")

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def exact(self) -> bool:
        return self.tol is None

    @classmethod
    def of(cls, f, domain: OpenBoxSet, points: Sequence, tol: Optional[float] = None) -> SampledMap:
        """Sample a callable (an :class:`AffineMap` or any point -> point function)."""
        pts = [as_point(p, domain.n) for p in points]
        return cls(domain, tuple((x, as_point(f(x), domain.n)) for x in pts), (), tol)

    def to_json(self) -> dict:
        return {
            "domain": self.domain.to_json(),
            "samples": [{"x": [str(c) for c in x], "hx": [str(c) for c in hx]} for x, hx in self.samples],
            **({"tol": self.tol} if self.tol is not None else {}),
        }

    @classmethod
    def from_json(cls, data: Union[dict, str]) -> SampledMap:
        if isinstance(data, str):
            data = json.loads(data)
        dom = OpenBoxSet.from_json(data["domain"])
        tol = data.get("tol")
        samples = []
        for s in data["samples"]:
            x, hx = s["x"], s["hx"]
            x = x if isinstance(x, list) else [x]
            hx = hx if isinstance(hx, list) else [hx]
            if tol is None:
                samples.append((tuple(scalar(str(c)) for c in x), tuple(scalar(str(c)) for c in hx)))
            else:
                samples.append((tuple(_num(c) for c in x), tuple(_num(c) for c in hx)))
        return cls(dom, tuple(samples), (), tol)


def _num(c) -> Scalar:
    if isinstance(c, (int, float)):
        return Approx(float(c), 0.0)
    return scalar(c)


@dataclass(frozen=True)
class RecoveryResult:
    """``outcome`` is ``"Match"``, ``"NoMatch"`` or ``"Ambiguous"``."""

    outcome: str
    element: Optional[GroupElement] = None
    residual: Optional[Scalar | float] = None
    bound: Optional[int] = None
    candidates: tuple[GroupElement, ...] = ()
    fit: Optional[AffineMap | tuple] = None
    decided: bool = True
    detail: str = ""

    @property
    def is_match(self) -> bool:
        return self.outcome == "Match"

    def to_json(self) -> dict:
        out: dict = {"outcome": self.outcome, "detail": self.detail}
        if self.element is not None:
            out["element"] = self.element.map.to_json()
            out["word"] = [list(l) for l in self.element.word]
        if self.residual is not None:
            out["residual"] = str(self.residual) if not isinstance(self.residual, float) else self.residual
        if self.bound is not None:
            out["bound"] = self.bound
        if self.candidates:
            out["candidates"] = [c.map.to_json() for c in self.candidates]
        return out


# -- fitting -----------------------------------------------------------------------


def _independent_subset(points: Sequence[Point], n: int) -> list[int] | None:
    """Indices of n+1 affinely independent points (greedy, exact rank test)."""
    chosen: list[int] = []
    basis: list[list[Scalar]] = []
    base = None
    for i, p in enumerate(points):
        if base is None:
            base, chosen = p, [i]
            continue
        v = [a - b for a, b in zip(p, base)]
        for row, piv in basis:
            f = v[piv] / row[piv]
            if f.sign() != 0:
                v = [a - f * b for a, b in zip(v, row)]
        piv = next((k for k, c in enumerate(v) if c.sign() != 0), None)
        if piv is None:
            continue
        basis.append((v, piv))
        chosen.append(i)
        if len(chosen) == n + 1:
            return chosen
    return chosen if len(chosen) == n + 1 else None


def fit_affine_exact(h: SampledMap) -> AffineMap:
    """The unique affine map through n+1 affinely independent exact samples (or one sample plus Dh)."""
    n = h.n
    pts = [x for x, _ in h.samples]
    if h.derivatives:
        A = tuple(tuple(scalar(v) for v in row) for row in h.derivatives[0])
        x0, hx0 = h.samples[0]
        Ax = [sum((A[i][j] * x0[j] for j in range(n)), ZERO) for i in range(n)]
        return AffineMap(A, tuple(hx0[i] - Ax[i] for i in range(n)))
    idx = _independent_subset(pts, n)
    if idx is None:
        raise DegenerateSamples(f"need {n + 1} affinely independent sample points")
    rows = [list(h.samples[i][0]) + [Rational(1)] for i in idx]
    A, b = [], []
    for out in range(n):
        sol = solve_linear(rows, [h.samples[i][1][out] for i in idx])
        A.append(tuple(sol[:n]))
        b.append(sol[n])
    return AffineMap(tuple(A), tuple(b))


def fit_affine_numeric(h: SampledMap) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares ``(A, b)`` in floating point."""
    n = h.n
    X = np.array([[float(c) for c in x] for x, _ in h.samples])
    Y = np.array([[float(c) for c in hx] for _, hx in h.samples])
    if h.derivatives:
        A = np.array([[float(v) for v in row] for row in h.derivatives[0]])
        return A, (Y - X @ A.T).mean(axis=0)
    M = np.hstack([X, np.ones((len(X), 1))])
    if np.linalg.matrix_rank(M) < n + 1:
        raise DegenerateSamples(f"need {n + 1} affinely independent sample points")
    sol, *_ = np.linalg.lstsq(M, Y, rcond=None)
    return sol[:n].T, sol[n]


def _exact_residual(f: AffineMap, h: SampledMap) -> Scalar:
    worst: Scalar = ZERO
    for x, hx in h.samples:
        for a, b in zip(f(x), hx):
            worst = max(worst, abs(a - b))
    return worst


def _numeric_residual(f: AffineMap, h: SampledMap) -> float:
    worst = 0.0
    for x, hx in h.samples:
        fx = f(x)
        worst = max(worst, max(abs(float(a) - float(b)) for a, b in zip(fx, hx)))
    return worst


def recover_affine(h: SampledMap, group: AffineGroup, bound: int = DEFAULT_BOUND, tol: float = DEFAULT_TOL) -> RecoveryResult:
    """Find the group element that the sampled map equals, if any.

    Exact samples: the affine fit is exact and is looked up with exact
    membership (decided for translation lattices and saturated finite groups).
    Numeric samples: every enumerated element within ``tol`` of the least-squares
    fit and of every sample is a candidate; two or more are reported Ambiguous.
    """
    if h.n != group.n:
        raise ValueError("dimension mismatch between samples and group")
    if h.exact:
        fit = fit_affine_exact(h)
        res = _exact_residual(fit, h)
        if res.sign() != 0:
            return RecoveryResult("NoMatch", residual=res, bound=bound, fit=fit, detail="samples are not affine")
        d = group.contains(fit, bound)
        if d.is_yes:
            return RecoveryResult("Match", d.witness, ZERO, bound, fit=fit)
        return RecoveryResult("NoMatch", bound=bound, fit=fit, decided=d.is_no, detail=d.detail)
    A, b = fit_affine_numeric(h)
    tol = h.tol if h.tol is not None and h.tol > tol else tol
    cands = []
    for el in group.enumerate(bound):
        Ag = np.array([[float(v) for v in row] for row in el.map.A])
        bg = np.array([float(v) for v in el.map.b])
        if np.max(np.abs(Ag - A)) > tol or np.max(np.abs(bg - b)) > tol:
            continue
        r = _numeric_residual(el.map, h)
        if r <= tol:
            cands.append((el, r))
    if not cands:
        return RecoveryResult("NoMatch", bound=bound, fit=(A, b), detail=f"no element within {tol} up to word length {bound}")
    if len(cands) > 1:
        return RecoveryResult("Ambiguous", bound=bound, candidates=tuple(c for c, _ in cands), fit=(A, b))
    el, r = cands[0]
    return RecoveryResult("Match", el, r, bound, fit=(A, b))


def recover_per_box(h: SampledMap, group: AffineGroup, bound: int = DEFAULT_BOUND, tol: float = DEFAULT_TOL) -> list[tuple[OpenBoxSet, RecoveryResult]]:
    """Recover independently on each box of the domain (a germ choice per piece)."""
    out = []
    for box in h.domain.boxes:
        piece = OpenBoxSet(h.n, (box,))
        sub = tuple(s for s in h.samples if s[0] in piece)
        try:
            res = recover_affine(SampledMap(piece, sub, h.derivatives, h.tol), group, bound, tol)
        except DegenerateSamples as exc:
            res = RecoveryResult("NoMatch", bound=bound, decided=False, detail=str(exc))
        out.append((piece, res))
    return out


# -- local lifts ------------------------------------------------------------------


@dataclass(frozen=True)
class LocalLift:
    """An affine transition ``map`` on ``dom`` (in chart ``src_chart``) with ``map(r) = r'``."""

    src_chart: int
    tgt_chart: int
    map: AffineMap
    dom: OpenBoxSet
    steps: tuple = field(default=(), compare=False)


def _as_groupoid(X) -> Groupoid:
    if isinstance(X, Atlas):
        return germ_groupoid_of_atlas(X)
    if isinstance(X, (ActionGroupoid, GermGroupoid)):
        return X
    raise TypeError("expected an Atlas or an affine étale groupoid")


def lift_local_diffeo(source, target, f, r, r_prime, bound: int = DEFAULT_BOUND) -> LocalLift:
    """A lift ψ of the orbit map ``f`` with ψ(r) = r′ exactly.

    ``f`` is a :class:`LiftFamily` or a list of representative pairs ``(x, y)``
    with ``f([x]) = [y]`` (source chart 0 to target chart 0).  A lift ψ₀ near r is
    taken from the family (through an arrow at r if no lift covers r itself) or
    fitted through the pairs; then ψ = γ′ ∘ ψ₀ with γ′ from the target orbit search
    for ψ₀(r) ~ r′.
    """
    G, H = _as_groupoid(source), _as_groupoid(target)
    r = base_point(r, n=G.n)
    r_prime = base_point(r_prime, n=H.n)
    steps: list = []
    if isinstance(f, LiftFamily):
        lf = f.lift_at(r)
        pre = AffineMap.identity(G.n)
        if lf is None:
            for arrow in G.arrows_at(r, bound):
                lf = f.lift_at(arrow.target)
                if lf is not None:
                    pre = arrow.map
                    steps.append(("source_arrow", arrow.map.to_json()))
                    break
        if lf is None:
            raise ValueError("no lift covers an orbit-translate of r within the bound")
        psi0 = compose(lf.map, pre)
        dom = lf.dom if pre.is_identity else _preimage_or(lf.dom, pre, G.charts[r[0]])
        tgt_chart = lf.tgt_chart
    else:
        pairs = [(as_point(x, G.n), as_point(y, H.n)) for x, y in f]
        h = SampledMap(G.charts[r[0]], tuple(pairs))
        psi0 = fit_affine_exact(h)
        dom = G.charts[r[0]]
        tgt_chart = 0
    d = H.compare((tgt_chart, psi0(r[1])), r_prime, bound)
    if not d.is_yes:
        raise LookupError(f"orbit search for the correcting element: {d.verdict.value} ({d.detail})")
    psi = compose(d.witness.map, psi0)
    if psi(r[1]) != r_prime[1]:
        raise AssertionError("lift does not hit r' exactly")
    steps.append(("target_arrow", d.witness.map.to_json()))
    dom = dom.intersect(_preimage_or(H.charts[r_prime[0]], psi, dom))
    return LocalLift(r[0], r_prime[0], psi, dom, tuple(steps))


def _preimage_or(V: OpenBoxSet, f: AffineMap, fallback: OpenBoxSet) -> OpenBoxSet:
    try:
        return V.preimage(f)
    except ValueError:
        return fallback


def lift_report(L: LocalLift, source, target, f, samples: int = 20, seed: int = 0, bound: int = DEFAULT_BOUND) -> dict:
    """Orbit compatibility of a local lift with ``f`` on sampled points of its domain."""
    G, H = _as_groupoid(source), _as_groupoid(target)
    agree = undecided = differ = 0
    om = orbit_map(f, bound) if isinstance(f, LiftFamily) else None
    for x in L.dom.sample(samples, seed):
        y = (L.tgt_chart, L.map(x))
        ref = om((L.src_chart, x)) if om is not None else None
        if ref is None:
            undecided += 1
            continue
        d = H.compare(y, ref, bound)
        agree += d.is_yes
        differ += d.is_no
        undecided += d.is_unknown
    return {"agree": agree, "differ": differ, "undecided": undecided, "pass": differ == 0}
