"""Command-line entry point: ``quasifold <command> ...`` with JSON output.

Exit codes: 0 Yes / pass, 1 No / fail, 3 Unknown, 2 error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

from . import bibundle as bb
from . import nonexample as nx
from .affine import AffineGroup
from .lift import DegenerateSamples, SampledMap, recover_affine
from .model import DEFAULT_BOUND, Atlas, OpenBoxSet, atlas_Pi
from .scalar import parse
from .torus import QuadraticIrrational, WitnessMatrix, lift_witness_to_bibundle, orbit_bijection_report
from .torus import report as torus_report
from .verdict import Verdict

EXIT_YES, EXIT_NO, EXIT_ERROR, EXIT_UNKNOWN = 0, 1, 2, 3
_VERDICT_EXIT = {Verdict.YES: EXIT_YES, Verdict.NO: EXIT_NO, Verdict.UNKNOWN: EXIT_UNKNOWN}


@dataclass(frozen=True)
class RunConfig:
    command: str
    inputs: tuple[str, ...] = ()
    bound: int = DEFAULT_BOUND
    samples: int = 100
    seed: int = 0
    tol: float = 1e-9
    out: Optional[str] = None
    format: str = "json"

    def __post_init__(self):
        if self.bound <= 0 or self.samples <= 0:
            raise ValueError("bound and samples must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["inputs"] = list(self.inputs)
        return d


class UsageError(Exception):
    pass


def _load(path: str):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read JSON from {path}: {exc}") from exc


def _box_arg(text: str) -> OpenBoxSet:
    """A box set as JSON, or ``lo,hi`` for an interval."""
    text = text.strip()
    if text.startswith("{") or text.startswith("["):
        return OpenBoxSet.from_json(json.loads(text))
    if text in ("R", "R^1"):
        return OpenBoxSet.whole(1)
    lo, hi = text.split(",")
    return OpenBoxSet.interval(parse(lo), parse(hi))


# -- commands ---------------------------------------------------------------------


def cmd_torus(cfg: RunConfig, alpha: str, beta: str, lift: bool = False) -> tuple[dict, int]:
    a, b = QuadraticIrrational.parse(alpha), QuadraticIrrational.parse(beta)
    rep = torus_report(a, b)
    rep["alpha"], rep["beta"] = alpha, beta
    if lift and rep["equivalent"]:
        W = WitnessMatrix.of(tuple(tuple(r) for r in rep["witness"]))
        P = lift_witness_to_bibundle(a, b, W)
        cls = bb.classify(P, cfg.bound, min(cfg.samples, 20), cfg.seed)
        rep["bibundle"] = P.to_json()
        rep["checks"] = [
            orbit_bijection_report(P, cfg.samples, cfg.seed),
            {"name": "classify", "value": cls.label, "pass": cls.label != "Plain"},
        ]
    return rep, EXIT_YES if rep["equivalent"] else EXIT_NO


def cmd_orbit(cfg: RunConfig, atlas_path: str, i: int, x: str, j: int, y: str) -> tuple[dict, int]:
    atlas = Atlas.from_json(_load(atlas_path))
    try:
        hx = atlas_Pi(atlas, i - 1, [parse(c) for c in x.split(",")], cfg.bound)
        hy = atlas_Pi(atlas, j - 1, [parse(c) for c in y.split(",")], cfg.bound)
    except IndexError as exc:
        raise UsageError(f"chart index out of range: {exc}") from exc
    d = hx.compare(hy)
    out = {"verdict": d.verdict.value, "detail": d.detail}
    if d.is_yes and d.witness is not None:
        out["witness"] = d.witness.map.to_json()
    return out, _VERDICT_EXIT[d.verdict]


def cmd_bibundle(cfg: RunConfig, op: str, paths: Sequence[str], U: Optional[str], V: Optional[str]) -> tuple[dict, int]:
    fams = [bb.LiftFamily.from_json(_load(p)) for p in paths]
    need = {"compose": 2, "iso": 2, "restrict": 1, "classify": 1}[op]
    if len(fams) != need:
        raise UsageError(f"{op} takes {need} bibundle file(s)")
    if op == "compose":
        P, Q = fams
        if P.target != Q.source:
            raise UsageError("target of the first bibundle differs from the source of the second")
        QP = bb.compose_bibundles(P, Q)
        check = bb.functoriality_report(P, Q, QP, cfg.samples, cfg.seed, cfg.bound)
        return {"bibundle": QP.to_json(), "empty": QP.is_empty, "checks": [check]}, EXIT_YES if check["pass"] else EXIT_NO
    if op == "restrict":
        (P,) = fams
        R = bb.restrict(P, _box_arg(U or "R"), _box_arg(V or "R"))
        return {"bibundle": R.to_json(), "empty": R.is_empty}, EXIT_YES
    if op == "classify":
        c = bb.classify(fams[0], cfg.bound, min(cfg.samples, 20), cfg.seed)
        out = {
            "class": c.label,
            "locally_invertible": c.locally_invertible.value,
            "saturation": c.saturation.value,
            "detail": c.detail,
        }
        return out, EXIT_UNKNOWN if c.result is None else EXIT_YES
    P, Q = fams
    if P.source != Q.source or P.target != Q.target:
        raise UsageError("bibundles have different source or target")
    d = bb.isomorphic(P, Q, cfg.samples, cfg.bound, cfg.seed)
    return {"verdict": d.verdict.value, "witness": d.witness, "detail": d.detail}, _VERDICT_EXIT[d.verdict]


def cmd_recover(cfg: RunConfig, samples_path: str, group_path: str) -> tuple[dict, int]:
    h = SampledMap.from_json(_load(samples_path))
    group = AffineGroup.from_json(_load(group_path))
    try:
        res = recover_affine(h, group, cfg.bound, cfg.tol)
    except DegenerateSamples as exc:
        raise UsageError(str(exc)) from exc
    code = EXIT_YES if res.is_match else (EXIT_NO if res.decided else EXIT_UNKNOWN)
    return res.to_json(), code


def cmd_nonexample(cfg: RunConfig, check: str, args: argparse.Namespace) -> tuple[dict, int]:
    flow = nx.FlatFlow(accuracy=args.accuracy)
    if check == "jet":
        rep = nx.jet_flatness_check(args.order, args.scale, args.jet_tol, flow)
    elif check == "orbits":
        pts = [float(v) for v in args.x] if args.x else nx.default_orbit_samples(min(cfg.samples, 20))
        rep = nx.orbit_coincidence(pts, args.k, cfg.tol, flow)
    else:
        rep = nx.recovery_failure_demo((args.a, args.b), args.k, tol=cfg.tol, flow=flow)
        rep["summary"] = f"{rep['outcome']} (as expected)" if rep["outcome"] == "NoMatch" else rep["outcome"]
    return rep, EXIT_YES if nx.all_pass(rep) else EXIT_NO


# -- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--bound", type=int, default=DEFAULT_BOUND, help="word-length bound for searches")
    common.add_argument("--samples", type=int, default=100, help="sample count")
    common.add_argument("--seed", type=int, default=0, help="sampling seed")
    common.add_argument("--tol", type=float, default=1e-9, help="numeric tolerance")
    common.add_argument("--out", help="write JSON here instead of stdout")
    common.add_argument("--format", choices=("json", "text"), default="json")

    p = argparse.ArgumentParser(prog="quasifold", description="Quasifold groupoids over countable affine actions.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("torus", parents=[common], help="Morita equivalence of irrational tori")
    t.add_argument("alpha")
    t.add_argument("beta")
    t.add_argument("--lift", action="store_true", help="also build and check the lifted bibundle")

    o = sub.add_parser("orbit", parents=[common], help="compare two atlas points (1-based charts)")
    o.add_argument("atlas", help="atlas JSON file or - for stdin")
    o.add_argument("i", type=int)
    o.add_argument("x", help="point coordinates, comma separated")
    o.add_argument("j", type=int)
    o.add_argument("y")

    b = sub.add_parser("bibundle", parents=[common], help="bibundle operations on lift-family JSON")
    b.add_argument("op", choices=("compose", "restrict", "classify", "iso"))
    b.add_argument("files", nargs="+")
    b.add_argument("--U", help="source box set (JSON or lo,hi) for restrict")
    b.add_argument("--V", help="target box set (JSON or lo,hi) for restrict")

    r = sub.add_parser("recover", parents=[common], help="recover the group element behind sampled data")
    r.add_argument("samples_file")
    r.add_argument("group_file")

    n = sub.add_parser("nonexample", parents=[common], help="numerical checks for the flat flow")
    n.add_argument("check", choices=("jet", "orbits", "recovery"))
    n.add_argument("--order", type=int, default=4)
    n.add_argument("--scale", type=float, default=0.1)
    n.add_argument("--jet-tol", type=float, default=1e-6)
    n.add_argument("--accuracy", type=float, default=nx.DEFAULT_ACCURACY)
    n.add_argument("--k", type=int, default=3)
    n.add_argument("--x", nargs="*", help="sample points for the orbit check")
    n.add_argument("--a", type=float, default=-0.5)
    n.add_argument("--b", type=float, default=0.5)
    return p


def _text(rep: dict) -> str:
    lines = []
    for key, val in rep.items():
        if key == "checks":
            for c in val:
                mark = "PASS" if c.get("pass") else "FAIL"
                lines.append(f"  [{mark}] {c.get('name')}: value={c.get('value')} bound={c.get('bound')}")
        elif key not in ("config", "bibundle", "candidates"):
            lines.append(f"{key}: {val}")
    return "\n".join(lines)


def run(argv: Optional[Sequence[str]] = None) -> tuple[dict, int]:
    args = build_parser().parse_args(argv)
    inputs = tuple(
        str(v) for k in ("alpha", "beta", "atlas", "files", "samples_file", "group_file") for v in _listify(getattr(args, k, None))
    )
    cfg = RunConfig(args.command, inputs, args.bound, args.samples, args.seed, args.tol, args.out, args.format)
    if args.command == "torus":
        rep, code = cmd_torus(cfg, args.alpha, args.beta, args.lift)
    elif args.command == "orbit":
        rep, code = cmd_orbit(cfg, args.atlas, args.i, args.x, args.j, args.y)
    elif args.command == "bibundle":
        rep, code = cmd_bibundle(cfg, args.op, args.files, args.U, args.V)
    elif args.command == "recover":
        rep, code = cmd_recover(cfg, args.samples_file, args.group_file)
    else:
        rep, code = cmd_nonexample(cfg, args.check, args)
    rep["config"] = cfg.to_json()
    return rep, code


def _listify(v):
    if v is None:
        return []
    return v if isinstance(v, list) else [v]


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        rep, code = run(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else 0
    except (UsageError, ValueError, TypeError, KeyError, LookupError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_ERROR
    text = _text(rep) if rep["config"]["format"] == "text" else json.dumps(rep, indent=2, default=str, ensure_ascii=False)
    if rep["config"]["out"]:
        with open(rep["config"]["out"], "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
