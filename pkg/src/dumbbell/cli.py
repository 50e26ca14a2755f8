"""Command line entry point: ``dumbbell <subcommand> --config run.toml``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .geometry import assemble_dumbbell

log = logging.getLogger("dumbbell")


def _load(args) -> dict:
    cfg = cfgmod.load_config(args.config) if args.config else cfgmod.normalize({})
    if getattr(args, "seed", None) is not None:
        cfg["rng_seed"] = args.seed
    return cfg


def _outdir(args, cfg: dict, what: str, extra: dict | None = None) -> Path:
    keyed = dict(cfg, _command=what, _extra=extra or {})
    root = Path(args.out) if args.out else Path(cfg.get("output_dir", "runs"))
    d = root / f"{cfg.get('name', 'run')}-{what}-{cfgmod.config_hash(keyed)}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _geometry(cfg: dict, eps: float | None, delta: float | None):
    spec = cfgmod.build_spec(cfg["geometry"])
    if eps is None:
        eps = cfgmod.eps_list(cfg["sweep"])[-1]
    if delta is None:
        delta = float(cfgmod.build_family(cfg["family"]).delta(eps))
    return assemble_dumbbell(spec, eps, delta)


def _dump(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_default)


def _default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def cmd_mesh(args) -> int:
    from .mesh import mesh_quality, triangulate

    cfg = _load(args)
    geom = _geometry(cfg, args.eps, args.delta)
    mesh = triangulate(geom, cfgmod.build_mesh_params(cfg["mesh"]))
    out = _outdir(args, cfg, "mesh", {"eps": geom.eps, "delta": geom.delta})
    geom.save_csv(out / "boundary.csv")
    mesh.save_text(out / "mesh.txt")
    _dump(out / "mesh.json", {"meta": mesh.meta, "quality": mesh_quality(mesh), "n_nodes": mesh.n_nodes,
                               "n_triangles": mesh.n_triangles})
    print(out)
    return 0


def cmd_solve(args) -> int:
    from .fem import DiscreteOperator
    from .mesh import triangulate
    from .minimize import solve_critical_point

    cfg = _load(args)
    geom = _geometry(cfg, args.eps, args.delta)
    mesh = triangulate(geom, cfgmod.build_mesh_params(cfg["mesh"]))
    op = DiscreteOperator(mesh)
    rep = solve_critical_point(op, cfgmod.build_potential(cfg["potential"]), cfgmod.build_seed(cfg["seed"]),
                               cfgmod.build_controls(cfg["solver"]))
    out = _outdir(args, cfg, "solve", {"eps": geom.eps, "delta": geom.delta})
    mesh.save_text(out / "mesh.txt")
    rep.field.save_csv(out / "field.csv")
    _dump(out / "report.json", rep.to_dict())
    print(out)
    return 0


def cmd_sweep(args) -> int:
    from .harness import SweepConfig, run_and_report

    cfg = _load(args)
    if args.workers:
        cfg["sweep"]["workers"] = args.workers
    sc = SweepConfig.from_dict(cfg)
    res = run_and_report(sc, root=args.out)
    print(res["paths"]["summary"].read_text(), end="")
    print(res["outdir"])
    if args.strict and not all(c["pass"] for c in res["checks"]):
        return 1
    return 0


def cmd_limits(args) -> int:
    from .limits import LimitDomain, oddness_defect, slope_identity, solve_limit

    cfg = _load(args)
    lim = dict(cfg.get("limits", {}))
    for k in ("kind", "R", "L", "width", "ell"):
        v = getattr(args, k, None)
        if v is not None:
            lim[k] = v
    log_coef = float(lim.pop("log_coef", 1.0) if args.log_coef is None else args.log_coef)
    neck = cfgmod.build_neck(lim.pop("opening")) if "opening" in lim else None
    dom = LimitDomain(neck=neck, **{k: lim[k] for k in lim if k in ("kind", "R", "L", "width", "ell", "h_min", "growth", "n_arc")})
    sol = solve_limit(dom, log_coef)
    diag = dict(sol.diagnostics)
    if dom.kind == "halfstrip":
        diag["slope_identity"] = slope_identity(sol)
    else:
        diag["oddness"] = oddness_defect(sol)
    out = _outdir(args, cfg, "limits", {"limits": lim, "log_coef": log_coef})
    sol.mesh.save_text(out / "mesh.txt")
    sol.field.save_csv(out / "field.csv")
    _dump(out / "diagnostics.json", diag)
    print(json.dumps(diag, indent=2, default=_default))
    return 0


def cmd_verify(args) -> int:
    from .closedform import identity_report
    from .harness import fem_self_checks

    seed = 0 if args.seed is None else args.seed
    report = {}
    if args.target in ("closedform", "all"):
        report["closedform"] = identity_report(args.n, seed)
    if args.target in ("fem", "all"):
        report["fem"] = fem_self_checks(seed)
    report["pass"] = all(v["pass"] for v in report.values())
    text = json.dumps(report, indent=2, default=_default)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / f"verify-{args.target}.json").write_text(text + "\n")
    print(text)
    return 0 if report["pass"] else 1


def cmd_classify(args) -> int:
    from .fem import DiscreteOperator
    from .mesh import triangulate
    from .minimize import enumerate_stable
    from .potential import find_wells

    cfg = _load(args)
    pot = cfgmod.build_potential(cfg["potential"])
    if pot.mbar is None:
        raise SystemExit("classification needs a coercive potential with a finite Mbar")
    wells = find_wells(pot, (-pot.mbar, pot.mbar))
    geom = _geometry(cfg, args.eps, args.delta)
    mesh = triangulate(geom, cfgmod.build_mesh_params(cfg["mesh"]))
    op = DiscreteOperator(mesh)
    states = enumerate_stable(op, pot, wells, cfgmod.build_controls(cfg["solver"]))
    summary = {
        "wells": list(wells.wells),
        "n_stable": len(states),
        "n_nonconstant": len(states.nonconstant),
        "expected_nonconstant": len(wells) * (len(wells) - 1),
        "states": [{"alpha": s.seed.alpha, "beta": s.seed.beta, "energy": s.energy, "lambda_min": s.lambda_min,
                    "constant": s.is_constant} for s in states],
        "findings": states.findings,
        "rejected": states.rejected,
    }
    out = _outdir(args, cfg, "classify", {"eps": geom.eps, "delta": geom.delta})
    _dump(out / "classification.json", summary)
    print(json.dumps(summary, indent=2, default=_default))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dumbbell", description="Allen-Cahn critical points on dumbbell domains")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, eps=True):
        p.add_argument("--config", "-c", help="TOML run configuration")
        p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
        p.add_argument("--out", "-o", help="root directory for run outputs")
        if eps:
            p.add_argument("--eps", type=float, help="neck length parameter (default: smallest sweep value)")
            p.add_argument("--delta", type=float, help="neck height (default: from the scaling family)")

    common(sub.add_parser("mesh", help="build the geometry and write mesh files"))
    common(sub.add_parser("solve", help="compute one critical point"))
    p = sub.add_parser("sweep", help="run a full regime sweep and report")
    common(p, eps=False)
    p.add_argument("--workers", type=int, help="parallel sweep points")
    p.add_argument("--strict", action="store_true", help="exit 1 if any acceptance check fails")
    p = sub.add_parser("limits", help="solve a truncated limit problem")
    common(p, eps=False)
    p.add_argument("--kind", choices=["halfstrip", "normal", "thick"])
    p.add_argument("--R", type=float)
    p.add_argument("--L", type=float)
    p.add_argument("--width", type=float)
    p.add_argument("--ell", type=float)
    p.add_argument("--log-coef", type=float)
    p = sub.add_parser("verify", help="closed-form identities and FEM self-checks")
    p.add_argument("target", nargs="?", default="all", choices=["closedform", "fem", "all"])
    p.add_argument("--n", type=int, default=1000, help="random parameter draws")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", "-o")
    common(sub.add_parser("classify", help="enumerate stable states from every well pair"))
    return ap


COMMANDS = {"mesh": cmd_mesh, "solve": cmd_solve, "sweep": cmd_sweep, "limits": cmd_limits, "verify": cmd_verify,
            "classify": cmd_classify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
