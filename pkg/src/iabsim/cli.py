"""Command-line entry point.

Exit status: 0 on success, 1 for invalid parameters or inputs, 2 when
``run --strict`` finds a trial above the capacity bound.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .bounds import bounds_report, k_star
from .csvio import assignment_csv, metrics_csv
from .errors import IabError, ParameterError, SizeError
from .harness import MODELS, ScenarioConfig, compare, run_batch, verify_bounds
from .oracle import solve_exact
from .topology import Topology, sample_ppp

EXIT_OK, EXIT_PARAM, EXIT_BOUND = 0, 1, 2


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    changes = {}
    if getattr(args, "seed_base", None) is not None:
        changes["seed_base"] = args.seed_base
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "model", None) is not None:
        changes["model"] = args.model
    return cfg.with_(**changes) if changes else cfg


def cmd_run(args) -> int:
    cfg = _load_config(args)
    batch = run_batch(cfg)
    _emit(metrics_csv(batch), args.out)
    check = verify_bounds(batch)
    for lam, seed, n in check.capacity_violations:
        print(f"capacity bound {check.capacity_bound!r} exceeded: lambda={lam!r} seed={seed} supported={n}", file=sys.stderr)
    if args.strict and not check.ok:
        return EXIT_BOUND
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    result = compare(cfg)
    _emit(metrics_csv(result.mcm, result.scm), args.out)
    for lam in cfg.lambda_grid:
        print(f"lambda={lam!r} mcm/scm supported ratio={result.ratio(lam)!r}", file=sys.stderr)
    return EXIT_OK


def cmd_bounds(args) -> int:
    cfg = _load_config(args)
    grid = [args.lam] if args.lam is not None else list(cfg.lambda_grid)
    lines = [f"# k_star={k_star(cfg.radio)}"]
    for lam in grid:
        if not lam > 0:
            raise ParameterError(f"density must be positive, got {lam}")
        lines += bounds_report(cfg.radio, cfg.region, lam).comment_lines(lam)
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _load_config(args)
    try:
        topo = Topology.from_csv(args.topology)
    except (OSError, ValueError, KeyError) as exc:
        raise ParameterError(f"cannot read topology {args.topology}: {exc}") from exc
    alpha = args.alpha if args.alpha is not None else cfg.alpha
    sol = solve_exact(topo, cfg.radio, alpha, max_sbs=args.max_sbs, max_channels=args.max_channels)
    _emit(assignment_csv(topo, cfg.radio, sol.assignment, sol.supported, objective=sol.objective), args.out)
    return EXIT_OK


def cmd_topology(args) -> int:
    cfg = _load_config(args)
    topo = sample_ppp(cfg.region, args.lam, args.seed)
    if not args.out:
        raise ParameterError("topology needs --out")
    topo.to_csv(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iabsim", description="Multi-hop IAB backhaul simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, batch: bool):
        sp.add_argument("--config", help="scenario file with [region] [radio] [ascent] [experiment] sections")
        sp.add_argument("--out", help="output path (default: stdout)")
        if batch:
            sp.add_argument("--seed-base", type=int, dest="seed_base")
            sp.add_argument("--trials", type=int)

    sp = sub.add_parser("run", help="Monte Carlo batch to metrics CSV")
    common(sp, batch=True)
    sp.add_argument("--model", choices=MODELS)
    sp.add_argument("--strict", action="store_true", help="exit 2 if any trial exceeds the capacity bound")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compare", help="paired MCM and SCM batches")
    common(sp, batch=True)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("bounds", help="closed-form bounds for the configured parameters")
    common(sp, batch=False)
    sp.add_argument("--lam", type=float, help="single density instead of the configured grid")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("oracle", help="exact solution for a small topology CSV")
    common(sp, batch=False)
    sp.add_argument("topology", help="topology CSV with header id,x,y")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--max-sbs", type=int, default=7, dest="max_sbs")
    sp.add_argument("--max-channels", type=int, default=3, dest="max_channels")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("topology", help="sample one Poisson layout to CSV")
    common(sp, batch=False)
    sp.add_argument("--lam", type=float, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_topology)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, SizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except IabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    raise SystemExit(main())
