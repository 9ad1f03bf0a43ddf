"""Command line entry point: ``wardropdyn <subcommand> SCENARIO [options]``.

SCENARIO is a built-in name (fig1, fig1-pc, two-link-sym, two-link-asym,
single-link, infeasible) or a path to a scenario file. Outputs go under
``--output``, else the scenario's ``output.directory``, else
``$WARDROPDYN_OUTPUT/<subcommand>-<scenario>`` (default base ``runs``).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from . import experiment as ex
from .errors import Infeasible, WardropDynError
from .scenario import load_scenario, write_csv

log = logging.getLogger("wardropdyn")

OUTPUT_ENV = "WARDROPDYN_OUTPUT"


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"must be a finite number > 0, got {text}")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _eta_list(text):
    return [_positive_float(x) for x in text.split(",") if x.strip()]


def _output_dir(args, cfg) -> Path:
    if args.output:
        return Path(args.output)
    if cfg.output:
        return Path(cfg.output)
    return Path(os.environ.get(OUTPUT_ENV, "runs")) / f"{args.command}-{cfg.name}"


def _figures(args):
    return tuple(ext for ext, on in (("svg", args.svg), ("png", args.png)) if on)


def cmd_simulate(args) -> int:
    cfg = load_scenario(args.scenario)
    out = _output_dir(args, cfg)
    traj, eq, manifest = ex.run_and_write(cfg, out, eta=args.eta, dt=args.dt, t_end=args.t_end,
                                          stride=args.stride, figures=_figures(args))
    run = manifest["run"]
    print(f"scenario       {cfg.name}")
    print(f"eta            {manifest['eta']:g}  (dt {traj.info['dt']:g})")
    print(f"status         {run['status']}")
    print(f"t_final        {run['t_final']:.6g}")
    print(f"dist_l1 start  {run['initial_dist_l1']:.6g}")
    print(f"dist_l1 end    {run['terminal_dist_l1']:.6e}")
    print(f"t to {run['threshold']:g}    {run['time_to_threshold']:.6g}")
    print(f"output         {out}")
    return 0


def cmd_equilibrium(args) -> int:
    cfg = load_scenario(args.scenario)
    try:
        eq = ex.equilibrium_for(cfg, args.method)
    except Infeasible as exc:
        print(f"infeasible: min-cut capacity C* = {exc.min_cut:.12g} <= 1", file=sys.stderr)
        return 1
    for name, p, path in zip(cfg.paths.names, eq.pi_h, cfg.paths.paths):
        links = " ".join(cfg.network.link_names[e] for e in path)
        print(f"{name:>5}  pi_h = {p:.12f}   [{links}]")
    for e, name in enumerate(cfg.network.link_names):
        print(f"{name:>5}  f_h = {eq.f_h[e]:.12f}  rho_h = {eq.rho_h[e]:.12f}")
    print(f"potential             {eq.potential_value:.15g}")
    print(f"fixed-point residual  {eq.fixed_point_residual:.3e}")
    print(f"wardrop gap           {eq.wardrop_gap:.6g}")
    print(f"solver                {eq.solver} ({eq.iterations} iterations)")
    out = _output_dir(args, cfg)
    write_csv(out / "equilibrium.csv", ["kind", "name", "quantity", "value"],
              ex.equilibrium_report_rows(cfg, eq))
    print(f"report                {out / 'equilibrium.csv'}")
    return 0


def cmd_check(args) -> int:
    cfg = load_scenario(args.scenario)
    ok = True
    cstar = cfg.min_cut
    feasible = cstar > 1.0
    ok &= feasible
    print(f"nodes            {cfg.network.node_count}")
    print(f"links            {cfg.network.link_count}")
    print(f"paths            {len(cfg.paths)}")
    print(f"min-cut C*       {cstar:.12g}  ({'feasible' if feasible else 'INFEASIBLE: C* <= 1'})")
    checks = ex.assumption_checks(cfg, samples=args.samples, seed=args.seed)
    print(f"consistency      max residual {checks['consistency_max_residual']:.2e}  "
          f"{'ok' if checks['consistency_ok'] else 'FAIL'}")
    coop = checks["cooperativity_min_cross_derivative"]
    print(f"cooperativity    min cross-derivative {coop:.2e}  "
          f"{'ok' if checks['cooperativity_ok'] else 'FAIL'}")
    ok &= checks["consistency_ok"] and checks["cooperativity_ok"]
    return 0 if ok else 1


def cmd_sweep(args) -> int:
    cfg = load_scenario(args.scenario)
    out = _output_dir(args, cfg)
    rows, failures = ex.sweep(cfg, args.etas, out, jobs=args.jobs, figures=_figures(args))
    print(f"{'eta':>8}  {'status':>10}  {'dist_l1':>12}  {'t_thresh':>10}")
    for eta, status, dist, ttt, _ in rows:
        print(f"{eta:>8g}  {status:>10}  {dist:>12.4e}  {ttt:>10.4g}")
    for eta, err in failures:
        print(f"eta={eta:g} failed: {err}", file=sys.stderr)
    print(f"summary  {out / 'summary.csv'}")
    return 1 if failures else 0


def cmd_compare(args) -> int:
    cfg = load_scenario(args.scenario)
    out = _output_dir(args, cfg)
    summary, _ = ex.compare(cfg, eta=args.eta, out_dir=out, figures=_figures(args))
    for name, (status, ttt, dist, _) in summary.items():
        print(f"{name:<22} {status:<10} t to 1e-3 = {ttt:.6g}  final dist_l1 = {dist:.3e}")
    print(f"comparison  {out / 'comparison.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wardropdyn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, plots=True):
        p.add_argument("scenario", help="built-in name or scenario file")
        p.add_argument("--output", help="output directory")
        if plots:
            p.add_argument("--svg", action="store_true", help="also write SVG figures")
            p.add_argument("--png", action="store_true", help="also write PNG figures")

    p = sub.add_parser("simulate", help="solve the equilibrium, then integrate toward it")
    common(p)
    p.add_argument("--eta", type=_positive_float)
    p.add_argument("--dt", type=_positive_float)
    p.add_argument("--t-end", type=_positive_float)
    p.add_argument("--stride", type=_positive_int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("equilibrium", help="perturbed equilibrium report")
    common(p, plots=False)
    p.add_argument("--method", choices=["fixed_point", "mirror_descent"])
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("check", help="network, feasibility and local-decision checks")
    p.add_argument("scenario")
    p.add_argument("--samples", type=_positive_int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("sweep", help="simulate over several eta values")
    common(p)
    p.add_argument("--etas", type=_eta_list, default=list(ex.DEFAULT_ETAS),
                   help="comma separated, default 0.01,0.1,1,10,100")
    p.add_argument("--jobs", type=_positive_int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="i-logit versus preference-consistent local decisions")
    common(p)
    p.add_argument("--eta", type=_positive_float)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except WardropDynError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
