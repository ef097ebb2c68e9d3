"""Command-line front end."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfg
from .duality import dual_oracle
from .feasibility import check_feasible, check_zf_feasible
from .model import (InfeasibleError, NotConvergedError, SolveOutcome, SolverError,
                    consumption_all, per_bs_power)
from .oracle import grid_search_two_bs, single_user_closed_forms
from .scenario import (CHANNEL_MODES, POLICIES, SCHEMES, load_renewable_csv, run_timeline,
                       synthetic_renewables)

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_NOT_CONVERGED = 0, 1, 2, 3

EPILOG = """\
exit codes:
  0  success (converged / feasible / all checks within tolerance)
  1  configuration, I/O or guard error
  2  infeasible (QoS targets cannot be met within the power caps, or
     zero-forcing impossible, e.g. K > M*N)
  3  not converged (iteration budget exhausted or verdict undecided)
"""

GRID_STEP = 1e-3


def _load(args) -> cfg.Config:
    conf = cfg.load(args.config)
    overrides = {"tol": getattr(args, "tol", None), "max_iter": getattr(args, "max_iter", None)}
    conf = replace(conf, solver=conf.solver.updated(**overrides))
    seed = getattr(args, "seed", None)
    if seed is not None:
        if conf.layout is not None:
            conf = replace(conf, layout=replace(conf.layout, seed=seed))
        conf = replace(conf, simulation=replace(conf.simulation, seed=seed))
    return conf


def _fmt(values) -> str:
    return " ".join(f"{v:.9g}" for v in np.atleast_1d(values))


def _outcome_dict(outcome: SolveOutcome, conf: cfg.Config) -> dict:
    c = conf.cluster
    return {
        "scheme": outcome.scheme,
        "cost": outcome.cost,
        "objective": outcome.objective,
        "dual_value": outcome.dual_value,
        "relative_gap": outcome.relative_gap,
        "converged": outcome.converged,
        "iterations": outcome.iterations,
        "tx_power": per_bs_power(outcome.beams, c.n_ant).tolist(),
        "consumption": consumption_all(outcome.beams, c).tolist(),
        "buy": np.asarray(outcome.schedule.buy).tolist(),
        "sell": np.asarray(outcome.schedule.sell).tolist(),
        "dual_mu": outcome.dual_mu.tolist(),
        "dual_nu": outcome.dual_nu.tolist(),
    }


def cmd_solve(args) -> int:
    conf = _load(args)
    instance = conf.instance()
    try:
        outcome = SCHEMES[args.scheme](instance, conf.solver)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NotConvergedError as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    report = _outcome_dict(outcome, conf)
    print(f"scheme       {report['scheme']}")
    print(f"cost         {report['cost']:.9g}")
    print(f"objective    {report['objective']:.9g}")
    print(f"dual value   {report['dual_value']:.9g}")
    print(f"relative gap {report['relative_gap']:.3g}")
    print(f"converged    {report['converged']} ({report['iterations']} iterations)")
    for key in ("tx_power", "consumption", "buy", "sell", "dual_mu", "dual_nu"):
        print(f"{key:<12} {_fmt(report[key])}")
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK if outcome.converged else EXIT_NOT_CONVERGED


def cmd_simulate(args) -> int:
    conf = _load(args)
    sim = conf.simulation
    if args.channels:
        sim = replace(sim, channel_mode=args.channels)
    if args.blocks:
        sim = replace(sim, blocks=args.blocks)
    if args.scheme:
        sim = replace(sim, schemes=tuple(args.scheme))
    if args.policy:
        sim = replace(sim, policy=args.policy)
    source = args.renewables or sim.renewables
    if source == "synthetic":
        series = synthetic_renewables(conf.cluster.n_bs, sim.blocks, sim.seed,
                                      sim.renewable_peak, sim.blocks_per_day, sim.sources)
    else:
        series = load_renewable_csv(source, conf.cluster.n_bs)
    report = run_timeline(conf.instance(), series, sim.schemes, layout=conf.layout,
                          channel_mode=sim.channel_mode, n_realizations=sim.n_realizations,
                          policy=sim.policy, options=conf.solver)
    paths = report.write(args.out)
    sys.stdout.write(report.summary_csv())
    print(f"wrote {paths[0]} and {paths[1]}")
    return EXIT_OK


def cmd_verify(args) -> int:
    conf = _load(args)
    instance = conf.instance()
    c = conf.cluster
    if c.n_mt != 1:
        print(f"verify needs a single-MT instance (K=1), got K={c.n_mt}", file=sys.stderr)
        return EXIT_ERROR
    outcome = SCHEMES["optimal"](instance, conf.solver)
    checks = []
    ref = single_user_closed_forms(instance, outcome.dual_mu, outcome.dual_nu)
    at = dual_oracle(instance, outcome.dual_mu, outcome.dual_nu, conf.solver)
    scale = max(1.0, abs(ref.dual_value))
    checks.append(("closed-form dual value", abs(at.value - ref.dual_value) / scale, 1e-8))
    pt_ref = per_bs_power(ref.beams, c.n_ant)
    pt = per_bs_power(at.payload, c.n_ant)
    checks.append(("closed-form per-BS power", float(np.max(np.abs(pt - pt_ref)))
                   / max(1.0, float(np.max(pt_ref))), 1e-8))
    if (c.n_bs, c.n_ant) == (2, 1):
        grid = grid_search_two_bs(instance, GRID_STEP)
        # one grid cell moves the cost by at most this much
        cell = 2.0 * GRID_STEP * float(np.max(instance.energy.price_buy)) / c.pa_efficiency
        checks.append(("grid-search cost", abs(outcome.cost - grid.cost), cell + 1e-6))
    ok = outcome.converged
    print(f"solver cost {outcome.cost:.9g} (converged {outcome.converged})")
    for name, delta, tol in checks:
        good = delta <= tol
        ok &= good
        print(f"{name:<26} delta {delta:.3e}  tol {tol:.1e}  {'ok' if good else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def cmd_feasibility(args) -> int:
    conf = _load(args)
    instance = conf.instance()
    check = check_zf_feasible if args.zf else check_feasible
    try:
        report = check(instance, conf.solver)
    except InfeasibleError as exc:  # structural zero-forcing failure
        print(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    except NotConvergedError as exc:
        print(f"undecided: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    verdict = "feasible" if report.feasible else "infeasible"
    print(f"{verdict} (max power / cap = {report.margin:.6g})")
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="comptrade",
        description="Joint energy trading and cooperative beamforming for a CoMP cluster.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="override the layout/simulation seed")
        p.add_argument("--tol", type=float, help="ellipsoid tolerance")
        p.add_argument("--max-iter", type=int, dest="max_iter", help="ellipsoid iteration budget")

    p = sub.add_parser("solve", help="solve one instance", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p.add_argument("--scheme", choices=list(SCHEMES), default="optimal")
    p.add_argument("--out", help="also write the report as JSON to this file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="run a renewable timeline", epilog=EPILOG,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p.add_argument("--renewables", help="'synthetic' or a block,bs_id,energy CSV file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--channels", choices=CHANNEL_MODES, help="channel reuse mode")
    p.add_argument("--blocks", type=int, help="number of synthetic blocks")
    p.add_argument("--scheme", action="append", choices=list(SCHEMES),
                   help="scheme to run (repeatable; default all)")
    p.add_argument("--policy", choices=POLICIES, help="what to do with infeasible blocks")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="cross-check the solver against reference oracles",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("feasibility", help="check whether the QoS targets are attainable",
                       epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p)
    p.add_argument("--zf", action="store_true", help="check the zero-forcing problem")
    p.set_defaults(func=cmd_feasibility)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except cfg.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NotConvergedError as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
