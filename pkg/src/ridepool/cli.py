"""Command-line harness for simulation runs and experiment reports."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_scenario
from .experiments import (compare, distance_report, fleet_search,
                          load_experiment_spec)
from .matching import ValueFunction
from .pricing import load_pricer
from .sim import read_metrics_csv, run, write_metrics_csv


def cmd_run(args) -> int:
    overrides = {}
    if args.policy is not None:
        overrides["policy"] = args.policy
    if args.seed is not None:
        overrides["seed"] = args.seed
    scenario = load_scenario(args.config, overrides)

    pricer = vf = None
    if args.checkpoint_in:
        src = Path(args.checkpoint_in)
        pricer = load_pricer(src / "pricer.json")
        vf = ValueFunction.load(src / "value.json", scenario.net)

    metrics, world = run(scenario.config, scenario.demand, scenario.net,
                         mode=args.mode, pricer=pricer, value_function=vf)
    write_metrics_csv(metrics, args.out)

    if args.checkpoint_out:
        dst = Path(args.checkpoint_out)
        dst.mkdir(parents=True, exist_ok=True)
        world.pricer.save(dst / "pricer.json")
        world.value_function.save(dst / "value.json")

    total = sum(m.revenue for m in metrics)
    served = sum(m.served for m in metrics)
    print(f"{scenario.config.policy} seed={scenario.config.seed} mode={args.mode}: "
          f"{len(metrics)} epochs, revenue {total:.2f}, served {served} -> {args.out}")
    return 0


def cmd_compare(args) -> int:
    spec = load_experiment_spec(args.spec)
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.spec).parent / "report"
    results = compare(spec, out_dir=out_dir, figures=not args.no_figures)
    print(f"{'policy':<10} {'mean':>12} {'std':>10} {'delta%':>8}")
    for r in results:
        print(f"{r.policy:<10} {r.mean_revenue:>12.2f} {r.std_revenue:>10.2f} "
              f"{r.delta_pct:>8.2f}")
    print(f"report written to {out_dir}")
    return 0


def cmd_fleet_search(args) -> int:
    spec = load_experiment_spec(args.spec)
    size = fleet_search(spec, args.target, policy=args.policy, frozen=args.frozen)
    print(f"minimal fleet size for revenue {args.target:g}: {size}")
    return 0


def cmd_distance(args) -> int:
    streams = [read_metrics_csv(p) for p in args.inputs]
    km = distance_report(streams, args.fleet, args.epoch_seconds)
    print(f"mean km per vehicle per hour: {km:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ridepool",
        description="Ride-pooling simulator with learned pricing and matching")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario and write a metrics CSV")
    p_run.add_argument("--config", required=True, help="scenario config file")
    p_run.add_argument("--policy", help="override the scenario's policy code")
    p_run.add_argument("--seed", type=int, help="override the scenario's seed")
    p_run.add_argument("--mode", choices=("train", "eval"), default="train")
    p_run.add_argument("--out", required=True, help="metrics CSV path")
    p_run.add_argument("--checkpoint-in", help="directory with pricer.json and value.json")
    p_run.add_argument("--checkpoint-out", help="directory to save final learner state")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="train and compare policies against F&N-E")
    p_cmp.add_argument("--spec", required=True, help="experiment spec file")
    p_cmp.add_argument("--out-dir", help="report directory (CSV + figures)")
    p_cmp.add_argument("--no-figures", action="store_true")
    p_cmp.set_defaults(func=cmd_compare)

    p_fs = sub.add_parser("fleet-search", help="minimal fleet reaching a revenue target")
    p_fs.add_argument("--spec", required=True)
    p_fs.add_argument("--target", type=float, required=True)
    p_fs.add_argument("--policy", help="policy to search (default: first in spec)")
    p_fs.add_argument("--frozen", action="store_true",
                      help="reuse one trained checkpoint for every fleet size probe")
    p_fs.set_defaults(func=cmd_fleet_search)

    p_d = sub.add_parser("distance", help="mean km per vehicle per hour from metrics CSVs")
    p_d.add_argument("--in", dest="inputs", nargs="+", required=True)
    p_d.add_argument("--fleet", type=int, required=True)
    p_d.add_argument("--epoch-seconds", type=float, default=60.0)
    p_d.set_defaults(func=cmd_distance)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
