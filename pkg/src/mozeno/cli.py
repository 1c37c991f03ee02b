"""Command-line entry point: ``mozeno <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from .core import (
    InstanceTooLargeError,
    Mode,
    MozenoError,
    MultiZenoConfig,
    UnsupportedConfigError,
    dump_instance,
    exact_front_analytic,
    fmt_rational,
    load_instance,
    write_front_csv,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    aggregate,
    config_from_dict,
    load_campaign,
    load_config,
    moea_params_for,
    parse_strategy_weights,
    run_experiment,
    run_single,
    with_overrides,
    write_run,
    write_stats,
)
from .moea import SCHEME_NAMES
from .oracle import exact_front_oracle

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _triple(text: str) -> tuple[Fraction, ...]:
    try:
        values = tuple(Fraction(v.strip()) for v in text.split(","))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected three numbers, got {text!r}") from None
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"expected three numbers, got {text!r}")
    return values


def _instance_from_args(args) -> MultiZenoConfig:
    if getattr(args, "instance", None):
        return load_instance(args.instance)
    cfg = MultiZenoConfig(k=args.k, planes=args.planes, mode=Mode(args.mode),
                          **{name: getattr(args, name) for name in ("durations", "costs", "risks")
                             if getattr(args, name) is not None})
    if args.alpha is not None:
        cfg = cfg.with_alpha(args.alpha)
    return cfg


def _instance_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=1, help="number of 3-passenger bunches")
    p.add_argument("--planes", type=int, default=2)
    p.add_argument("--mode", choices=[m.value for m in Mode], default="cost")
    p.add_argument("--alpha", type=Fraction, help="landing cost of the middle central city")
    p.add_argument("--durations", type=_triple)
    p.add_argument("--costs", type=_triple)
    p.add_argument("--risks", type=_triple)


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--instance", help="instance JSON (overrides the config's instance)")
    p.add_argument("--scheme", choices=sorted(SCHEME_NAMES))
    p.add_argument("--strategy-weights", help="wM,wS relative weights of the two planner strategies")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-evals", type=int)
    p.add_argument("--max-seconds", type=float)
    p.add_argument("--out", required=True, help="output directory")


def _experiment_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    over = {}
    if args.instance:
        over["instance"] = load_instance(args.instance)
    if args.scheme:
        m = cfg.moea
        over["moea"] = moea_params_for(args.scheme, population_size=m.population_size,
                                       archive_size=m.archive_size, kappa=m.kappa,
                                       reference_point=m.reference_point)
    if args.strategy_weights:
        over["strategy"] = parse_strategy_weights(args.strategy_weights)
    if args.max_evals is not None or args.max_seconds is not None:
        # a bound given on the command line replaces both bounds of the config
        cfg = replace(cfg, max_evals=args.max_evals, max_seconds=args.max_seconds)
    if args.seed is not None:
        over["base_seed"] = args.seed
    if getattr(args, "runs", None) is not None:
        over["runs"] = args.runs
    return with_overrides(cfg, **over)


def cmd_generate(args) -> int:
    cfg = _instance_from_args(args)
    if args.out:
        dump_instance(cfg, args.out)
    else:
        print(json.dumps(cfg.to_json(), indent=2))
    return 0


def cmd_front(args) -> int:
    cfg = _instance_from_args(args)
    front = exact_front_oracle(cfg) if args.oracle else exact_front_analytic(cfg)
    if args.out:
        write_front_csv(front, args.out)
    else:
        print("makespan,secondary")
        for p in front:
            print(f"{fmt_rational(p.makespan)},{fmt_rational(p.secondary)}")
    return 0


def cmd_run(args) -> int:
    cfg = _experiment_config(args)
    result = run_single(cfg, cfg.base_seed)
    write_run(result, args.out, cfg)
    hv = result.final_hypervolume
    print(f"seed {result.seed}: {result.evaluations} evaluations, {len(result.front)} front points, "
          f"hypervolume deficit {float(hv):.6f}")
    return 0


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    results = run_experiment(cfg, args.out, resume=not args.fresh)
    failed = [r.seed for r in results if r.error]
    agg = aggregate(results, Path(args.out) / "aggregate")
    print(f"{len(results) - len(failed)}/{len(results)} runs ok; "
          f"final mean hypervolume deficit {agg.hypervolume[-1][1]:.6f}")
    return EXIT_RUNTIME if len(failed) == len(results) else 0


def cmd_aggregate(args) -> int:
    results = load_campaign(args.campaign)
    if not results:
        raise ConfigError(f"no runs found in {args.campaign}")
    agg = aggregate(results, args.out or Path(args.campaign) / "aggregate")
    print(f"{len(results)} runs; final mean hypervolume deficit {agg.hypervolume[-1][1]:.6f}")
    return 0


def cmd_stats(args) -> int:
    campaigns = {}
    for entry in args.campaigns:
        name, _, path = entry.rpartition("=")
        name = name or Path(path).name
        runs = load_campaign(path)
        if len(runs) < 6:
            raise ConfigError(f"{path}: need at least 6 runs, found {len(runs)}")
        campaigns[name] = runs
    text = write_stats(campaigns, args.out)
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mozeno", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a MultiZeno instance JSON")
    _instance_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("front", help="write the exact Pareto front CSV")
    _instance_flags(p)
    p.add_argument("--instance")
    how = p.add_mutually_exclusive_group()
    how.add_argument("--analytic", action="store_true", help="closed form (default)")
    how.add_argument("--oracle", action="store_true", help="exhaustive search, k <= 2")
    p.add_argument("--out")
    p.set_defaults(func=cmd_front)

    p = sub.add_parser("run", help="one seeded run")
    _run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("experiment", help="multi-seed campaign")
    _run_flags(p)
    p.add_argument("--runs", type=int)
    p.add_argument("--fresh", action="store_true", help="recompute runs already on disk")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("aggregate", help="summarize a campaign directory")
    p.add_argument("campaign")
    p.add_argument("--out")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("stats", help="pairwise Wilcoxon table over campaigns")
    p.add_argument("campaigns", nargs="+", help="campaign directories, optionally NAME=DIR")
    p.add_argument("--out", required=True, help="CSV table path")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UnsupportedConfigError, InstanceTooLargeError, ValueError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MozenoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - last resort
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
