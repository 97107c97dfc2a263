"""Command-line entry point: one subcommand per experiment."""
from __future__ import annotations

import argparse
import json
import sys

from .config import EXPERIMENTS, ConfigError, load_config, parse_set_overrides
from .core import DivergenceError
from .datasets import LibsvmParseError
from .experiments import RUNNERS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgthermo",
        description="Thermostat-based stochastic-gradient MCMC experiments",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON config file; defaults are used when omitted")
        p.add_argument("--out", help="output directory for CSV files and figures")
        p.add_argument("--seed", type=int, help="base seed for every derived stream")
        p.add_argument(
            "--set", action="append", metavar="KEY=VALUE", dest="overrides",
            help="override one config field (JSON value; dotted keys reach model.*)",
        )
        p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(
            args.experiment,
            path=args.config,
            overrides=parse_set_overrides(args.overrides),
            seed=args.seed,
            out_dir=args.out,
            figures=False if args.no_figures else None,
        )
        RUNNERS[config.experiment](config)
    except (ConfigError, LibsvmParseError, FileNotFoundError) as err:
        print(json.dumps({"error": type(err).__name__, "detail": str(err)}), file=sys.stderr)
        return 2
    except DivergenceError as err:
        print(json.dumps({"error": "DivergenceError", "detail": str(err), "step": err.step}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
